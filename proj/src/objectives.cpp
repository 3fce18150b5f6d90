#include "tsctm/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "tsctm/parallel.hpp"

namespace tsctm {

PairSets build_pairs(std::span<const std::size_t> q, bool with_augmentation) {
    const std::size_t n = q.size();
    PairSets pairs;
    pairs.positives.resize(n);
    pairs.negatives.resize(n);
    pairs.aug_positive.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            (q[j] == q[i] ? pairs.positives[i] : pairs.negatives[i]).push_back(j);
        }
        if (with_augmentation) pairs.aug_positive[i] = n + i;
    }
    return pairs;
}

PairSets build_pairs(std::span<const ForwardTrace> traces) {
    std::vector<std::size_t> q;
    std::size_t n_aug = 0;
    for (std::size_t i = 0; i < traces.size(); ++i) {
        const auto& t = traces[i];
        if (t.is_augmented) {
            ++n_aug;
        } else {
            if (n_aug != 0 || t.row != q.size()) {
                throw std::invalid_argument("build_pairs: original traces must come first, in row order");
            }
            q.push_back(t.q);
        }
    }
    if (q.empty()) throw std::invalid_argument("build_pairs: no original traces");
    if (n_aug != 0) {
        if (n_aug != q.size()) {
            throw std::invalid_argument("build_pairs: augmented traces do not pair with originals");
        }
        for (std::size_t i = 0; i < n_aug; ++i) {
            if (traces[q.size() + i].row != i) {
                throw std::invalid_argument("build_pairs: augmented traces out of order");
            }
        }
    }
    return build_pairs(q, n_aug != 0);
}

double score(std::span<const double> a, std::span<const double> b, double tau) {
    const double na = norm2(a);
    const double nb = norm2(b);
    if (na == 0.0 || nb == 0.0) {
        throw std::domain_error("score: zero-norm representation (degenerate encoder state)");
    }
    return dot(a, b) / (na * nb) / tau;
}

namespace {

// Pairwise scores plus an accumulator for d loss / d score, back-propagated
// to the representations in one pass.
class ScoreTable {
public:
    ScoreTable(std::span<const Vector> h, double tau)
        : h_(h), tau_(tau), n_(h.size()), norms_(n_), unit_(n_), coeff_(n_ * n_, 0.0) {
        for (std::size_t i = 0; i < n_; ++i) {
            norms_[i] = norm2(h[i]);
            unit_[i] = h[i];
            if (norms_[i] > 0.0) {
                for (double& x : unit_[i]) x /= norms_[i];
            }
        }
    }

    double operator()(std::size_t a, std::size_t b) const {
        check(a);
        check(b);
        return dot(unit_[a], unit_[b]) / tau_;
    }

    void add(std::size_t a, std::size_t b, double c) { coeff_[a * n_ + b] += c; }

    std::vector<Vector> backprop() const {
        const std::size_t K = n_ == 0 ? 0 : h_[0].size();
        std::vector<Vector> grad(n_, Vector(K, 0.0));
        for (std::size_t a = 0; a < n_; ++a) {
            for (std::size_t b = 0; b < n_; ++b) {
                const double c = coeff_[a * n_ + b];
                if (c == 0.0) continue;
                const auto& ua = unit_[a];
                const auto& ub = unit_[b];
                const double cos = dot(ua, ub);
                const double sa = c / (norms_[a] * tau_);
                const double sb = c / (norms_[b] * tau_);
                for (std::size_t k = 0; k < K; ++k) {
                    grad[a][k] += sa * (ub[k] - cos * ua[k]);
                    grad[b][k] += sb * (ua[k] - cos * ub[k]);
                }
            }
        }
        return grad;
    }

private:
    void check(std::size_t i) const {
        if (norms_[i] == 0.0) {
            throw std::domain_error("score: zero-norm representation (degenerate encoder state)");
        }
    }

    std::span<const Vector> h_;
    double tau_;
    std::size_t n_;
    Vector norms_;
    std::vector<Vector> unit_;
    Vector coeff_;
};

ContrastiveResult contrastive(std::span<const Vector> h, const PairSets& pairs,
                              const TscConfig& cfg, bool augmented) {
    if (!(cfg.tau > 0.0)) throw std::invalid_argument("tsc: tau must be > 0");
    ContrastiveResult res;
    const std::size_t n = pairs.anchors();
    if (augmented) {
        for (std::size_t i = 0; i < n; ++i) {
            if (!pairs.aug_positive[i] || *pairs.aug_positive[i] >= h.size()) {
                throw std::invalid_argument("tsc_da_loss: anchor " + std::to_string(i) +
                                            " has no augmented view");
            }
        }
    }

    auto contributes = [&](std::size_t i) {
        if (cfg.use_negatives && pairs.negatives[i].empty()) return false;
        return augmented || !pairs.positives[i].empty();
    };
    for (std::size_t i = 0; i < n; ++i) res.contributing += contributes(i) ? 1 : 0;
    if (res.contributing == 0) {
        res.grad_h.assign(h.size(), Vector(h.empty() ? 0 : h.front().size(), 0.0));
        return res;
    }

    ScoreTable s(h, cfg.tau);
    const double anchor_weight = 1.0 / static_cast<double>(res.contributing);
    const bool incl = cfg.include_positive_in_denominator;
    std::vector<std::size_t> others;
    std::vector<double> other_scores;
    std::vector<std::pair<std::size_t, double>> positives;  // (trace, weight)
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!contributes(i)) continue;

        // Denominator members shared by every positive of this anchor.
        others.clear();
        if (cfg.use_negatives) {
            for (std::size_t j : pairs.negatives[i]) {
                others.push_back(j);
                if (augmented) others.push_back(*pairs.aug_positive[j]);
            }
        }
        positives.clear();
        if (augmented) positives.emplace_back(*pairs.aug_positive[i], 1.0);
        const double original_weight = augmented ? cfg.lambda_original : 1.0;
        const auto& P = pairs.positives[i];
        if (original_weight != 0.0 && !P.empty()) {
            double w = original_weight;
            if (cfg.reduce == Reduction::mean) w /= static_cast<double>(P.size());
            for (std::size_t l : P) positives.emplace_back(l, w);
        }

        double anchor_value = 0.0;
        if (!cfg.use_negatives) {
            for (auto [l, w] : positives) {
                anchor_value -= w * s(i, l);
                s.add(i, l, -w * anchor_weight);
            }
        } else {
            // -log(exp(s_il) / D_l) with D_l = sum_j exp(s_ij) [+ exp(s_il)],
            // everything shifted by the anchor's largest score.
            other_scores.clear();
            double shift = -std::numeric_limits<double>::infinity();
            for (std::size_t j : others) {
                other_scores.push_back(s(i, j));
                shift = std::max(shift, other_scores.back());
            }
            Vector pos_scores;
            for (auto [l, w] : positives) {
                pos_scores.push_back(s(i, l));
                if (incl) shift = std::max(shift, pos_scores.back());
            }
            double neg_sum = 0.0;
            for (double& x : other_scores) {
                x = std::exp(x - shift);
                neg_sum += x;
            }
            double inv_denominators = 0.0;  // sum_l w_l / D_l
            for (std::size_t p = 0; p < positives.size(); ++p) {
                const auto [l, w] = positives[p];
                const double e_pos = std::exp(pos_scores[p] - shift);
                const double d = neg_sum + (incl ? e_pos : 0.0);
                anchor_value += w * (-pos_scores[p] + shift + std::log(d));
                s.add(i, l, w * anchor_weight * (-1.0 + (incl ? e_pos / d : 0.0)));
                inv_denominators += w / d;
            }
            for (std::size_t j = 0; j < others.size(); ++j) {
                s.add(i, others[j], anchor_weight * other_scores[j] * inv_denominators);
            }
        }
        total += anchor_value;
    }
    res.value = total * anchor_weight;
    res.grad_h = s.backprop();
    return res;
}

std::vector<Vector> representations(std::span<const ForwardTrace> traces) {
    std::vector<Vector> h;
    h.reserve(traces.size());
    for (const auto& t : traces) h.push_back(t.enc.h);
    return h;
}

}  // namespace

ContrastiveResult tsc_loss(std::span<const Vector> h, const PairSets& pairs,
                           const TscConfig& cfg) {
    return contrastive(h, pairs, cfg, false);
}

ContrastiveResult tsc_loss(std::span<const ForwardTrace> traces, const PairSets& pairs,
                           const TscConfig& cfg) {
    return tsc_loss(representations(traces), pairs, cfg);
}

ContrastiveResult tsc_da_loss(std::span<const Vector> h, const PairSets& pairs,
                              const TscConfig& cfg) {
    return contrastive(h, pairs, cfg, true);
}

ContrastiveResult tsc_da_loss(std::span<const ForwardTrace> traces, const PairSets& pairs,
                              const TscConfig& cfg) {
    return tsc_da_loss(representations(traces), pairs, cfg);
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
    recon += o.recon;
    codebook += o.codebook;
    commit += o.commit;
    tsc += o.tsc;
    total += o.total;
    return *this;
}

LossBreakdown LossBreakdown::scaled(double s) const {
    return {recon * s, codebook * s, commit * s, tsc * s, total * s};
}

TmResult tm_loss(const ForwardTrace& trace, const BowRow& row, double lambda_commit,
                 VqNorm norm) {
    const std::size_t K = trace.enc.theta.size();
    const std::size_t V = trace.recon_logits.size();
    TmResult r;

    // -x^T log softmax(beta theta_st); d/dlogits = n * softmax - x.
    const Vector log_p = log_softmax(trace.recon_logits);
    double n = 0.0;
    r.grad_logits.assign(V, 0.0);
    for (const auto& e : row) {
        if (e.word >= V) throw std::out_of_range("tm_loss: word id out of range");
        r.loss.recon -= e.count * log_p[e.word];
        r.grad_logits[e.word] -= e.count;
        n += e.count;
    }
    for (std::size_t v = 0; v < V; ++v) r.grad_logits[v] += n * std::exp(log_p[v]);

    // Straight-through: the gradient at theta_st is copied onto theta. The
    // caller folds in beta^T grad_logits; here only the VQ terms.
    r.grad_theta.assign(K, 0.0);
    r.grad_codebook_row.assign(K, 0.0);

    // codebook: ||sg(theta) - e_q||, gradient to e_q only.
    // commit:   lambda ||theta - sg(theta_q)||, gradient to theta only.
    Vector cb_diff(K), cm_diff(K);
    for (std::size_t k = 0; k < K; ++k) {
        cb_diff[k] = trace.theta_q[k] - trace.sg.theta[k];
        cm_diff[k] = trace.enc.theta[k] - trace.sg.theta_q[k];
    }
    const double cb_sq = dot(cb_diff, cb_diff);
    const double cm_sq = dot(cm_diff, cm_diff);
    if (norm == VqNorm::squared) {
        r.loss.codebook = cb_sq;
        r.loss.commit = lambda_commit * cm_sq;
        for (std::size_t k = 0; k < K; ++k) {
            r.grad_codebook_row[k] = 2.0 * cb_diff[k];
            r.grad_theta[k] = 2.0 * lambda_commit * cm_diff[k];
        }
    } else {
        // Subgradient 0 at a zero residual.
        const double cb = std::sqrt(cb_sq);
        const double cm = std::sqrt(cm_sq);
        r.loss.codebook = cb;
        r.loss.commit = lambda_commit * cm;
        for (std::size_t k = 0; k < K; ++k) {
            r.grad_codebook_row[k] = cb > 0.0 ? cb_diff[k] / cb : 0.0;
            r.grad_theta[k] = cm > 0.0 ? lambda_commit * cm_diff[k] / cm : 0.0;
        }
    }
    r.loss.total = r.loss.recon + r.loss.codebook + r.loss.commit;
    return r;
}

TotalLossResult total_loss(const ModelParams& params, const BowBatch& batch,
                           const LossConfig& cfg, bool augmented,
                           std::span<const StopGradient> frozen, std::size_t threads) {
    if (augmented && !batch.aug_rows) {
        throw std::invalid_argument(
            "augmented objective requires paired augmentation, but the batch has no aug_rows");
    }
    if (batch.rows.empty()) throw std::invalid_argument("total_loss: empty batch");

    const BowBatch* effective = &batch;
    BowBatch plain;
    if (!augmented && batch.aug_rows) {
        plain.rows = batch.rows;
        effective = &plain;
    }
    const BatchTraces pass = forward(params, *effective, frozen, threads);
    const std::vector<ForwardTrace>& traces = pass.traces;
    const std::size_t n_traces = traces.size();
    const std::size_t B = batch.rows.size();
    const double inv_b = 1.0 / static_cast<double>(B);
    const std::size_t K = params.num_topics();
    const std::size_t V = params.vocab_size();

    TotalLossResult res;
    res.grad = ModelParams::zeros(params.shape());
    for (std::size_t i = 0; i < B; ++i) res.q.push_back(traces[i].q);

    auto row_of = [&](const ForwardTrace& t) -> const BowRow& {
        return t.is_augmented ? (*batch.aug_rows)[t.row] : batch.rows[t.row];
    };

    // Per-trace topic-model terms.
    std::vector<TmResult> tm(n_traces);
    parallel_for(n_traces, threads, [&](std::size_t i) {
        tm[i] = tm_loss(traces[i], row_of(traces[i]), cfg.lambda_commit, cfg.vq_norm);
    });
    for (const auto& r : tm) res.loss += r.loss;
    res.loss = res.loss.scaled(inv_b);

    const PairSets pairs = build_pairs(traces);
    const ContrastiveResult tsc = augmented ? tsc_da_loss(traces, pairs, cfg.tsc)
                                            : tsc_loss(traces, pairs, cfg.tsc);
    res.loss.tsc = tsc.value;
    res.loss.total = res.loss.recon + res.loss.codebook + res.loss.commit +
                     cfg.tsc.lambda_tsc * tsc.value;

    // d/dh for every trace, then back through the encoder.
    std::vector<Vector> dh(n_traces);
    std::vector<std::vector<Vector>> dpre(n_traces);
    parallel_for(n_traces, threads, [&](std::size_t i) {
        const auto& t = traces[i];
        Vector dtheta = matvec_transposed(params.beta, tm[i].grad_logits);
        for (std::size_t k = 0; k < K; ++k) dtheta[k] = (dtheta[k] + tm[i].grad_theta[k]) * inv_b;
        const double inner = dot(dtheta, t.enc.theta);
        Vector g(K);
        for (std::size_t k = 0; k < K; ++k) {
            g[k] = t.enc.theta[k] * (dtheta[k] - inner) + cfg.tsc.lambda_tsc * tsc.grad_h[i][k];
        }
        dh[i] = std::move(g);
    });
    if (params.batch_norm) {
        // Through h = (z - mean) * inv_std with batch statistics:
        // dz = inv_std * (dh - mean(dh) - h * mean(dh * h)).
        Vector mean_g(K, 0.0), mean_gh(K, 0.0);
        for (std::size_t i = 0; i < n_traces; ++i) {
            for (std::size_t k = 0; k < K; ++k) {
                mean_g[k] += dh[i][k];
                mean_gh[k] += dh[i][k] * traces[i].enc.h[k];
            }
        }
        const double inv_n = 1.0 / static_cast<double>(n_traces);
        for (std::size_t k = 0; k < K; ++k) {
            mean_g[k] *= inv_n;
            mean_gh[k] *= inv_n;
        }
        for (std::size_t i = 0; i < n_traces; ++i) {
            for (std::size_t k = 0; k < K; ++k) {
                dh[i][k] = pass.inv_std[k] *
                           (dh[i][k] - mean_g[k] - traces[i].enc.h[k] * mean_gh[k]);
            }
        }
    }
    // Encoder backward from d/dz.
    parallel_for(n_traces, threads, [&](std::size_t i) {
        const auto& t = traces[i];
        const std::size_t L = params.hidden.size();
        dpre[i].resize(L);
        Vector da = matvec_transposed(params.output.weight, dh[i]);
        for (std::size_t l = L; l-- > 0;) {
            Vector d(da.size());
            for (std::size_t r = 0; r < d.size(); ++r) d[r] = da[r] * sigmoid(t.enc.pre[l][r]);
            if (l > 0) da = matvec_transposed(params.hidden[l].weight, d);
            dpre[i][l] = std::move(d);
        }
    });

    // Weight gradients: each output row is owned by one worker and sums over
    // traces in index order.
    auto& gout = res.grad.output;
    parallel_for(K, threads, [&](std::size_t r) {
        auto grow = gout.weight.row(r);
        for (std::size_t i = 0; i < n_traces; ++i) {
            const double d = dh[i][r];
            const auto& a = traces[i].enc.act.back();
            for (std::size_t c = 0; c < grow.size(); ++c) grow[c] += d * a[c];
            gout.bias[r] += d;
        }
    });
    for (std::size_t l = 0; l < params.hidden.size(); ++l) {
        auto& gl = res.grad.hidden[l];
        parallel_for(gl.bias.size(), threads, [&](std::size_t r) {
            auto grow = gl.weight.row(r);
            for (std::size_t i = 0; i < n_traces; ++i) {
                const double d = dpre[i][l][r];
                if (l == 0) {
                    for (const auto& e : row_of(traces[i])) grow[e.word] += d * e.count;
                } else {
                    const auto& a = traces[i].enc.act[l - 1];
                    for (std::size_t c = 0; c < grow.size(); ++c) grow[c] += d * a[c];
                }
                gl.bias[r] += d;
            }
        });
    }
    parallel_for(V, threads, [&](std::size_t v) {
        auto grow = res.grad.beta.row(v);
        for (std::size_t i = 0; i < n_traces; ++i) {
            const double d = tm[i].grad_logits[v] * inv_b;
            const auto& st = traces[i].theta_st;
            for (std::size_t k = 0; k < K; ++k) grow[k] += d * st[k];
        }
    });
    for (std::size_t i = 0; i < n_traces; ++i) {
        auto grow = res.grad.codebook.row(traces[i].q);
        for (std::size_t k = 0; k < K; ++k) grow[k] += tm[i].grad_codebook_row[k] * inv_b;
    }
    return res;
}

}  // namespace tsctm
