#include "tsctm/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "tsctm/eval.hpp"

namespace tsctm {

namespace {

BowRow random_row(std::size_t V, Rng& rng) {
    std::vector<Document> one(1);
    const std::size_t len = 2 + rng.below(6);
    for (std::size_t i = 0; i < len; ++i) {
        one[0].tokens.push_back(static_cast<WordId>(rng.below(V)));
    }
    return to_bow_row(one[0]);
}

void unflatten(std::span<const double> flat, ModelParams& p) {
    std::size_t at = 0;
    for (auto t : p.tensors()) {
        std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(at), t.size(), t.begin());
        at += t.size();
    }
}

Vector flatten(const ModelParams& p) {
    Vector flat;
    for (auto t : p.tensors()) flat.insert(flat.end(), t.begin(), t.end());
    return flat;
}

std::string fmt(double x) {
    std::ostringstream s;
    s.precision(3);
    s << std::scientific << x;
    return s.str();
}

}  // namespace

GradientCheckOutcome gradient_check(const GradientCheckCase& c, double h) {
    Rng rng(c.seed);
    ModelParams params =
        init_params({c.vocab_size, c.num_topics, c.hidden, c.encoder_layers, c.batch_norm}, rng);
    // Move the codebook off the identity so every codebook entry matters.
    for (double& x : params.codebook.values()) x += rng.uniform(-0.1, 0.1);

    BowBatch batch;
    for (std::size_t i = 0; i < c.batch; ++i) batch.rows.push_back(random_row(c.vocab_size, rng));
    if (c.augmented) {
        batch.aug_rows.emplace();
        for (std::size_t i = 0; i < c.batch; ++i) {
            batch.aug_rows->push_back(random_row(c.vocab_size, rng));
        }
    }

    LossConfig cfg;
    cfg.lambda_commit = 0.1;
    cfg.vq_norm = c.vq_norm;
    cfg.tsc.tau = 0.5;
    cfg.tsc.lambda_tsc = 1.0;
    cfg.tsc.lambda_original = 0.7;
    cfg.tsc.include_positive_in_denominator = c.include_positive;
    cfg.tsc.reduce = c.reduce;

    std::vector<StopGradient> frozen = snapshot(forward(params, batch));
    // A random encoder often sends the whole batch to one index; pin a mixed
    // assignment instead so both positive and negative pairs exist.
    std::set<std::size_t> distinct;
    for (std::size_t i = 0; i < c.batch; ++i) distinct.insert(frozen[i].q);
    if (distinct.size() < 2 || distinct.size() == c.batch) {
        for (std::size_t i = 0; i < frozen.size(); ++i) {
            const std::size_t q = (i % c.batch) % 3 % c.num_topics;
            frozen[i].q = q;
            auto row = params.codebook.row(q);
            frozen[i].theta_q.assign(row.begin(), row.end());
        }
    }

    const TotalLossResult analytic = total_loss(params, batch, cfg, c.augmented, frozen);
    const Vector base = flatten(params);
    ModelParams scratch = params;
    const Vector numeric = fd_gradient(
        [&](std::span<const double> x) {
            unflatten(x, scratch);
            return total_loss(scratch, batch, cfg, c.augmented, frozen).loss.total;
        },
        base, h);

    GradientCheckOutcome out;
    const PairSets pairs = build_pairs(std::span<const std::size_t>(analytic.q), c.augmented);
    for (std::size_t i = 0; i < pairs.anchors(); ++i) {
        if (!pairs.positives[i].empty() && !pairs.negatives[i].empty()) ++out.anchors_with_pairs;
    }

    static const char* const kNames2[] = {"W1", "b1", "W2", "b2", "Wout", "bout", "E", "Beta"};
    static const char* const kNames1[] = {"W1", "b1", "Wout", "bout", "E", "Beta"};
    const auto grads = std::as_const(analytic.grad).tensors();
    std::size_t at = 0;
    for (std::size_t t = 0; t < grads.size(); ++t) {
        const std::span<const double> num(numeric.data() + at, grads[t].size());
        const double err = max_relative_error(grads[t], num, kGradientScaleFloor);
        if (err >= out.max_rel_error) {
            out.max_rel_error = err;
            out.worst_tensor = c.encoder_layers == 2 ? kNames2[t] : kNames1[t];
        }
        at += grads[t].size();
    }
    return out;
}

std::vector<CheckResult> run_gradient_suite(std::size_t instances, std::uint64_t seed) {
    std::vector<CheckResult> results;
    for (std::size_t i = 0; i < instances; ++i) {
        GradientCheckCase c;
        c.augmented = (i & 1) != 0;
        c.include_positive = (i & 2) == 0;
        c.vq_norm = (i & 4) == 0 ? VqNorm::squared : VqNorm::l2;
        c.reduce = (i & 8) == 0 ? Reduction::sum : Reduction::mean;
        c.batch_norm = i % 3 != 2;
        c.seed = seed * 1000 + i;
        const auto out = gradient_check(c);
        std::ostringstream name;
        name << "gradient[" << i << "] " << (c.augmented ? "augmented" : "plain") << ' '
             << (c.include_positive ? "infonce" : "literal") << ' '
             << (c.vq_norm == VqNorm::squared ? "sq" : "l2") << ' '
             << (c.reduce == Reduction::sum ? "sum" : "mean")
             << (c.batch_norm ? "" : " no-norm");
        results.push_back({name.str(), out.max_rel_error <= kGradientTolerance,
                           "max rel err " + fmt(out.max_rel_error) + " (" + out.worst_tensor +
                               "), anchors with pairs " + std::to_string(out.anchors_with_pairs)});
    }
    return results;
}

CheckResult run_quantization_oracle(std::size_t samples, std::size_t K, std::uint64_t seed) {
    Rng rng(seed);
    const Matrix identity = Matrix::identity(K);
    std::size_t mismatches = 0;
    for (std::size_t s = 0; s < samples; ++s) {
        // Uniform on the simplex via normalized exponentials.
        Vector theta(K);
        double sum = 0.0;
        for (double& x : theta) {
            x = -std::log(1.0 - rng.uniform());
            sum += x;
        }
        for (double& x : theta) x /= sum;
        const auto argmax =
            static_cast<std::size_t>(std::max_element(theta.begin(), theta.end()) - theta.begin());
        if (quantize(theta, identity).index != argmax) ++mismatches;
    }
    return {"quantization == argmax (" + std::to_string(samples) + " samples)", mismatches == 0,
            std::to_string(mismatches) + " mismatches"};
}

std::vector<CheckResult> run_metric_oracles() {
    std::vector<CheckResult> out;
    auto check = [&](std::string name, double got, double want, double tol) {
        out.push_back({std::move(name), std::abs(got - want) <= tol,
                       "got " + std::to_string(got) + ", want " + std::to_string(want)});
    };
    auto topic = [](std::vector<WordId> w) { return Topic{std::move(w), {}}; };

    check("TU disjoint", topic_uniqueness({topic({0, 1}), topic({2, 3})}), 1.0, 1e-12);
    check("TU identical K=3", topic_uniqueness({topic({0, 1}), topic({0, 1}), topic({0, 1})}),
          1.0 / 3.0, 1e-12);
    check("TU {a,b},{a,c}", topic_uniqueness({topic({0, 1}), topic({0, 2})}), 0.75, 1e-12);

    const std::vector<std::size_t> same_c{0, 0, 1, 1, 2};
    const std::vector<int> same_l{5, 5, 7, 7, 9};
    check("purity identical partitions", purity(same_c, same_l), 1.0, 1e-12);
    check("purity {A,A,B},{B}", purity(std::vector<std::size_t>{0, 0, 0, 1},
                                       std::vector<int>{0, 0, 1, 1}),
          0.75, 1e-12);
    check("purity one cluster, two labels",
          purity(std::vector<std::size_t>{0, 0, 0, 0}, std::vector<int>{0, 0, 1, 1}), 0.5, 1e-12);

    check("NMI identical partitions", nmi(same_c, same_l), 1.0, 1e-12);
    check("NMI single cluster vs binary labels",
          nmi(std::vector<std::size_t>{0, 0, 0, 0}, std::vector<int>{0, 0, 1, 1}), 0.0, 1e-12);
    check("NMI independent partitions",
          nmi(std::vector<std::size_t>{0, 0, 1, 1}, std::vector<int>{0, 1, 0, 1}), 0.0, 1e-12);

    // a=0 and b=1 each in 2 of 4 documents, always together.
    const std::vector<Document> ref{{{0, 1}, 0}, {{0, 1, 2}, 1}, {{2, 3}, 2}, {{3}, 3}};
    check("NPMI perfect co-occurrence", npmi_coherence({topic({0, 1})}, ref, 0), 1.0, 1e-9);
    check("NPMI never co-occur", npmi_coherence({topic({0, 3})}, ref, 0), -1.0, 1e-9);
    return out;
}

}  // namespace tsctm
