#include "tsctm/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>
#include <utility>

#include "tsctm/parallel.hpp"

namespace tsctm {

ModelShape ModelParams::shape() const {
    return {beta.rows(), beta.cols(), hidden.empty() ? 0 : hidden.front().bias.size(),
            hidden.size(), batch_norm};
}

std::vector<std::span<double>> ModelParams::tensors() {
    std::vector<std::span<double>> out;
    for (auto& layer : hidden) {
        out.push_back(layer.weight.values());
        out.push_back(layer.bias);
    }
    out.push_back(output.weight.values());
    out.push_back(output.bias);
    out.push_back(codebook.values());
    out.push_back(beta.values());
    return out;
}

std::vector<std::span<const double>> ModelParams::tensors() const {
    auto spans = const_cast<ModelParams*>(this)->tensors();
    return {spans.begin(), spans.end()};
}

std::vector<std::size_t> ModelParams::tensor_sizes() const {
    std::vector<std::size_t> sizes;
    for (auto t : tensors()) sizes.push_back(t.size());
    return sizes;
}

bool ModelParams::all_finite() const {
    auto finite = [](std::span<const double> t) {
        return std::all_of(t.begin(), t.end(), [](double x) { return std::isfinite(x); });
    };
    for (auto t : tensors()) {
        if (!finite(t)) return false;
    }
    return finite(norm_mean) && finite(norm_var);
}

ModelParams ModelParams::zeros(const ModelShape& s) {
    ModelParams p;
    std::size_t in = s.vocab_size;
    for (std::size_t l = 0; l < s.encoder_layers; ++l) {
        p.hidden.push_back({Matrix(s.hidden, in), Vector(s.hidden, 0.0)});
        in = s.hidden;
    }
    p.output = {Matrix(s.num_topics, in), Vector(s.num_topics, 0.0)};
    p.codebook = Matrix(s.num_topics, s.num_topics);
    p.beta = Matrix(s.vocab_size, s.num_topics);
    p.batch_norm = s.batch_norm;
    if (s.batch_norm) {
        p.norm_mean.assign(s.num_topics, 0.0);
        p.norm_var.assign(s.num_topics, 1.0);
    }
    return p;
}

namespace {

void glorot_fill(std::span<double> values, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& x : values) x = rng.uniform(-bound, bound);
}

void init_layer(DenseLayer& layer, Rng& rng) {
    const std::size_t fan_in = layer.weight.cols();
    const std::size_t fan_out = layer.weight.rows();
    glorot_fill(layer.weight.values(), fan_in, fan_out, rng);
    glorot_fill(layer.bias, fan_in, fan_out, rng);
}

}  // namespace

ModelParams init_params(const ModelShape& shape, Rng& rng) {
    if (shape.vocab_size < 1 || shape.num_topics < 1 || shape.hidden < 1) {
        throw std::invalid_argument("init_params: V, K and hidden must all be >= 1");
    }
    if (shape.encoder_layers < 1 || shape.encoder_layers > 2) {
        throw std::invalid_argument("init_params: encoder_layers must be 1 or 2");
    }
    ModelParams p = ModelParams::zeros(shape);
    for (auto& layer : p.hidden) init_layer(layer, rng);
    init_layer(p.output, rng);
    glorot_fill(p.beta.values(), shape.num_topics, shape.vocab_size, rng);
    p.codebook = Matrix::identity(shape.num_topics);
    return p;
}

namespace {

// Hidden layers and the linear output; h and theta are left empty.
Encoding encode_linear(const ModelParams& params, const BowRow& row) {
    Encoding enc;
    const std::size_t V = params.vocab_size();
    for (std::size_t l = 0; l < params.hidden.size(); ++l) {
        const auto& layer = params.hidden[l];
        Vector pre = layer.bias;
        if (l == 0) {
            // Sparse input: accumulate only the columns present in the row.
            for (const auto& e : row) {
                if (e.word >= V) throw std::out_of_range("encode: word id out of range");
                const double c = e.count;
                for (std::size_t r = 0; r < pre.size(); ++r) pre[r] += layer.weight(r, e.word) * c;
            }
        } else {
            const Vector prod = matvec(layer.weight, enc.act.back());
            for (std::size_t r = 0; r < pre.size(); ++r) pre[r] += prod[r];
        }
        enc.act.push_back(softplus(pre));
        enc.pre.push_back(std::move(pre));
    }
    enc.z = matvec(params.output.weight, enc.act.back());
    for (std::size_t k = 0; k < enc.z.size(); ++k) enc.z[k] += params.output.bias[k];
    return enc;
}

void normalize(Encoding& enc, std::span<const double> mean, std::span<const double> inv_std) {
    enc.h = enc.z;
    for (std::size_t k = 0; k < mean.size(); ++k) enc.h[k] = (enc.z[k] - mean[k]) * inv_std[k];
    enc.theta = softmax(enc.h);
}

Vector inverse_std(std::span<const double> var) {
    Vector out(var.size());
    for (std::size_t k = 0; k < var.size(); ++k) out[k] = 1.0 / std::sqrt(var[k] + kNormEpsilon);
    return out;
}

// Mean and biased variance of z over encodings, summed in index order.
std::pair<Vector, Vector> moments(std::span<const Encoding> encs, std::size_t K) {
    Vector mean(K, 0.0), var(K, 0.0);
    const double inv_n = 1.0 / static_cast<double>(encs.size());
    for (const auto& e : encs) {
        for (std::size_t k = 0; k < K; ++k) mean[k] += e.z[k];
    }
    for (double& m : mean) m *= inv_n;
    for (const auto& e : encs) {
        for (std::size_t k = 0; k < K; ++k) var[k] += (e.z[k] - mean[k]) * (e.z[k] - mean[k]);
    }
    for (double& v : var) v *= inv_n;
    return {std::move(mean), std::move(var)};
}

}  // namespace

Encoding encode(const ModelParams& params, const BowRow& row) {
    Encoding enc = encode_linear(params, row);
    if (params.batch_norm) {
        normalize(enc, params.norm_mean, inverse_std(params.norm_var));
    } else {
        enc.h = enc.z;
        enc.theta = softmax(enc.h);
    }
    return enc;
}

void set_norm_stats(ModelParams& params, std::span<const BowRow> rows, std::size_t threads) {
    if (!params.batch_norm) return;
    if (rows.empty()) throw std::invalid_argument("set_norm_stats: no rows");
    std::vector<Encoding> encs(rows.size());
    parallel_for(rows.size(), threads,
                 [&](std::size_t i) { encs[i] = encode_linear(params, rows[i]); });
    std::tie(params.norm_mean, params.norm_var) = moments(encs, params.num_topics());
}

Quantized quantize(std::span<const double> theta, const Matrix& codebook) {
    Quantized out;
    double best = 0.0;
    for (std::size_t k = 0; k < codebook.rows(); ++k) {
        const double d = squared_distance(theta, codebook.row(k));
        if (k == 0 || d < best) {
            best = d;
            out.index = k;
        }
    }
    auto row = codebook.row(out.index);
    out.value.assign(row.begin(), row.end());
    return out;
}

BatchTraces forward(const ModelParams& params, const BowBatch& batch,
                    std::span<const StopGradient> frozen, std::size_t threads) {
    const std::size_t n_orig = batch.rows.size();
    const std::size_t n_aug = batch.aug_rows ? batch.aug_rows->size() : 0;
    const std::size_t n = n_orig + n_aug;
    if (!frozen.empty() && frozen.size() != n) {
        throw std::invalid_argument("forward: frozen state does not match batch");
    }
    auto row_of = [&](std::size_t i) -> const BowRow& {
        return i < n_orig ? batch.rows[i] : (*batch.aug_rows)[i - n_orig];
    };
    std::vector<Encoding> encs(n);
    parallel_for(n, threads, [&](std::size_t i) { encs[i] = encode_linear(params, row_of(i)); });

    BatchTraces out;
    Vector mean;
    if (params.batch_norm && n > 0) {
        Vector var;
        std::tie(mean, var) = moments(encs, params.num_topics());
        out.inv_std = inverse_std(var);
    }
    out.traces.resize(n);
    parallel_for(n, threads, [&](std::size_t i) {
        ForwardTrace& t = out.traces[i];
        t.is_augmented = i >= n_orig;
        t.row = t.is_augmented ? i - n_orig : i;
        t.enc = std::move(encs[i]);
        if (params.batch_norm) {
            normalize(t.enc, mean, out.inv_std);
        } else {
            t.enc.h = t.enc.z;
            t.enc.theta = softmax(t.enc.h);
        }
        if (frozen.empty()) {
            Quantized qz = quantize(t.enc.theta, params.codebook);
            t.q = qz.index;
            t.theta_q = std::move(qz.value);
            t.sg = {t.q, t.enc.theta, t.theta_q};
        } else {
            t.sg = frozen[i];
            t.q = t.sg.q;
            auto row_q = params.codebook.row(t.q);
            t.theta_q.assign(row_q.begin(), row_q.end());
        }
        const std::size_t K = t.enc.theta.size();
        t.theta_st.resize(K);
        for (std::size_t k = 0; k < K; ++k) {
            t.theta_st[k] = t.enc.theta[k] + (t.sg.theta_q[k] - t.sg.theta[k]);
        }
        t.recon_logits = matvec(params.beta, t.theta_st);
    });
    return out;
}

std::vector<StopGradient> snapshot(std::span<const ForwardTrace> traces) {
    std::vector<StopGradient> out;
    out.reserve(traces.size());
    for (const auto& t : traces) out.push_back(t.sg);
    return out;
}

std::vector<StopGradient> snapshot(const BatchTraces& pass) { return snapshot(pass.traces); }

}  // namespace tsctm
