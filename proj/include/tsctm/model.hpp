#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tsctm/corpus.hpp"
#include "tsctm/numerics.hpp"

namespace tsctm {

struct DenseLayer {
    Matrix weight;  // out x in
    Vector bias;    // out

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct ModelShape {
    std::size_t vocab_size = 0;
    std::size_t num_topics = 0;
    std::size_t hidden = 200;
    std::size_t encoder_layers = 2;  // softplus hidden layers before the linear output
    bool batch_norm = true;          // normalize the linear output per topic
};

/// Added to the variance before normalizing.
inline constexpr double kNormEpsilon = 1e-5;

/// Encoder f (softplus MLP, linear output of size K, optional batch
/// normalization without affine terms), codebook E (K x K) and topic-word
/// matrix beta (V x K). Also used as the gradient container.
///
/// During training the normalization uses batch statistics. Single documents
/// are encoded with norm_mean / norm_var, which the trainer sets to the
/// statistics of the training corpus. They are not trained.
struct ModelParams {
    std::vector<DenseLayer> hidden;
    DenseLayer output;
    Matrix codebook;
    Matrix beta;
    bool batch_norm = false;
    Vector norm_mean;  // K when batch_norm, else empty
    Vector norm_var;

    ModelShape shape() const;
    std::size_t vocab_size() const { return beta.rows(); }
    std::size_t num_topics() const { return beta.cols(); }

    /// Every parameter tensor in checkpoint order.
    std::vector<std::span<double>> tensors();
    std::vector<std::span<const double>> tensors() const;
    std::vector<std::size_t> tensor_sizes() const;

    bool all_finite() const;
    static ModelParams zeros(const ModelShape& shape);

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Glorot-uniform weights and biases, identity codebook, unit normalization
/// statistics.
ModelParams init_params(const ModelShape& shape, Rng& rng);

struct Encoding {
    std::vector<Vector> pre;  // per hidden layer, before softplus
    std::vector<Vector> act;  // per hidden layer, after softplus
    Vector z;                 // K, linear output before normalization
    Vector h;                 // K, output of the encoder
    Vector theta;             // softmax(h)
};

/// Encodes one document, normalizing with the stored statistics.
Encoding encode(const ModelParams& params, const BowRow& row);

/// Mean and biased variance of the linear output over `rows`, stored as the
/// normalization statistics. No-op without batch normalization.
void set_norm_stats(ModelParams& params, std::span<const BowRow> rows, std::size_t threads = 1);

struct Quantized {
    std::size_t index = 0;
    Vector value;
};

/// Nearest codebook row in Euclidean distance; ties go to the lowest index.
Quantized quantize(std::span<const double> theta, const Matrix& codebook);

/// Values held constant by stop-gradient for one trace: the quantization index,
/// theta and theta_q. Taken from the same forward pass during training; held
/// at a base point when checking gradients by finite differences.
struct StopGradient {
    std::size_t q = 0;
    Vector theta;
    Vector theta_q;
};

struct ForwardTrace {
    Encoding enc;
    std::size_t q = 0;
    Vector theta_q;       // row q of the live codebook
    Vector theta_st;      // theta + sg(theta_q - theta)
    Vector recon_logits;  // beta * theta_st
    StopGradient sg;
    bool is_augmented = false;
    std::size_t row = 0;  // index into batch.rows or batch.aug_rows
};

/// Per-topic 1/sqrt(var + eps) of the batch statistics; empty without batch
/// normalization.
struct BatchTraces {
    std::vector<ForwardTrace> traces;
    Vector inv_std;
};

/// Traces for batch.rows, then batch.aug_rows if present, normalized together
/// with batch statistics. When `frozen` is non-empty it must have one entry
/// per trace and replaces the live quantization and stop-gradient values.
BatchTraces forward(const ModelParams& params, const BowBatch& batch,
                    std::span<const StopGradient> frozen = {}, std::size_t threads = 1);

std::vector<StopGradient> snapshot(std::span<const ForwardTrace> traces);
std::vector<StopGradient> snapshot(const BatchTraces& pass);

/// Binary checkpoint: magic, little-endian u64 header, little-endian doubles
/// (trained tensors, then normalization statistics), FNV-1a checksum. Writes
/// are atomic (temp file + rename).
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);
std::vector<unsigned char> serialize_checkpoint(const ModelParams& params);
ModelParams deserialize_checkpoint(std::span<const unsigned char> bytes);

std::uint64_t fnv1a64(std::span<const unsigned char> bytes);

}  // namespace tsctm
