#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "tsctm/corpus.hpp"
#include "tsctm/model.hpp"
#include "tsctm/numerics.hpp"

namespace tsctm {

enum class Reduction { sum, mean };
enum class VqNorm { squared, l2 };

struct TscConfig {
    double tau = 0.5;
    double lambda_tsc = 1.0;
    double lambda_original = 1.0;
    /// Standard InfoNCE form. When false the positive is left out of the
    /// denominator, which makes the objective unbounded below.
    bool include_positive_in_denominator = true;
    /// Mean keeps the contrastive scale independent of positives per anchor.
    Reduction reduce = Reduction::mean;
    /// When false, anchors only pull positives (score only, no denominator).
    bool use_negatives = true;
};

struct LossConfig {
    TscConfig tsc;
    double lambda_commit = 0.1;
    VqNorm vq_norm = VqNorm::squared;
};

/// Contrastive pairs for the original traces of a batch. Original traces are
/// [0, B); with augmentation, trace B + i is the augmented view of trace i.
struct PairSets {
    std::vector<std::vector<std::size_t>> positives;
    std::vector<std::vector<std::size_t>> negatives;
    std::vector<std::optional<std::size_t>> aug_positive;

    std::size_t anchors() const { return positives.size(); }
};

PairSets build_pairs(std::span<const std::size_t> q_original, bool with_augmentation);
PairSets build_pairs(std::span<const ForwardTrace> traces);

/// cos(a, b) / tau. Throws std::domain_error on a zero-norm argument.
double score(std::span<const double> a, std::span<const double> b, double tau);

struct ContrastiveResult {
    double value = 0.0;
    std::vector<Vector> grad_h;    // one per trace
    std::size_t contributing = 0;  // anchors averaged over
};

/// Contrastive objective over quantization-defined pairs (no augmentation).
ContrastiveResult tsc_loss(std::span<const Vector> h, const PairSets& pairs,
                           const TscConfig& cfg);
ContrastiveResult tsc_loss(std::span<const ForwardTrace> traces, const PairSets& pairs,
                           const TscConfig& cfg);

/// Contrastive objective with augmented views as extra positives and negatives.
ContrastiveResult tsc_da_loss(std::span<const Vector> h, const PairSets& pairs,
                              const TscConfig& cfg);
ContrastiveResult tsc_da_loss(std::span<const ForwardTrace> traces, const PairSets& pairs,
                              const TscConfig& cfg);

struct LossBreakdown {
    double recon = 0.0;
    double codebook = 0.0;
    double commit = 0.0;  // already weighted by lambda_commit
    double tsc = 0.0;     // unweighted
    double total = 0.0;

    LossBreakdown& operator+=(const LossBreakdown& o);
    LossBreakdown scaled(double s) const;
    friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

struct TmResult {
    LossBreakdown loss;        // recon, codebook, commit; tsc = 0
    Vector grad_theta;         // straight-through reconstruction + commitment
    Vector grad_codebook_row;  // gradient for codebook row trace.q
    Vector grad_logits;        // d recon / d recon_logits; beta gradient is its outer
                               // product with trace.theta_st
};

TmResult tm_loss(const ForwardTrace& trace, const BowRow& row, double lambda_commit,
                 VqNorm norm = VqNorm::squared);

struct TotalLossResult {
    LossBreakdown loss;
    ModelParams grad;
    std::vector<std::size_t> q;  // quantization index of each original row
};

/// Full objective and its gradient for every parameter tensor. `frozen`
/// pins quantization indices and stop-gradient values (see forward()).
TotalLossResult total_loss(const ModelParams& params, const BowBatch& batch,
                           const LossConfig& cfg, bool augmented,
                           std::span<const StopGradient> frozen = {}, std::size_t threads = 1);

}  // namespace tsctm
