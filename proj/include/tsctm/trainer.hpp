#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tsctm/corpus.hpp"
#include "tsctm/model.hpp"
#include "tsctm/objectives.hpp"

namespace tsctm {

struct TrainConfig {
    std::size_t num_topics = 50;
    std::size_t hidden = 200;
    std::size_t encoder_layers = 2;
    bool batch_norm = true;
    std::size_t epochs = 200;
    double lr = 0.002;
    std::size_t batch_size = 200;
    LossConfig loss;  // lambda_commit defaults to 0.1
    std::uint64_t seed = 42;
    bool augmented = false;
    /// Write a checkpoint every N epochs (0 disables periodic checkpoints).
    std::size_t checkpoint_every = 0;
    /// Final checkpoint path; periodic ones get an ".epoch<N>" suffix.
    std::optional<std::filesystem::path> checkpoint_path;
    std::size_t threads = 1;

    void validate() const;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    LossBreakdown loss;     // mean over steps
    std::vector<std::size_t> usage;  // anchors per quantization index
    double seconds = 0.0;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
};

/// One line of JSON per epoch.
std::string to_json_line(const EpochRecord& rec);

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Minibatch Adam over the full objective. Deterministic given (corpus, cfg).
/// Throws std::runtime_error naming the term if a loss becomes non-finite.
std::pair<ModelParams, TrainLog> train(const Corpus& corpus, const TrainConfig& cfg,
                                       const EpochCallback& on_epoch = {});

/// Soft topic distributions (no quantization), one row per document.
Matrix infer_theta(const ModelParams& params, const Corpus& corpus, std::size_t threads = 1);
Matrix infer_theta(const ModelParams& params, const Vocabulary& vocab,
                   const std::vector<Document>& docs, std::size_t threads = 1);

}  // namespace tsctm
