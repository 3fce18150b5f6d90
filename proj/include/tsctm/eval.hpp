#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tsctm/corpus.hpp"
#include "tsctm/model.hpp"
#include "tsctm/numerics.hpp"

namespace tsctm {

struct Topic {
    std::vector<WordId> words;  // descending weight, ties to the lower id
    std::vector<double> weights;
};

using TopicSet = std::vector<Topic>;

/// Top-T words of every column of beta (V x K). Throws if T > V.
TopicSet top_words(const Matrix& beta, std::size_t T);

/// Mean over topics of the mean inverse cross-topic count of its words.
double topic_uniqueness(const TopicSet& topics);

/// Mean pairwise NPMI of each topic's words, averaged over topics, with
/// boolean sliding-window counts over `reference`. window = 0 uses whole
/// documents. Throws std::runtime_error("no scorable topics") if no topic
/// has two or more words.
double npmi_coherence(const TopicSet& topics, std::span<const Document> reference,
                      std::size_t window = 0);

/// Argmax per row, ties to the lowest index.
std::vector<std::size_t> cluster_assignments(const Matrix& theta);

double purity(std::span<const std::size_t> assignments, std::span<const int> labels);
/// Mutual information over the arithmetic mean of the two entropies.
double nmi(std::span<const std::size_t> assignments, std::span<const int> labels);

/// Mean cosine similarity between matching rows.
double pair_cosine(const Matrix& theta_orig, const Matrix& theta_aug);

struct EvalReport {
    std::size_t num_topics = 0;
    std::size_t top_words = 0;
    double tu = 0.0;
    double npmi = 0.0;
    std::optional<double> purity;
    std::optional<double> nmi;
    std::optional<double> pair_cos;

    friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Topic metrics on beta, clustering metrics when the corpus has labels and
/// pair cosine when it has augmentations. `ref` supplies NPMI counts and must
/// share the corpus vocabulary.
EvalReport evaluate_model(const ModelParams& params, const Corpus& corpus, const Corpus& ref,
                          std::size_t top_n = 15, std::size_t window = 0,
                          std::size_t threads = 1);

std::string report_json(const EvalReport& report);
std::string report_key_values(const EvalReport& report);

/// "topic_id<TAB>w1 w2 ... wT" per line.
std::string format_topics(const TopicSet& topics, const Vocabulary& vocab);
/// "N K" header, then one row of K floats per document.
std::string format_theta(const Matrix& theta);

}  // namespace tsctm
