#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tsctm {

using WordId = std::uint32_t;

/// Bidirectional word <-> id map. Ids are dense and follow first occurrence.
class Vocabulary {
public:
    Vocabulary() = default;
    Vocabulary(std::vector<std::string> words, std::vector<std::size_t> doc_freq);

    std::size_t size() const { return words_.size(); }
    const std::string& word(WordId id) const { return words_.at(id); }
    std::optional<WordId> find(std::string_view word) const;
    std::size_t doc_freq(WordId id) const { return doc_freq_.at(id); }

    const std::vector<std::string>& words() const { return words_; }
    const std::vector<std::size_t>& doc_freqs() const { return doc_freq_; }

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
        return a.words_ == b.words_ && a.doc_freq_ == b.doc_freq_;
    }

private:
    std::vector<std::string> words_;
    std::vector<std::size_t> doc_freq_;
    std::unordered_map<std::string, WordId> index_;
};

struct Document {
    std::vector<WordId> tokens;
    std::size_t raw_line_no = 0;

    friend bool operator==(const Document&, const Document&) = default;
};

struct Corpus {
    Vocabulary vocab;
    std::vector<Document> docs;
    std::optional<std::vector<int>> labels;
    std::optional<std::vector<Document>> aug_docs;
    /// Number of raw input lines preprocess() saw, needed to pair augmentation files.
    std::size_t raw_line_count = 0;

    std::size_t size() const { return docs.size(); }
    bool has_augmentation() const { return aug_docs.has_value(); }

    friend bool operator==(const Corpus&, const Corpus&) = default;
};

struct BowEntry {
    WordId word;
    std::uint32_t count;

    friend bool operator==(const BowEntry&, const BowEntry&) = default;
};

/// Sparse count vector sorted by word id.
using BowRow = std::vector<BowEntry>;

struct BowBatch {
    std::vector<BowRow> rows;
    std::optional<std::vector<BowRow>> aug_rows;

    std::size_t size() const { return rows.size(); }
};

struct PreprocessOptions {
    std::size_t min_freq = 5;
    std::size_t min_len = 2;
};

/// Splits a line into lowercase tokens. Token characters are ASCII
/// alphanumerics and well-formed non-ASCII letters; everything else,
/// including control characters and malformed UTF-8, separates tokens.
std::vector<std::string> tokenize(std::string_view line);

/// Builds a corpus from raw text lines. Throws std::invalid_argument on bad
/// options and std::runtime_error("corpus empty after filtering").
Corpus preprocess(std::span<const std::string> raw_lines, const PreprocessOptions& opts = {});

/// Pairs each surviving document with its augmented line. aug_lines holds one
/// line per raw input line (or, equivalently, one per surviving document).
Corpus attach_augmentation(Corpus corpus, std::span<const std::string> aug_lines);

/// Attaches labels given either per raw line or per surviving document.
Corpus attach_labels(Corpus corpus, std::span<const int> labels);

BowRow to_bow_row(const Document& doc);
BowBatch to_bow(const Corpus& corpus, std::span<const std::size_t> indices);

std::uint64_t bow_total(const BowRow& row);

std::vector<std::string> read_lines(const std::filesystem::path& path);
std::vector<int> read_labels(const std::filesystem::path& path);

/// Processed corpus file (versioned JSON).
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);

}  // namespace tsctm
