#include "tsctm/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <stdexcept>
#include <unordered_set>

#include "json.hpp"

namespace tsctm {

Vocabulary::Vocabulary(std::vector<std::string> words, std::vector<std::size_t> doc_freq)
    : words_(std::move(words)), doc_freq_(std::move(doc_freq)) {
    if (words_.size() != doc_freq_.size()) {
        throw std::invalid_argument("vocabulary: words and doc_freq differ in length");
    }
    index_.reserve(words_.size());
    for (std::size_t i = 0; i < words_.size(); ++i) {
        if (!index_.emplace(words_[i], static_cast<WordId>(i)).second) {
            throw std::invalid_argument("vocabulary: duplicate word '" + words_[i] + "'");
        }
    }
}

std::optional<WordId> Vocabulary::find(std::string_view word) const {
    auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

namespace {

// Decodes one UTF-8 code point starting at s[i]. Returns the byte length, or
// 0 if the sequence is malformed (overlong, surrogate, truncated, > U+10FFFF).
std::size_t decode_utf8(std::string_view s, std::size_t i, char32_t& cp) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    std::size_t len;
    char32_t min;
    if (b0 < 0x80) {
        cp = b0;
        return 1;
    } else if ((b0 & 0xE0) == 0xC0) {
        len = 2, cp = b0 & 0x1F, min = 0x80;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3, cp = b0 & 0x0F, min = 0x800;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4, cp = b0 & 0x07, min = 0x10000;
    } else {
        return 0;
    }
    if (i + len > s.size()) return 0;
    for (std::size_t k = 1; k < len; ++k) {
        const auto b = static_cast<unsigned char>(s[i + k]);
        if ((b & 0xC0) != 0x80) return 0;
        cp = (cp << 6) | (b & 0x3F);
    }
    if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return 0;
    return len;
}

bool is_token_codepoint(char32_t cp) {
    if (cp < 0x80) {
        return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
    }
    // C1 controls and Latin-1 punctuation/symbols.
    if (cp <= 0xBF || cp == 0xD7 || cp == 0xF7) return false;
    // General punctuation, symbols, arrows, box drawing, dingbats.
    if (cp >= 0x2000 && cp <= 0x2BFF) return false;
    // CJK punctuation, specials, BOM.
    if (cp >= 0x3000 && cp <= 0x303F) return false;
    if (cp == 0xFEFF || (cp >= 0xFFF0 && cp <= 0xFFFF)) return false;
    // Tags and private-use planes.
    return cp < 0xE0000;
}

using TokenLists = std::vector<std::vector<std::string>>;

}  // namespace

std::vector<std::string> tokenize(std::string_view line) {
    std::vector<std::string> tokens;
    std::string current;
    std::size_t i = 0;
    while (i < line.size()) {
        char32_t cp = 0;
        std::size_t len = decode_utf8(line, i, cp);
        const bool keep = len != 0 && is_token_codepoint(cp);
        if (len == 0) len = 1;
        if (keep) {
            if (cp < 0x80) {
                char c = static_cast<char>(cp);
                if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
                current.push_back(c);
            } else {
                current.append(line.substr(i, len));
            }
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
        i += len;
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

Corpus preprocess(std::span<const std::string> raw_lines, const PreprocessOptions& opts) {
    if (raw_lines.empty()) throw std::invalid_argument("preprocess: no input lines");
    if (opts.min_freq < 1) throw std::invalid_argument("preprocess: min_freq must be >= 1");
    if (opts.min_len < 2) throw std::invalid_argument("preprocess: min_len must be >= 2");

    std::vector<std::size_t> line_nos;
    TokenLists docs;
    for (std::size_t i = 0; i < raw_lines.size(); ++i) {
        auto tokens = tokenize(raw_lines[i]);
        if (tokens.size() >= opts.min_len) {
            docs.push_back(std::move(tokens));
            line_nos.push_back(i);
        }
    }

    // Dropping rare words can shorten documents, and dropping those documents
    // can push other words under the threshold; iterate to a fixed point.
    for (;;) {
        std::unordered_map<std::string, std::size_t> df;
        for (const auto& doc : docs) {
            std::unordered_set<std::string_view> seen(doc.begin(), doc.end());
            for (auto w : seen) ++df[std::string(w)];
        }
        bool changed = false;
        TokenLists kept;
        std::vector<std::size_t> kept_lines;
        for (std::size_t d = 0; d < docs.size(); ++d) {
            std::vector<std::string> filtered;
            for (auto& w : docs[d]) {
                if (df[w] >= opts.min_freq) {
                    filtered.push_back(std::move(w));
                } else {
                    changed = true;
                }
            }
            if (filtered.size() >= opts.min_len) {
                kept.push_back(std::move(filtered));
                kept_lines.push_back(line_nos[d]);
            } else {
                changed = true;
            }
        }
        docs = std::move(kept);
        line_nos = std::move(kept_lines);
        if (!changed) break;
    }

    if (docs.empty()) throw std::runtime_error("corpus empty after filtering");

    std::vector<std::string> words;
    std::unordered_map<std::string, WordId> ids;
    std::vector<std::size_t> df;
    Corpus corpus;
    corpus.raw_line_count = raw_lines.size();
    corpus.docs.reserve(docs.size());
    for (std::size_t d = 0; d < docs.size(); ++d) {
        Document doc;
        doc.raw_line_no = line_nos[d];
        std::unordered_set<WordId> seen;
        for (const auto& w : docs[d]) {
            auto [it, inserted] = ids.emplace(w, static_cast<WordId>(words.size()));
            if (inserted) {
                words.push_back(w);
                df.push_back(0);
            }
            if (seen.insert(it->second).second) ++df[it->second];
            doc.tokens.push_back(it->second);
        }
        corpus.docs.push_back(std::move(doc));
    }
    corpus.vocab = Vocabulary(std::move(words), std::move(df));
    return corpus;
}

Corpus attach_augmentation(Corpus corpus, std::span<const std::string> aug_lines) {
    const bool per_raw_line = aug_lines.size() == corpus.raw_line_count;
    if (!per_raw_line && aug_lines.size() != corpus.docs.size()) {
        throw std::invalid_argument(
            "augmentation line count mismatch: got " + std::to_string(aug_lines.size()) +
            " augmented lines, expected " + std::to_string(corpus.raw_line_count) +
            " (one per original line)");
    }
    std::vector<Document> aug;
    aug.reserve(corpus.docs.size());
    for (std::size_t d = 0; d < corpus.docs.size(); ++d) {
        const auto& orig = corpus.docs[d];
        const auto& line = aug_lines[per_raw_line ? orig.raw_line_no : d];
        Document a;
        a.raw_line_no = orig.raw_line_no;
        for (const auto& w : tokenize(line)) {
            if (auto id = corpus.vocab.find(w)) a.tokens.push_back(*id);
        }
        if (a.tokens.empty()) a.tokens = orig.tokens;
        aug.push_back(std::move(a));
    }
    corpus.aug_docs = std::move(aug);
    return corpus;
}

Corpus attach_labels(Corpus corpus, std::span<const int> labels) {
    std::vector<int> out;
    out.reserve(corpus.docs.size());
    if (labels.size() == corpus.raw_line_count) {
        for (const auto& doc : corpus.docs) out.push_back(labels[doc.raw_line_no]);
    } else if (labels.size() == corpus.docs.size()) {
        out.assign(labels.begin(), labels.end());
    } else {
        throw std::invalid_argument("label count mismatch: got " + std::to_string(labels.size()) +
                                    ", expected " + std::to_string(corpus.raw_line_count) +
                                    " (per raw line) or " + std::to_string(corpus.docs.size()) +
                                    " (per document)");
    }
    corpus.labels = std::move(out);
    return corpus;
}

BowRow to_bow_row(const Document& doc) {
    std::map<WordId, std::uint32_t> counts;
    for (WordId w : doc.tokens) ++counts[w];
    BowRow row;
    row.reserve(counts.size());
    for (auto [w, c] : counts) row.push_back({w, c});
    return row;
}

BowBatch to_bow(const Corpus& corpus, std::span<const std::size_t> indices) {
    BowBatch batch;
    batch.rows.reserve(indices.size());
    if (corpus.aug_docs) batch.aug_rows.emplace().reserve(indices.size());
    for (std::size_t i : indices) {
        if (i >= corpus.docs.size()) {
            throw std::out_of_range("to_bow: document index " + std::to_string(i) +
                                    " out of range (" + std::to_string(corpus.docs.size()) +
                                    " documents)");
        }
        batch.rows.push_back(to_bow_row(corpus.docs[i]));
        if (corpus.aug_docs) batch.aug_rows->push_back(to_bow_row((*corpus.aug_docs)[i]));
    }
    return batch;
}

std::uint64_t bow_total(const BowRow& row) {
    std::uint64_t n = 0;
    for (const auto& e : row) n += e.count;
    return n;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(std::move(line));
    }
    return lines;
}

std::vector<int> read_labels(const std::filesystem::path& path) {
    std::vector<int> labels;
    std::size_t line_no = 0;
    for (const auto& line : read_lines(path)) {
        ++line_no;
        try {
            std::size_t pos = 0;
            labels.push_back(std::stoi(line, &pos));
            if (line.find_first_not_of(" \t", pos) != std::string::npos) throw std::exception();
        } catch (const std::exception&) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": expected an integer label");
        }
    }
    return labels;
}

namespace {

constexpr const char* kCorpusFormat = "tsctm-corpus";
constexpr int kCorpusVersion = 1;

nlohmann::json docs_to_json(const std::vector<Document>& docs) {
    auto arr = nlohmann::json::array();
    for (const auto& d : docs) arr.push_back({{"line", d.raw_line_no}, {"tokens", d.tokens}});
    return arr;
}

std::vector<Document> docs_from_json(const nlohmann::json& arr, std::size_t vocab_size) {
    std::vector<Document> docs;
    for (const auto& j : arr) {
        Document d;
        d.raw_line_no = j.at("line").get<std::size_t>();
        d.tokens = j.at("tokens").get<std::vector<WordId>>();
        for (WordId w : d.tokens) {
            if (w >= vocab_size) throw std::runtime_error("corpus file: word id out of range");
        }
        docs.push_back(std::move(d));
    }
    return docs;
}

}  // namespace

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    nlohmann::json j;
    j["format"] = kCorpusFormat;
    j["version"] = kCorpusVersion;
    j["raw_line_count"] = corpus.raw_line_count;
    j["vocab"] = corpus.vocab.words();
    j["doc_freq"] = corpus.vocab.doc_freqs();
    j["docs"] = docs_to_json(corpus.docs);
    if (corpus.aug_docs) j["aug_docs"] = docs_to_json(*corpus.aug_docs);
    if (corpus.labels) j["labels"] = *corpus.labels;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump() << '\n';
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

Corpus load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
        if (j.at("format") != kCorpusFormat) throw std::runtime_error("not a corpus file");
        if (j.at("version").get<int>() != kCorpusVersion) {
            throw std::runtime_error("unsupported corpus version");
        }
        Corpus c;
        c.raw_line_count = j.at("raw_line_count").get<std::size_t>();
        c.vocab = Vocabulary(j.at("vocab").get<std::vector<std::string>>(),
                             j.at("doc_freq").get<std::vector<std::size_t>>());
        c.docs = docs_from_json(j.at("docs"), c.vocab.size());
        if (j.contains("aug_docs")) {
            c.aug_docs = docs_from_json(j["aug_docs"], c.vocab.size());
            if (c.aug_docs->size() != c.docs.size()) {
                throw std::runtime_error("aug_docs not aligned with docs");
            }
        }
        if (j.contains("labels")) {
            c.labels = j["labels"].get<std::vector<int>>();
            if (c.labels->size() != c.docs.size()) {
                throw std::runtime_error("labels not aligned with docs");
            }
        }
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(path.string() + ": malformed corpus file: " + e.what());
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

}  // namespace tsctm
