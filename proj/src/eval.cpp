#include "tsctm/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"
#include "tsctm/trainer.hpp"

namespace tsctm {

namespace {

std::string format_double(double x) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, end);
}

}  // namespace

TopicSet top_words(const Matrix& beta, std::size_t T) {
    const std::size_t V = beta.rows();
    if (T > V) {
        throw std::invalid_argument("top_words: T=" + std::to_string(T) +
                                    " exceeds vocabulary size " + std::to_string(V));
    }
    TopicSet topics(beta.cols());
    std::vector<WordId> ids(V);
    for (std::size_t k = 0; k < beta.cols(); ++k) {
        std::iota(ids.begin(), ids.end(), WordId{0});
        std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(T), ids.end(),
                          [&](WordId a, WordId b) {
                              if (beta(a, k) != beta(b, k)) return beta(a, k) > beta(b, k);
                              return a < b;
                          });
        topics[k].words.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(T));
        for (WordId w : topics[k].words) topics[k].weights.push_back(beta(w, k));
    }
    return topics;
}

double topic_uniqueness(const TopicSet& topics) {
    if (topics.empty()) throw std::invalid_argument("topic_uniqueness: no topics");
    std::unordered_map<WordId, std::size_t> cnt;
    for (const auto& t : topics) {
        for (WordId w : std::set<WordId>(t.words.begin(), t.words.end())) ++cnt[w];
    }
    double total = 0.0;
    for (const auto& t : topics) {
        if (t.words.empty()) throw std::invalid_argument("topic_uniqueness: empty topic");
        double s = 0.0;
        for (WordId w : t.words) s += 1.0 / static_cast<double>(cnt[w]);
        total += s / static_cast<double>(t.words.size());
    }
    return total / static_cast<double>(topics.size());
}

double npmi_coherence(const TopicSet& topics, std::span<const Document> reference,
                      std::size_t window) {
    if (reference.empty()) throw std::invalid_argument("npmi_coherence: empty reference corpus");
    constexpr double kEps = 1e-12;

    std::set<WordId> relevant;
    for (const auto& t : topics) relevant.insert(t.words.begin(), t.words.end());

    std::map<WordId, std::size_t> single;
    std::map<std::pair<WordId, WordId>, std::size_t> joint;
    std::size_t n_windows = 0;
    auto count_window = [&](std::span<const WordId> tokens) {
        ++n_windows;
        std::set<WordId> present;
        for (WordId w : tokens) {
            if (relevant.count(w)) present.insert(w);
        }
        for (auto a = present.begin(); a != present.end(); ++a) {
            ++single[*a];
            for (auto b = std::next(a); b != present.end(); ++b) ++joint[{*a, *b}];
        }
    };
    for (const auto& doc : reference) {
        const std::span<const WordId> tokens(doc.tokens);
        if (window == 0 || tokens.size() <= window) {
            count_window(tokens);
        } else {
            for (std::size_t i = 0; i + window <= tokens.size(); ++i) {
                count_window(tokens.subspan(i, window));
            }
        }
    }

    const double W = static_cast<double>(n_windows);
    auto npmi = [&](WordId a, WordId b) {
        if (a == b) return 1.0;
        if (a > b) std::swap(a, b);
        auto it = joint.find({a, b});
        if (it == joint.end()) return -1.0;
        const double p_ab = static_cast<double>(it->second) / W;
        if (it->second == n_windows) return 1.0;
        const double p_a = static_cast<double>(single[a]) / W;
        const double p_b = static_cast<double>(single[b]) / W;
        return std::log((p_ab + kEps) / (p_a * p_b)) / -std::log(p_ab + kEps);
    };

    double total = 0.0;
    std::size_t scored = 0;
    for (const auto& t : topics) {
        if (t.words.size() < 2) continue;
        double s = 0.0;
        std::size_t pairs = 0;
        for (std::size_t i = 0; i < t.words.size(); ++i) {
            for (std::size_t j = i + 1; j < t.words.size(); ++j) {
                s += npmi(t.words[i], t.words[j]);
                ++pairs;
            }
        }
        total += s / static_cast<double>(pairs);
        ++scored;
    }
    if (scored == 0) throw std::runtime_error("no scorable topics");
    return total / static_cast<double>(scored);
}

std::vector<std::size_t> cluster_assignments(const Matrix& theta) {
    std::vector<std::size_t> out(theta.rows());
    for (std::size_t i = 0; i < theta.rows(); ++i) {
        auto row = theta.row(i);
        out[i] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    }
    return out;
}

namespace {

void check_lengths(std::span<const std::size_t> a, std::span<const int> l, const char* what) {
    if (a.size() != l.size()) {
        throw std::invalid_argument(std::string(what) + ": " + std::to_string(a.size()) +
                                    " assignments vs " + std::to_string(l.size()) + " labels");
    }
    if (a.empty()) throw std::invalid_argument(std::string(what) + ": empty input");
}

double entropy(const std::map<long long, std::size_t>& counts, double n) {
    double h = 0.0;
    for (const auto& [_, c] : counts) {
        const double p = static_cast<double>(c) / n;
        h -= p * std::log(p);
    }
    return h;
}

}  // namespace

double purity(std::span<const std::size_t> assignments, std::span<const int> labels) {
    check_lengths(assignments, labels, "purity");
    std::map<std::size_t, std::map<int, std::size_t>> table;
    for (std::size_t i = 0; i < assignments.size(); ++i) ++table[assignments[i]][labels[i]];
    std::size_t hits = 0;
    for (const auto& [_, row] : table) {
        std::size_t best = 0;
        for (const auto& [__, c] : row) best = std::max(best, c);
        hits += best;
    }
    return static_cast<double>(hits) / static_cast<double>(assignments.size());
}

double nmi(std::span<const std::size_t> assignments, std::span<const int> labels) {
    check_lengths(assignments, labels, "nmi");
    const double n = static_cast<double>(assignments.size());
    std::map<long long, std::size_t> cc, lc;
    std::map<std::pair<long long, long long>, std::size_t> joint;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        const auto c = static_cast<long long>(assignments[i]);
        const auto l = static_cast<long long>(labels[i]);
        ++cc[c];
        ++lc[l];
        ++joint[{c, l}];
    }
    const double hc = entropy(cc, n);
    const double hl = entropy(lc, n);
    if (cc.size() == 1 && lc.size() == 1) return 1.0;
    double mi = 0.0;
    for (const auto& [key, c] : joint) {
        const double p = static_cast<double>(c) / n;
        const double pc = static_cast<double>(cc[key.first]) / n;
        const double pl = static_cast<double>(lc[key.second]) / n;
        mi += p * std::log(p / (pc * pl));
    }
    if (mi <= 0.0) return 0.0;
    return std::clamp(mi / ((hc + hl) / 2.0), 0.0, 1.0);
}

double pair_cosine(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument("pair_cosine: shape mismatch");
    }
    if (a.rows() == 0) throw std::invalid_argument("pair_cosine: no rows");
    double total = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const double na = norm2(a.row(i));
        const double nb = norm2(b.row(i));
        if (na == 0.0 || nb == 0.0) {
            throw std::invalid_argument("pair_cosine: zero row " + std::to_string(i));
        }
        total += dot(a.row(i), b.row(i)) / (na * nb);
    }
    return total / static_cast<double>(a.rows());
}

EvalReport evaluate_model(const ModelParams& params, const Corpus& corpus, const Corpus& ref,
                          std::size_t top_n, std::size_t window, std::size_t threads) {
    if (ref.vocab != corpus.vocab) {
        throw std::invalid_argument("reference corpus vocabulary differs from the model corpus");
    }
    EvalReport r;
    const TopicSet topics = top_words(params.beta, top_n);
    r.num_topics = topics.size();
    r.top_words = top_n;
    r.tu = topic_uniqueness(topics);
    r.npmi = npmi_coherence(topics, ref.docs, window);
    const Matrix theta = infer_theta(params, corpus, threads);
    if (corpus.labels) {
        const auto clusters = cluster_assignments(theta);
        r.purity = purity(clusters, *corpus.labels);
        r.nmi = nmi(clusters, *corpus.labels);
    }
    if (corpus.aug_docs) {
        r.pair_cos =
            pair_cosine(theta, infer_theta(params, corpus.vocab, *corpus.aug_docs, threads));
    }
    return r;
}

std::string report_json(const EvalReport& r) {
    nlohmann::ordered_json j;
    j["num_topics"] = r.num_topics;
    j["top_words"] = r.top_words;
    j["tu"] = r.tu;
    j["npmi"] = r.npmi;
    j["purity"] = r.purity ? nlohmann::ordered_json(*r.purity) : nullptr;
    j["nmi"] = r.nmi ? nlohmann::ordered_json(*r.nmi) : nullptr;
    j["pair_cos"] = r.pair_cos ? nlohmann::ordered_json(*r.pair_cos) : nullptr;
    return j.dump(2) + "\n";
}

std::string report_key_values(const EvalReport& r) {
    std::ostringstream out;
    out << "num_topics=" << r.num_topics << '\n' << "top_words=" << r.top_words << '\n';
    out << "tu=" << format_double(r.tu) << '\n' << "npmi=" << format_double(r.npmi) << '\n';
    if (r.purity) out << "purity=" << format_double(*r.purity) << '\n';
    if (r.nmi) out << "nmi=" << format_double(*r.nmi) << '\n';
    if (r.pair_cos) out << "pair_cos=" << format_double(*r.pair_cos) << '\n';
    return out.str();
}

std::string format_topics(const TopicSet& topics, const Vocabulary& vocab) {
    std::ostringstream out;
    for (std::size_t k = 0; k < topics.size(); ++k) {
        out << k << '\t';
        for (std::size_t i = 0; i < topics[k].words.size(); ++i) {
            if (i) out << ' ';
            out << vocab.word(topics[k].words[i]);
        }
        out << '\n';
    }
    return out.str();
}

std::string format_theta(const Matrix& theta) {
    std::string out = std::to_string(theta.rows()) + " " + std::to_string(theta.cols()) + "\n";
    for (std::size_t i = 0; i < theta.rows(); ++i) {
        auto row = theta.row(i);
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (k) out += ' ';
            out += format_double(row[k]);
        }
        out += '\n';
    }
    return out;
}

}  // namespace tsctm
