#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "json.hpp"
#include "tsctm/eval.hpp"

namespace tsctm {
namespace {

Topic topic(std::vector<WordId> words) {
    Topic t;
    t.words = std::move(words);
    t.weights.assign(t.words.size(), 1.0);
    return t;
}

Document doc(std::vector<WordId> tokens) {
    Document d;
    d.tokens = std::move(tokens);
    return d;
}

TEST(TopWords, OrderAndTies) {
    Matrix beta(3, 1);
    beta(0, 0) = 0.1;
    beta(1, 0) = 0.9;
    beta(2, 0) = 0.5;
    const TopicSet t = top_words(beta, 2);
    EXPECT_EQ(t[0].words, (std::vector<WordId>{1, 2}));
    EXPECT_EQ(t[0].weights, (std::vector<double>{0.9, 0.5}));

    Matrix tie(3, 1, 0.5);
    tie(0, 0) = 0.1;
    EXPECT_EQ(top_words(tie, 2)[0].words, (std::vector<WordId>{1, 2}));
}

TEST(TopWords, FullPermutationAndBounds) {
    Rng rng(1);
    Matrix beta(12, 3);
    for (double& x : beta.values()) x = rng.uniform();
    for (const auto& t : top_words(beta, 12)) {
        std::vector<WordId> sorted = t.words;
        std::sort(sorted.begin(), sorted.end());
        for (WordId i = 0; i < 12; ++i) EXPECT_EQ(sorted[i], i);
    }
    EXPECT_THROW(top_words(beta, 13), std::invalid_argument);
}

TEST(TopicUniqueness, Examples) {
    EXPECT_NEAR(topic_uniqueness({topic({0, 1}), topic({2, 3})}), 1.0, 1e-12);
    EXPECT_NEAR(topic_uniqueness({topic({0, 1}), topic({0, 1}), topic({0, 1})}), 1.0 / 3, 1e-12);
    EXPECT_NEAR(topic_uniqueness({topic({0, 1}), topic({0, 2})}), 0.75, 1e-12);
}

TEST(TopicUniqueness, Bounds) {
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t K = 1 + rng.below(6);
        TopicSet ts;
        for (std::size_t k = 0; k < K; ++k) {
            std::vector<WordId> w;
            while (w.size() < 4) {
                const auto x = static_cast<WordId>(rng.below(10));
                if (std::find(w.begin(), w.end(), x) == w.end()) w.push_back(x);
            }
            ts.push_back(topic(w));
        }
        const double tu = topic_uniqueness(ts);
        EXPECT_GE(tu, 1.0 / static_cast<double>(K) - 1e-12);
        EXPECT_LE(tu, 1.0 + 1e-12);
    }
}

TEST(Npmi, PerfectCoOccurrence) {
    const std::vector<Document> ref{doc({0, 1}), doc({0, 1}), doc({2}), doc({3})};
    EXPECT_NEAR(npmi_coherence({topic({0, 1})}, ref), 1.0, 1e-9);
}

TEST(Npmi, NeverCoOccur) {
    const std::vector<Document> ref{doc({0, 2}), doc({1, 2})};
    EXPECT_NEAR(npmi_coherence({topic({0, 1})}, ref), -1.0, 1e-12);
}

TEST(Npmi, MatchesDirectFormula) {
    // Windows: {0,1}, {0,2}, {0,1,2}, {2}. P(0)=1/2, P(1)=1/2, P(0,1)=1/2... and
    // P(2)=3/4, P(0,2)=1/2, P(1,2)=1/4.
    const std::vector<Document> ref{doc({0, 1}), doc({0, 2}), doc({0, 1, 2}), doc({2})};
    auto npmi = [](double pa, double pb, double pab) {
        return std::log(pab / (pa * pb)) / -std::log(pab);
    };
    const double p0 = 0.75, p1 = 0.5, p2 = 0.75;
    const double want =
        (npmi(p0, p1, 0.5) + npmi(p0, p2, 0.5) + npmi(p1, p2, 0.25)) / 3.0;
    EXPECT_NEAR(npmi_coherence({topic({0, 1, 2})}, ref), want, 1e-9);
}

TEST(Npmi, SlidingWindows) {
    // Window 2 over [0 1 2 3]: {0,1}, {1,2}, {2,3}; 0 and 3 never share a window.
    const std::vector<Document> ref{doc({0, 1, 2, 3})};
    EXPECT_NEAR(npmi_coherence({topic({0, 3})}, ref, 2), -1.0, 1e-12);
    EXPECT_NEAR(npmi_coherence({topic({0, 3})}, ref, 0), 1.0, 1e-9);
}

TEST(Npmi, SkipsShortTopicsAndIgnoresDocumentOrder) {
    std::vector<Document> ref{doc({0, 1}), doc({1, 2}), doc({0, 2, 3}), doc({3, 1})};
    const TopicSet ts{topic({0, 1, 2}), topic({3})};
    const double a = npmi_coherence(ts, ref);
    EXPECT_NEAR(a, npmi_coherence({topic({0, 1, 2})}, ref), 1e-15);
    std::reverse(ref.begin(), ref.end());
    EXPECT_NEAR(npmi_coherence(ts, ref), a, 1e-15);
    try {
        npmi_coherence({topic({3})}, ref);
        FAIL() << "expected an error";
    } catch (const std::runtime_error& e) {
        EXPECT_STREQ(e.what(), "no scorable topics");
    }
}

TEST(ClusterAssignments, ArgmaxWithTies) {
    Matrix t(2, 3);
    t(0, 0) = 0.1, t(0, 1) = 0.8, t(0, 2) = 0.1;
    t(1, 0) = t(1, 1) = t(1, 2) = 1.0 / 3;
    EXPECT_EQ(cluster_assignments(t), (std::vector<std::size_t>{1, 0}));
}

TEST(ClusterAssignments, MonotoneTransformInvariant) {
    Rng rng(3);
    Matrix t(30, 4), u(30, 4);
    for (std::size_t i = 0; i < t.size(); ++i) {
        t.values()[i] = rng.uniform();
        u.values()[i] = std::exp(3 * t.values()[i]) - 7;
    }
    EXPECT_EQ(cluster_assignments(t), cluster_assignments(u));
}

TEST(Purity, Examples) {
    const std::vector<std::size_t> same{0, 0, 1, 1};
    EXPECT_DOUBLE_EQ(purity(same, std::vector<int>{5, 5, 7, 7}), 1.0);
    EXPECT_DOUBLE_EQ(purity(std::vector<std::size_t>{0, 0, 0, 1}, std::vector<int>{0, 0, 1, 1}),
                     0.75);
    EXPECT_DOUBLE_EQ(purity(std::vector<std::size_t>{0, 0}, std::vector<int>{0, 1}), 0.5);
    EXPECT_THROW(purity(same, std::vector<int>{0}), std::invalid_argument);
}

// Independent NMI from an explicit contingency table.
double nmi_oracle(const std::vector<std::size_t>& c, const std::vector<int>& l) {
    const double n = static_cast<double>(c.size());
    std::map<std::size_t, double> pc;
    std::map<int, double> pl;
    std::map<std::pair<std::size_t, int>, double> joint;
    for (std::size_t i = 0; i < c.size(); ++i) {
        pc[c[i]] += 1 / n;
        pl[l[i]] += 1 / n;
        joint[{c[i], l[i]}] += 1 / n;
    }
    double hc = 0, hl = 0, mi = 0;
    for (auto [k, p] : pc) hc -= p * std::log(p);
    for (auto [k, p] : pl) hl -= p * std::log(p);
    for (auto [k, p] : joint) mi += p * std::log(p / (pc[k.first] * pl[k.second]));
    if (hc == 0 && hl == 0) return 1.0;
    return mi <= 0 ? 0.0 : mi / ((hc + hl) / 2);
}

TEST(Nmi, Examples) {
    EXPECT_NEAR(nmi(std::vector<std::size_t>{0, 0, 1, 1}, std::vector<int>{3, 3, 4, 4}), 1.0,
                1e-12);
    EXPECT_NEAR(nmi(std::vector<std::size_t>{0, 0, 0, 0}, std::vector<int>{0, 1, 0, 1}), 0.0,
                1e-12);
    EXPECT_NEAR(nmi(std::vector<std::size_t>{0, 0, 1, 1}, std::vector<int>{0, 1, 0, 1}), 0.0,
                1e-12);
    EXPECT_THROW(nmi(std::vector<std::size_t>{0}, std::vector<int>{0, 1}), std::invalid_argument);
}

TEST(Nmi, MatchesOracleAndIsSymmetric) {
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.below(40);
        std::vector<std::size_t> c(n);
        std::vector<int> l(n);
        for (auto& x : c) x = rng.below(4);
        for (auto& x : l) x = static_cast<int>(rng.below(3));
        const double v = nmi(c, l);
        EXPECT_NEAR(v, nmi_oracle(c, l), 1e-12);
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        std::vector<std::size_t> lc(l.begin(), l.end());
        std::vector<int> ci(c.begin(), c.end());
        EXPECT_NEAR(nmi(lc, ci), v, 1e-12);
    }
}

TEST(Nmi, RelabelingInvariant) {
    Rng rng(5);
    std::vector<std::size_t> c(30);
    std::vector<int> l(30);
    for (auto& x : c) x = rng.below(4);
    for (auto& x : l) x = static_cast<int>(rng.below(3));
    std::vector<std::size_t> c2(30);
    std::vector<int> l2(30);
    for (std::size_t i = 0; i < 30; ++i) {
        c2[i] = (c[i] + 2) % 4 + 10;
        l2[i] = 100 - l[i];
    }
    EXPECT_NEAR(nmi(c, l), nmi(c2, l2), 1e-12);
    EXPECT_DOUBLE_EQ(purity(c, l), purity(c2, l2));
}

TEST(PairCosine, Examples) {
    Matrix a(1, 2), b(1, 2);
    a(0, 0) = 1;
    b(0, 0) = b(0, 1) = 0.5;
    EXPECT_NEAR(pair_cosine(a, b), 1 / std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(pair_cosine(b, b), 1.0, 1e-15);
    Matrix x = Matrix::identity(2), y(2, 2);
    y(0, 1) = y(1, 0) = 1;
    EXPECT_EQ(pair_cosine(x, y), 0.0);
    EXPECT_THROW(pair_cosine(x, Matrix(3, 2, 1.0)), std::invalid_argument);
    EXPECT_THROW(pair_cosine(x, Matrix(2, 2)), std::invalid_argument);
}

TEST(Reports, JsonAndKeyValues) {
    EvalReport r;
    r.num_topics = 5;
    r.top_words = 10;
    r.tu = 0.9;
    r.npmi = 0.25;
    r.purity = 0.75;
    const auto j = nlohmann::json::parse(report_json(r));
    EXPECT_EQ(j["num_topics"], 5);
    EXPECT_EQ(j["tu"], 0.9);
    EXPECT_EQ(j["purity"], 0.75);
    EXPECT_TRUE(j["nmi"].is_null());
    const std::string kv = report_key_values(r);
    EXPECT_NE(kv.find("tu=0.9\n"), std::string::npos);
    EXPECT_NE(kv.find("purity=0.75\n"), std::string::npos);
    EXPECT_EQ(kv.find("pair_cos"), std::string::npos);
}

TEST(Export, TopicsAndThetaFormats) {
    Vocabulary vocab({"apple", "banana", "cherry"}, {1, 1, 1});
    TopicSet ts{topic({2, 0}), topic({1, 2})};
    EXPECT_EQ(format_topics(ts, vocab), "0\tcherry apple\n1\tbanana cherry\n");
    Matrix t(2, 2);
    t(0, 0) = 0.25, t(0, 1) = 0.75, t(1, 0) = 1.0 / 3, t(1, 1) = 2.0 / 3;
    const std::string s = format_theta(t);
    EXPECT_EQ(s.substr(0, s.find('\n')), "2 2");
    std::istringstream in(s);
    std::size_t n, k;
    in >> n >> k;
    for (double want : t.values()) {
        double got;
        in >> got;
        EXPECT_EQ(got, want);
    }
}

}  // namespace
}  // namespace tsctm
