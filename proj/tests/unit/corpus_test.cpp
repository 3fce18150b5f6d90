#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "tsctm/corpus.hpp"

namespace tsctm {
namespace {

std::vector<std::string> words_of(const Corpus& c, const Document& d) {
    std::vector<std::string> out;
    for (WordId id : d.tokens) out.push_back(c.vocab.word(id));
    return out;
}

TEST(Tokenize, LowercasesAndSplitsOnPunctuation) {
    EXPECT_EQ(tokenize("The CAT cat!"), (std::vector<std::string>{"the", "cat", "cat"}));
    EXPECT_EQ(tokenize("a-b_c,d  e\tf"),
              (std::vector<std::string>{"a", "b", "c", "d", "e", "f"}));
    EXPECT_EQ(tokenize("abc123 4x4"), (std::vector<std::string>{"abc123", "4x4"}));
    EXPECT_TRUE(tokenize("  ... !!").empty());
}

TEST(Tokenize, DropsControlAndMalformedBytes) {
    EXPECT_EQ(tokenize("ab\x01" "cd"), (std::vector<std::string>{"ab", "cd"}));
    EXPECT_EQ(tokenize("ab\xff" "cd"), (std::vector<std::string>{"ab", "cd"}));
    EXPECT_EQ(tokenize("ab\xc3"), (std::vector<std::string>{"ab"}));
}

TEST(Tokenize, KeepsNonAsciiLetters) {
    EXPECT_EQ(tokenize("caf\xc3\xa9 na\xc3\xafve"),
              (std::vector<std::string>{"caf\xc3\xa9", "na\xc3\xafve"}));
}

TEST(Preprocess, PipelineExample) {
    const std::vector<std::string> lines{"The CAT cat!", "a"};
    const Corpus c = preprocess(lines, {1, 2});
    ASSERT_EQ(c.size(), 1u);
    EXPECT_EQ(c.vocab.size(), 2u);
    EXPECT_EQ(words_of(c, c.docs[0]), (std::vector<std::string>{"the", "cat", "cat"}));
    EXPECT_EQ(c.docs[0].raw_line_no, 0u);
    EXPECT_EQ(c.raw_line_count, 2u);
}

TEST(Preprocess, AllDocumentsTooShort) {
    const std::vector<std::string> lines(4, "word");
    try {
        preprocess(lines, {1, 2});
        FAIL() << "expected an error";
    } catch (const std::runtime_error& e) {
        EXPECT_STREQ(e.what(), "corpus empty after filtering");
    }
}

TEST(Preprocess, RejectsBadOptions) {
    const std::vector<std::string> lines{"a b"};
    EXPECT_THROW(preprocess(lines, {0, 2}), std::invalid_argument);
    EXPECT_THROW(preprocess(lines, {1, 1}), std::invalid_argument);
    EXPECT_THROW(preprocess(std::vector<std::string>{}, {1, 2}), std::invalid_argument);
}

TEST(Preprocess, FrequencyFilterThenLengthFilter) {
    // "rare" appears once; removing it shortens the last line below min_len.
    const std::vector<std::string> lines{"x y", "x y z", "y z x", "rare z"};
    const Corpus c = preprocess(lines, {2, 2});
    ASSERT_EQ(c.size(), 3u);
    EXPECT_FALSE(c.vocab.find("rare").has_value());
    EXPECT_EQ(c.vocab.words(), (std::vector<std::string>{"x", "y", "z"}));
    for (std::size_t i = 0; i < c.vocab.size(); ++i) {
        EXPECT_EQ(c.vocab.find(c.vocab.word(static_cast<WordId>(i))), i);
        EXPECT_GE(c.vocab.doc_freq(static_cast<WordId>(i)), 2u);
    }
    for (const auto& d : c.docs) EXPECT_GE(d.tokens.size(), 2u);
}

TEST(Preprocess, Deterministic) {
    const std::vector<std::string> lines{"b a c", "c b", "a a d", "d c b"};
    EXPECT_EQ(preprocess(lines, {1, 2}), preprocess(lines, {1, 2}));
}

Corpus small_corpus() {
    return preprocess(std::vector<std::string>{"alpha beta", "x", "beta gamma alpha"}, {1, 2});
}

TEST(Augmentation, IdentityAugmentation) {
    const Corpus c = attach_augmentation(small_corpus(),
                                         std::vector<std::string>{"alpha beta", "x", "beta gamma alpha"});
    ASSERT_TRUE(c.has_augmentation());
    EXPECT_EQ(*c.aug_docs, c.docs);
}

TEST(Augmentation, OutOfVocabularyFallsBackToOriginal) {
    const Corpus c = attach_augmentation(
        small_corpus(), std::vector<std::string>{"unknown words", "ignored", "beta delta"});
    EXPECT_EQ((*c.aug_docs)[0], c.docs[0]);
    EXPECT_EQ(words_of(c, (*c.aug_docs)[1]), (std::vector<std::string>{"beta"}));
}

TEST(Augmentation, PerDocumentLinesAccepted) {
    const Corpus c = attach_augmentation(small_corpus(),
                                         std::vector<std::string>{"beta beta", "gamma"});
    EXPECT_EQ(words_of(c, (*c.aug_docs)[0]), (std::vector<std::string>{"beta", "beta"}));
    EXPECT_EQ((*c.aug_docs)[1].raw_line_no, 2u);
}

TEST(Augmentation, CountMismatchNamesBothCounts) {
    const Corpus c = preprocess(std::vector<std::string>{"a b", "b c", "c a"}, {1, 2});
    try {
        attach_augmentation(c, std::vector<std::string>{"a b", "b c", "c a", "a"});
        FAIL() << "expected an error";
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find('4'), std::string::npos) << msg;
        EXPECT_NE(msg.find('3'), std::string::npos) << msg;
    }
    EXPECT_THROW(attach_augmentation(c, std::vector<std::string>{"a b", "b c"}),
                 std::invalid_argument);
}

TEST(Labels, PerRawLineOrPerDocument) {
    const Corpus per_raw = attach_labels(small_corpus(), std::vector<int>{7, 8, 9});
    EXPECT_EQ(*per_raw.labels, (std::vector<int>{7, 9}));
    const Corpus per_doc = attach_labels(small_corpus(), std::vector<int>{1, 2});
    EXPECT_EQ(*per_doc.labels, (std::vector<int>{1, 2}));
    EXPECT_THROW(attach_labels(small_corpus(), std::vector<int>{1}), std::invalid_argument);
}

TEST(Bow, CountsSortedByWord) {
    Document d;
    d.tokens = {1, 0, 0};
    EXPECT_EQ(to_bow_row(d), (BowRow{{0, 2}, {1, 1}}));
    EXPECT_EQ(bow_total(to_bow_row(d)), 3u);
}

TEST(Bow, BatchAlignmentAndBounds) {
    const Corpus c = attach_augmentation(small_corpus(),
                                         std::vector<std::string>{"beta", "x", "alpha"});
    const std::vector<std::size_t> idx{1, 0};
    const BowBatch b = to_bow(c, idx);
    ASSERT_TRUE(b.aug_rows.has_value());
    EXPECT_EQ(b.rows.size(), b.aug_rows->size());
    EXPECT_EQ(b.rows[0], to_bow_row(c.docs[1]));
    EXPECT_EQ((*b.aug_rows)[0], to_bow_row((*c.aug_docs)[1]));
    EXPECT_TRUE(to_bow(c, std::vector<std::size_t>{}).rows.empty());
    EXPECT_THROW(to_bow(c, std::vector<std::size_t>{5}), std::out_of_range);
    EXPECT_FALSE(to_bow(small_corpus(), idx).aug_rows.has_value());
}

TEST(Bow, TotalsMatchDocumentLength) {
    const Corpus c = small_corpus();
    for (const auto& d : c.docs) EXPECT_EQ(bow_total(to_bow_row(d)), d.tokens.size());
}

class TempDir : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = std::filesystem::temp_directory_path() /
               ("tsctm_corpus_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        std::filesystem::create_directories(dir_);
    }
    void TearDown() override { std::filesystem::remove_all(dir_); }
    std::filesystem::path dir_;
};

using CorpusFiles = TempDir;

TEST_F(CorpusFiles, SaveLoadRoundTrip) {
    Corpus c = attach_labels(
        attach_augmentation(small_corpus(), std::vector<std::string>{"beta", "x", "gamma"}),
        std::vector<int>{0, 1, 2});
    save_corpus(c, dir_ / "c.json");
    EXPECT_EQ(load_corpus(dir_ / "c.json"), c);
}

TEST_F(CorpusFiles, ReadLinesAndLabels) {
    {
        std::ofstream out(dir_ / "raw.txt");
        out << "first line\r\nsecond\n\nlast";
        std::ofstream lab(dir_ / "labels.txt");
        lab << "3\n1\n";
    }
    EXPECT_EQ(read_lines(dir_ / "raw.txt"),
              (std::vector<std::string>{"first line", "second", "", "last"}));
    EXPECT_EQ(read_labels(dir_ / "labels.txt"), (std::vector<int>{3, 1}));
    EXPECT_THROW(read_lines(dir_ / "missing.txt"), std::runtime_error);
}

TEST_F(CorpusFiles, RejectsForeignJson) {
    {
        std::ofstream out(dir_ / "bad.json");
        out << R"({"format": "something-else"})";
    }
    EXPECT_THROW(load_corpus(dir_ / "bad.json"), std::runtime_error);
}

}  // namespace
}  // namespace tsctm
