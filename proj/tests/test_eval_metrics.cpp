#include <gtest/gtest.h>

#include "fixture_gen.hpp"
#include "perfpatch.hpp"

using namespace perfpatch;

namespace {

Suggestion sugg(const std::string& ex, const std::string& text, std::size_t rank) {
    Suggestion s;
    s.example_id = ex;
    s.patch_text = text;
    s.rank = rank;
    s.suggestion_id = ex + "#" + std::to_string(rank);
    return s;
}

const char* kMethod = "bool IsEmpty(List<int> list)\n{\n    return list.Count() == 0;\n}";

}  // namespace

// ---- verbatim and abstracted ------------------------------------------------------------

TEST(Verbatim, Examples) {
    EXPECT_TRUE(verbatim_match({kMethod}, kMethod));
    EXPECT_TRUE(verbatim_match({"bool IsEmpty(List<int> list)\n{\n    // cheap check\n    return list.Count() == 0;\n}"},
                               kMethod));
    EXPECT_FALSE(verbatim_match({"bool IsEmpty(List<int> xs)\n{\n    return xs.Count() == 0;\n}"}, kMethod));
    EXPECT_FALSE(verbatim_match({}, kMethod));
}

TEST(Verbatim, WhitespaceAndLayoutIgnored) {
    EXPECT_TRUE(verbatim_equal("bool IsEmpty(List<int> list) { return list.Count() == 0; }", kMethod));
}

TEST(Abstracted, Examples) {
    EXPECT_TRUE(abstracted_match({"bool IsEmpty(List<int> xs)\n{\n    return xs.Count() == 0;\n}"}, kMethod));
    EXPECT_FALSE(abstracted_match({"bool IsEmpty(List<int> list)\n{\n    return list.Any() == false;\n}"}, kMethod));
    EXPECT_FALSE(abstracted_match({"bool IsEmpty(List<int> list) { return list.Count() == 0; "}, kMethod));
}

TEST(Abstracted, VerbatimImpliesAbstracted) {
    for (const auto& s : testing_support::snippet_corpus()) {
        ASSERT_TRUE(verbatim_match({s}, s));
        EXPECT_TRUE(abstracted_match({s}, s)) << s;
    }
}

TEST(Abstracted, BijectiveRenamingFixtures) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 300; ++i) {
        auto f = testing_support::renaming_fixture(rng);
        EXPECT_TRUE(abstracted_match({f.renamed}, f.truth)) << f.truth << "\n" << f.renamed;
        EXPECT_FALSE(abstracted_match({f.other}, f.truth)) << f.truth << "\n" << f.other;
        if (verbatim_match({f.renamed}, f.truth)) {
            EXPECT_TRUE(abstracted_match({f.renamed}, f.truth));
        }
    }
}

// ---- CodeBLEU ------------------------------------------------------------------------------

TEST(CodeBleu, SelfScoreIsOne) {
    for (const auto& s : testing_support::snippet_corpus()) EXPECT_NEAR(codebleu(s, s), 1.0, 1e-9) << s;
}

TEST(CodeBleu, ScoresAreInUnitInterval) {
    auto corpus = testing_support::snippet_corpus();
    for (std::size_t i = 0; i < corpus.size(); ++i)
        for (std::size_t j = 0; j < corpus.size(); j += 3) {
            auto p = codebleu_parts(corpus[i], corpus[j]);
            for (double v : {p.bleu, p.weighted_bleu, p.syntax, p.dataflow, p.score}) {
                EXPECT_GE(v, 0.0);
                EXPECT_LE(v, 1.0);
            }
        }
}

TEST(CodeBleu, BleuOnlyWeightsMatchOracle) {
    auto cases = testing_support::bleu_oracle();
    ASSERT_EQ(cases.size(), 11u);
    for (const auto& c : cases) {
        EXPECT_NEAR(codebleu(c.candidate, c.reference, {1, 0, 0, 0}), c.bleu, 1e-6) << c.candidate;
        EXPECT_NEAR(bleu(code_tokens(c.candidate), code_tokens(c.reference)), c.bleu, 1e-12);
    }
}

TEST(CodeBleu, TwelveTokenPair) {
    std::string a = "t = a * b + c - d % e ;";
    std::string b = "t = a * b - c + d % e ;";
    ASSERT_EQ(code_tokens(a).size(), 12u);
    ASSERT_EQ(code_tokens(b).size(), 12u);
    // frozen from the independent oracle
    EXPECT_NEAR(codebleu(a, b, {1, 0, 0, 0}), 0.6175637907926896, 1e-9);
}

TEST(CodeBleu, WeightsMustSumToOne) {
    EXPECT_THROW(codebleu("a", "a", {0.5, 0.1, 0.1, 0.1}), ConfigError);
    EXPECT_THROW(codebleu("a", "a", {1.5, -0.5, 0, 0}), ConfigError);
}

TEST(CodeBleu, CloserCandidateScoresHigher) {
    std::string ref = "bool HasLong(List<string> words) => words.Any(w => w.Length > 8);";
    EXPECT_GT(codebleu("bool HasLong(List<string> words) => words.Any(x => x.Length > 8);", ref),
              codebleu("int Add(int a, int b) { return a + b; }", ref));
}

// ---- closest match -------------------------------------------------------------------------

TEST(Closest, VerbatimPresenceGivesOne) {
    std::vector<Suggestion> s{sugg("e", "int Add(int a, int b) { return a - b; }", 1), sugg("e", kMethod, 2)};
    auto m = closest_match(s, kMethod);
    ASSERT_TRUE(m);
    EXPECT_EQ(m->index, 1u);
    EXPECT_EQ(m->rank, 2u);
    EXPECT_NEAR(m->similarity, 1.0, 1e-12);
}

TEST(Closest, PicksCloserAndReportsLikelihoodRank) {
    std::string truth = "int CountUpper(string s) { int n = 0; foreach (var c in s) { if (char.IsUpper(c)) n++; } return n; }";
    std::vector<Suggestion> s{
        sugg("e", "void Log(string m) { Console.WriteLine(m); }", 1),
        sugg("e", "int CountUpper(string s) { int n = 0; foreach (var c in s.ToCharArray()) { if (char.IsUpper(c)) n++; } return n; }", 4),
        sugg("e", "int CountUpper(string s) { return s.Length; }", 2),
    };
    auto m = closest_match(s, truth);
    ASSERT_TRUE(m);
    EXPECT_EQ(m->index, 1u);
    EXPECT_EQ(m->rank, 4u);
    EXPECT_LT(m->similarity, 1.0);
    EXPECT_FALSE(closest_match({}, truth));
}

TEST(Closest, SimilarityIsSymmetric) {
    auto corpus = testing_support::snippet_corpus();
    for (std::size_t i = 0; i < corpus.size(); ++i)
        for (std::size_t j = i; j < corpus.size(); j += 7) {
            double ab = retrieval_similarity(corpus[i], corpus[j]);
            EXPECT_DOUBLE_EQ(ab, retrieval_similarity(corpus[j], corpus[i]));
            EXPECT_GE(ab, 0.0);
            EXPECT_LE(ab, 1.0);
        }
}

// ---- top-K ---------------------------------------------------------------------------------

TEST(TopK, AllAcceptedAtRankOne) {
    std::vector<Judgment> j{{"a", true, 1}, {"b", true, 1}, {"c", true, 1}};
    for (const auto& [k, v] : topk_accuracy(j)) EXPECT_DOUBLE_EQ(v, 100.0) << k;
}

TEST(TopK, OneOfTwoAcceptedAtRankSeven) {
    auto acc = topk_accuracy({{"a", true, 7}, {"b", false, 0}}, {1, 10});
    EXPECT_DOUBLE_EQ(acc[1], 0.0);
    EXPECT_DOUBLE_EQ(acc[10], 50.0);
}

TEST(TopK, MonotoneInK) {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 100; ++t) {
        std::vector<Judgment> j;
        for (std::size_t i = rng() % 40; i > 0; --i) j.push_back({"e" + std::to_string(i), rng() % 2 == 0, 1 + rng() % 600});
        auto acc = topk_accuracy(j, {1, 5, 10, 100, 500, 1000});
        double prev = -1.0;
        for (const auto& [k, v] : acc) {
            EXPECT_GE(v, prev);
            EXPECT_LE(v, 100.0);
            prev = v;
        }
    }
}

TEST(TopK, JudgmentCsv) {
    auto j = parse_judgments("example_id,accepted,rank\na,true,3\nb,no,0\nc,1,12\n");
    ASSERT_EQ(j.size(), 3u);
    EXPECT_TRUE(j[0].accepted);
    EXPECT_EQ(j[0].rank, 3u);
    EXPECT_FALSE(j[1].accepted);
    EXPECT_EQ(j[2].rank, 12u);
    EXPECT_THROW(parse_judgments("example_id,rank\na,1\n"), SchemaError);
    EXPECT_THROW(parse_judgments("example_id,accepted,rank\na,maybe,1\n"), SchemaError);
}

// ---- evaluate ------------------------------------------------------------------------------

TEST(Evaluate, ReportAggregates) {
    std::vector<TransformationExample> truth(3);
    truth[0].example_id = "a";
    truth[0].output_text = kMethod;
    truth[1].example_id = "b";
    truth[1].output_text = "int Add(int a, int b) { return a + b; }";
    truth[2].example_id = "c";
    truth[2].output_text = "int Z() { return 0; }";
    std::vector<Suggestion> s{sugg("a", kMethod, 1), sugg("b", "int Add(int x, int y) { return x + y; }", 1),
                              sugg("b", "int Add(int a, int b) { return b + a; }", 2)};
    auto r = evaluate(s, truth, std::vector<Judgment>{{"a", true, 1}, {"b", true, 2}, {"c", false, 0}}, {}, {1, 10});
    EXPECT_EQ(r.examples, 3u);
    EXPECT_NEAR(r.verbatim_pct, 100.0 / 3, 1e-9);
    EXPECT_NEAR(r.abstracted_pct, 200.0 / 3, 1e-9);
    EXPECT_NEAR(r.topk_accuracy[1], 100.0 / 3, 1e-9);
    EXPECT_NEAR(r.topk_accuracy[10], 200.0 / 3, 1e-9);
    ASSERT_EQ(r.per_example.size(), 3u);
    EXPECT_NEAR(r.per_example[0].codebleu, 1.0, 1e-9);
    EXPECT_EQ(r.per_example[2].suggestions, 0u);
    EXPECT_FALSE(r.per_example[2].closest_rank);
    EXPECT_LE(r.verbatim_pct, r.abstracted_pct);

    util::json j = r;
    auto back = j.get<MetricReport>();
    EXPECT_EQ(util::json(back).dump(), j.dump());
}

TEST(Evaluate, EmptyTruth) {
    auto r = evaluate({}, {});
    EXPECT_EQ(r.examples, 0u);
    EXPECT_EQ(r.verbatim_pct, 0.0);
    EXPECT_TRUE(r.topk_accuracy.empty());
}
