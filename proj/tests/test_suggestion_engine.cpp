#include <gtest/gtest.h>

#include <httplib.h>

#include <thread>

#include "perfpatch.hpp"

using namespace perfpatch;

namespace {

std::string marked(const std::string& method, const std::string& before = "", const std::string& after = "") {
    std::string s;
    if (!before.empty()) s += before + "\n\n";
    s += "/* edit */\n" + method + "\n/* end */\n";
    if (!after.empty()) s += "\n" + after + "\n";
    return s;
}

// Hypotheses are fixed per input; the seed is ignored.
class FixedBackend : public Backend {
public:
    explicit FixedBackend(std::vector<Hypothesis> h) : h_(std::move(h)) {}
    std::string id() const override { return "fixed"; }
    std::vector<Hypothesis> sample(const std::string&, std::size_t n, std::optional<std::uint64_t>) override {
        std::vector<Hypothesis> out(h_.begin(), h_.begin() + static_cast<std::ptrdiff_t>(std::min(n, h_.size())));
        return out;
    }

private:
    std::vector<Hypothesis> h_;
};

class ThrowingBackend : public Backend {
public:
    std::string id() const override { return "broken"; }
    std::vector<Hypothesis> sample(const std::string&, std::size_t, std::optional<std::uint64_t>) override {
        throw std::runtime_error("socket closed");
    }
};

// Local HTTP server on an ephemeral port, stopped on destruction.
class TestServer {
public:
    explicit TestServer(httplib::Server::Handler h) {
        server_.Post("/sample", std::move(h));
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~TestServer() {
        server_.stop();
        thread_.join();
    }
    RemoteEndpoint endpoint(std::chrono::milliseconds timeout = std::chrono::milliseconds(5000)) const {
        return {"http://127.0.0.1:" + std::to_string(port_) + "/sample", timeout, "remote"};
    }

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace

// ---- ranking -------------------------------------------------------------------------------

TEST(Rank, TopKKeepsBestRanks) {
    auto s = rank_hypotheses({{"a", -0.5}, {"b", -0.1}, {"c", -0.9}}, 2, "m");
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s[0].patch_text, "b");
    EXPECT_EQ(s[0].rank, 1u);
    EXPECT_EQ(s[1].patch_text, "a");
    EXPECT_EQ(s[1].rank, 2u);
    EXPECT_EQ(s[0].backend_id, "m");
}

TEST(Rank, IdenticalHypothesesMergeToBest) {
    auto s = rank_hypotheses({{"same", -1.0}, {"same", -2.0}}, 5, "m");
    ASSERT_EQ(s.size(), 1u);
    EXPECT_DOUBLE_EQ(s[0].avg_token_loglik, -1.0);
}

TEST(Rank, TiesBreakByText) {
    auto s = rank_hypotheses({{"z", -1.0}, {"a", -1.0}, {"m", -1.0}}, 3, "m");
    EXPECT_EQ(s[0].patch_text, "a");
    EXPECT_EQ(s[1].patch_text, "m");
    EXPECT_EQ(s[2].patch_text, "z");
}

TEST(Rank, RanksArePermutationWithNonIncreasingLikelihood) {
    std::vector<Hypothesis> h;
    for (int i = 0; i < 200; ++i) h.push_back({"h" + std::to_string(i % 70), -0.01 * ((i * 37) % 101)});
    auto s = rank_hypotheses(h, 50, "m");
    ASSERT_EQ(s.size(), 50u);
    std::set<std::string> texts;
    for (std::size_t i = 0; i < s.size(); ++i) {
        EXPECT_EQ(s[i].rank, i + 1);
        if (i) {
            EXPECT_LE(s[i].avg_token_loglik, s[i - 1].avg_token_loglik);
        }
        EXPECT_TRUE(texts.insert(s[i].patch_text).second);
    }
}

TEST(SampleAndRank, Errors) {
    FixedBackend b({{"x", 0.0}});
    EXPECT_THROW(sample_and_rank("in", 1, 2, b), ConfigError);
    EXPECT_THROW(sample_and_rank("in", 1, 0, b), ConfigError);
    ThrowingBackend t;
    try {
        sample_and_rank("in", 2, 1, t);
        FAIL();
    } catch (const BackendFailure& e) {
        EXPECT_NE(std::string(e.what()).find("[broken]"), std::string::npos);
    }
}

// ---- rules ---------------------------------------------------------------------------------

TEST(Rules, CountEqualsZeroBecomesNotAny) {
    auto h = apply_rules(marked("bool Empty(List<int> list)\n{\n    return list.Count() == 0;\n}"), {}, {"R1"});
    ASSERT_EQ(h.size(), 1u);
    EXPECT_EQ(h[0].rule_id, "R1");
    EXPECT_NE(h[0].patch_text.find("return !list.Any();"), std::string::npos);
    EXPECT_NE(h[0].patch_text.find("using System.Linq;"), std::string::npos);
}

TEST(Rules, CountGreaterThanZeroBecomesAny) {
    auto h = apply_rules(marked("bool Has(List<int> list) => list.Count() > 0;", "using System.Linq;"), {}, {"R1"});
    ASSERT_EQ(h.size(), 1u);
    EXPECT_EQ(h[0].patch_text, "bool Has(List<int> list) => list.Any();\n");
}

TEST(Rules, ToCharArrayLoopIteratesString) {
    auto h = apply_rules(marked("int F(string input)\n{\n    int n = 0;\n    foreach (var c in input.ToCharArray()) n += c;\n"
                                "    return n;\n}"),
                         {}, {"R3"});
    ASSERT_EQ(h.size(), 1u);
    EXPECT_NE(h[0].patch_text.find("foreach (var c in input)"), std::string::npos);
    EXPECT_EQ(h[0].patch_text.find("ToCharArray"), std::string::npos);
}

TEST(Rules, NoMatchGivesNothing) {
    EXPECT_TRUE(apply_rules(marked("int Add(int a, int b)\n{\n    return a + b;\n}")).empty());
    EXPECT_TRUE(apply_rules("no markers here").empty());
}

TEST(Rules, WhereFirstOrDefaultFolds) {
    auto h = apply_rules(marked("string F(List<string> w) => w.Where(x => x.Length > 2).FirstOrDefault();"), {}, {"R2"});
    ASSERT_EQ(h.size(), 1u);
    EXPECT_NE(h[0].patch_text.find("w.FirstOrDefault(x => x.Length > 2)"), std::string::npos);
}

TEST(Rules, LoopInvariantArrayIsHoisted) {
    auto h = apply_rules(marked("int Count(string s)\n{\n    int n = 0;\n    foreach (char c in s)\n    {\n"
                                "        var seps = new[] { ',', ';' };\n        if (seps.Contains(c)) n++;\n    }\n"
                                "    return n;\n}"),
                         {}, {"R4"});
    ASSERT_EQ(h.size(), 1u);
    EXPECT_NE(h[0].patch_text.find("private static readonly char[] CountValues = new[] { ',', ';' };"), std::string::npos);
    EXPECT_NE(h[0].patch_text.find("var seps = CountValues;"), std::string::npos);
}

TEST(Rules, ConcatenationLoopUsesCachedBuilder) {
    auto h = apply_rules(marked("string Join(List<string> xs)\n{\n    string r = \"\";\n    foreach (var x in xs)\n    {\n"
                                "        r += x;\n    }\n    return r;\n}"),
                         {}, {"R5"});
    ASSERT_EQ(h.size(), 1u);
    const auto& p = h[0].patch_text;
    EXPECT_NE(p.find("using System.Text;"), std::string::npos);
    EXPECT_NE(p.find("StringBuilder _rBuilder"), std::string::npos);
    EXPECT_NE(p.find("_rBuilder.Clear()"), std::string::npos);
    EXPECT_TRUE(check_syntax(p));
}

TEST(Rules, EveryHypothesisParsesAndKeepsSignature) {
    std::string in = marked(
        "public string Mixed(List<string> xs, string s)\n{\n    string r = \"\";\n"
        "    foreach (var c in s.ToCharArray()) { var d = new[] { 1, 2 }; r += d.Length; }\n"
        "    if (xs.Count() == 0) return r;\n    return xs.Where(x => x == r).FirstOrDefault();\n}");
    auto h = apply_rules(in);
    EXPECT_EQ(h.size(), 5u);
    for (const auto& x : h) {
        auto u = parse_fragment(x.patch_text);
        ASSERT_FALSE(u.classes.empty());
        EXPECT_EQ(u.classes[0].methods.at(0).signature, "string Mixed(List<string>,string)") << x.rule_id;
    }
}

TEST(RuleBackend, ScoresZeroAndCapsAtN) {
    RuleBackend b;
    std::string in = marked("bool E(List<int> l)\n{\n    foreach (var c in \"ab\".ToCharArray()) { }\n"
                            "    return l.Count() == 0;\n}");
    auto all = b.sample(in, 10, std::nullopt);
    ASSERT_EQ(all.size(), 2u);
    for (const auto& h : all) EXPECT_EQ(h.avg_loglik, 0.0);
    EXPECT_EQ(b.sample(in, 1, std::nullopt).size(), 1u);
}

// ---- suggest_all --------------------------------------------------------------------------

TEST(SuggestAll, DeterministicAcrossRunsAndWorkers) {
    std::vector<TransformationExample> ex;
    for (int i = 0; i < 24; ++i) {
        TransformationExample e;
        e.example_id = "ex" + std::to_string(i);
        e.input_text = marked("bool E" + std::to_string(i) +
                              "(List<int> l)\n{\n    foreach (var c in \"ab\".ToCharArray()) { }\n    return l.Count() == 0;\n}");
        ex.push_back(e);
    }
    RuleBackend b;
    SuggestOptions one{10, 5, std::nullopt, 1, 8};
    SuggestOptions many{10, 5, std::nullopt, 8, 8};
    auto a = util::to_jsonl(suggest_all(ex, b, one));
    EXPECT_EQ(a, util::to_jsonl(suggest_all(ex, b, many)));
    EXPECT_EQ(a, util::to_jsonl(suggest_all(ex, b, many)));
    auto s = suggest_all(ex, b, many);
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& x : s) {
        EXPECT_TRUE(seen.insert({x.example_id, x.patch_text}).second);
        EXPECT_EQ(x.suggestion_id, x.example_id + "#" + std::to_string(x.rank));
    }
}

TEST(SuggestAll, FailuresAreReported) {
    ThrowingBackend t;
    TransformationExample e;
    e.example_id = "ex";
    std::vector<SuggestFailure> f;
    EXPECT_TRUE(suggest_all({e}, t, {2, 1, std::nullopt, 1, 1}, &f).empty());
    ASSERT_EQ(f.size(), 1u);
    EXPECT_EQ(f[0].example_id, "ex");
}

// ---- remote ---------------------------------------------------------------------------------

TEST(Remote, EchoServerGivesOneHypothesis) {
    TestServer srv([](const httplib::Request& req, httplib::Response& res) {
        auto j = util::json::parse(req.body);
        util::json out{{"hypotheses", {{{"text", j["input"]}, {"avg_loglik", -0.25}}}}};
        res.set_content(out.dump(), "application/json");
    });
    RemoteBackend b(srv.endpoint());
    auto h = b.sample("int F() { return 1; }", 4, 7);
    ASSERT_EQ(h.size(), 1u);
    EXPECT_EQ(h[0].text, "int F() { return 1; }");
    EXPECT_DOUBLE_EQ(h[0].avg_loglik, -0.25);
}

TEST(Remote, RequestCarriesInputNAndSeed) {
    util::json seen;
    std::mutex mu;
    TestServer srv([&](const httplib::Request& req, httplib::Response& res) {
        std::lock_guard<std::mutex> lock(mu);
        seen = util::json::parse(req.body);
        res.set_content(R"({"hypotheses": []})", "application/json");
    });
    RemoteBackend b(srv.endpoint());
    EXPECT_TRUE(b.sample("abc", 3, 11).empty());
    std::lock_guard<std::mutex> lock(mu);
    EXPECT_EQ(seen["input"], "abc");
    EXPECT_EQ(seen["n"], 3);
    EXPECT_EQ(seen["seed"], 11);
}

TEST(Remote, NonJsonIsMalformed) {
    TestServer srv([](const httplib::Request&, httplib::Response& res) { res.set_content("<html>oops</html>", "text/html"); });
    RemoteBackend b(srv.endpoint());
    EXPECT_THROW(b.sample("x", 2, std::nullopt), MalformedResponse);
}

TEST(Remote, FiveHypothesesInOrder) {
    TestServer srv([](const httplib::Request&, httplib::Response& res) {
        util::json arr = util::json::array();
        for (int i = 0; i < 5; ++i) arr.push_back({{"text", "h" + std::to_string(i)}, {"avg_loglik", -0.1 * (5 - i)}});
        res.set_content(util::json{{"hypotheses", arr}}.dump(), "application/json");
    });
    RemoteBackend b(srv.endpoint());
    auto h = b.sample("x", 5, std::nullopt);
    ASSERT_EQ(h.size(), 5u);
    for (int i = 0; i < 5; ++i) EXPECT_EQ(h[static_cast<std::size_t>(i)].text, "h" + std::to_string(i));
    // ranking then orders by likelihood, h4 first
    auto s = sample_and_rank("x", 5, 5, b);
    EXPECT_EQ(s.front().patch_text, "h4");
}

TEST(Remote, Timeout) {
    TestServer srv([](const httplib::Request&, httplib::Response& res) {
        std::this_thread::sleep_for(std::chrono::milliseconds(1500));
        res.set_content(R"({"hypotheses": []})", "application/json");
    });
    RemoteBackend b(srv.endpoint(std::chrono::milliseconds(300)));
    EXPECT_THROW(b.sample("x", 1, std::nullopt), Timeout);
}

TEST(Remote, HttpErrorIsBackendFailure) {
    TestServer srv([](const httplib::Request&, httplib::Response& res) { res.status = 500; });
    RemoteBackend b(srv.endpoint());
    EXPECT_THROW(b.sample("x", 1, std::nullopt), BackendFailure);
}

TEST(Remote, ProtocolValidation) {
    EXPECT_THROW(parse_remote_response(R"({"hyp": []})", 2), MalformedResponse);
    EXPECT_THROW(parse_remote_response(R"({"hypotheses": [{"text": 1, "avg_loglik": 0}]})", 2), MalformedResponse);
    EXPECT_THROW(parse_remote_response(R"({"hypotheses": [{"text": "a"}]})", 2), MalformedResponse);
    EXPECT_THROW(parse_remote_response(R"({"hypotheses": [{"text": "a", "avg_loglik": 0}, {"text": "b", "avg_loglik": 0}]})", 1),
                 MalformedResponse);
    EXPECT_EQ(parse_remote_response(R"({"hypotheses": [{"text": "a", "avg_loglik": -1.5}]})", 1).at(0).avg_loglik, -1.5);
    EXPECT_THROW(RemoteBackend({"https://example.invalid/x", std::chrono::milliseconds(10), "r"}), ConfigError);
}
