#include <gtest/gtest.h>

#include <random>

#include "perfpatch.hpp"
#include "test_support.hpp"

using namespace perfpatch;

namespace {

std::vector<std::vector<double>> read_csv(const std::string& name) {
    std::vector<std::vector<double>> rows;
    auto lines = util::split_lines(util::read_file(testing_support::data_dir() / name));
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        rows.push_back(util::parse_real_list(lines[i]));
    }
    return rows;
}

// Upper tail of Student's t by composite Simpson integration of the density
// on [0, t], independent of the continued-fraction route.
double t_upper_quadrature(double t, double df) {
    auto pdf = [df](double x) {
        double ln = std::lgamma((df + 1) / 2) - std::lgamma(df / 2) - 0.5 * std::log(df * M_PI) -
                    (df + 1) / 2 * std::log1p(x * x / df);
        return std::exp(ln);
    };
    double a = std::fabs(t);
    const int n = 20000;
    double h = a / n, s = pdf(0) + pdf(a);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * pdf(i * h);
    double mass = s * h / 3;
    return t >= 0 ? 0.5 - mass : 0.5 + mass;
}

BenchmarkSummary summary(const std::string& name, double mean, double sd, std::size_t n, double q1, double q3,
                         std::uint64_t alloc = 0) {
    BenchmarkSummary s;
    s.benchmark_name = name;
    s.mean = mean;
    s.stddev = sd;
    s.n = n;
    s.q1 = q1;
    s.q3 = q3;
    s.allocated_bytes = alloc;
    return s;
}

}  // namespace

// ---- Student t ------------------------------------------------------------------------------

TEST(StudentT, CriticalValuesMatchOracle) {
    auto rows = read_csv("t_critical.csv");
    ASSERT_FALSE(rows.empty());
    for (const auto& r : rows) EXPECT_NEAR(student_t_critical(r[0], r[1]), r[2], 1e-6) << r[0] << " " << r[1];
    EXPECT_NEAR(student_t_critical(0.05, 10), 1.812, 1e-3);
}

TEST(StudentT, UpperTailMatchesQuadrature) {
    for (double df : {1.0, 2.5, 7.0, 30.0, 120.0})
        for (double t : {-3.0, -0.4, 0.0, 0.7, 1.8, 4.5}) EXPECT_NEAR(student_t_upper(t, df), t_upper_quadrature(t, df), 1e-8);
}

// ---- Welch ----------------------------------------------------------------------------------

TEST(Welch, MatchesOracleTriples) {
    auto rows = read_csv("welch_oracle.csv");
    ASSERT_EQ(rows.size(), 100u);
    for (const auto& r : rows) {
        auto w = welch_one_tailed({r[0], r[1], static_cast<std::size_t>(r[2])}, {r[3], r[4], static_cast<std::size_t>(r[5])});
        EXPECT_NEAR(w.t, r[6], 1e-9 * std::max(1.0, std::fabs(r[6])));
        EXPECT_NEAR(w.df, r[7], 1e-9 * r[7]);
        EXPECT_NEAR(w.p, r[8], 1e-6);
        EXPECT_EQ(w.reject, r[8] < 0.05);
    }
}

TEST(Welch, IdenticalSamples) {
    auto w = welch_one_tailed({100, 5, 20}, {100, 5, 20});
    EXPECT_DOUBLE_EQ(w.t, 0.0);
    EXPECT_NEAR(w.p, 0.5, 1e-12);
    EXPECT_FALSE(w.reject);
}

TEST(Welch, ClearlyFaster) {
    auto w = welch_one_tailed({100, 5, 20}, {90, 4, 20});
    EXPECT_NEAR(w.t, 6.98, 0.01);
    EXPECT_NEAR(w.df, 36.3, 0.1);
    EXPECT_LT(w.p, 1e-6);
    EXPECT_TRUE(w.reject);
}

TEST(Welch, DegenerateInputs) {
    EXPECT_THROW(welch_one_tailed({1, 1, 1}, {1, 1, 20}), DegenerateSample);
    EXPECT_THROW(welch_one_tailed({1, -1, 5}, {1, 1, 20}), DegenerateSample);
    auto w = welch_one_tailed({10, 0, 5}, {9, 0, 5});
    EXPECT_EQ(w.p, 0.0);
    EXPECT_TRUE(w.reject);
    EXPECT_EQ(welch_one_tailed({10, 0, 5}, {10, 0, 5}).p, 1.0);
}

TEST(Welch, SwappingSidesComplementsP) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> mean(10, 1000), rel(0.01, 0.3);
    for (int i = 0; i < 200; ++i) {
        double m1 = mean(rng), m2 = mean(rng);
        SampleStats a{m1, m1 * rel(rng), 2 + rng() % 50}, b{m2, m2 * rel(rng), 2 + rng() % 50};
        EXPECT_NEAR(welch_one_tailed(a, b).p, 1.0 - welch_one_tailed(b, a).p, 1e-12);
    }
}

TEST(Welch, ScaleInvariant) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> mean(10, 1000), rel(0.01, 0.3), scale(1e-9, 1e3);
    for (int i = 0; i < 200; ++i) {
        double m1 = mean(rng), m2 = mean(rng), c = scale(rng);
        SampleStats a{m1, m1 * rel(rng), 2 + rng() % 50}, b{m2, m2 * rel(rng), 2 + rng() % 50};
        auto w = welch_one_tailed(a, b);
        auto s = welch_one_tailed({a.mean * c, a.sd * c, a.n}, {b.mean * c, b.sd * c, b.n});
        EXPECT_NEAR(w.t, s.t, 1e-9 * std::max(1.0, std::fabs(w.t)));
        EXPECT_NEAR(w.p, s.p, 1e-9);
    }
}

// ---- Tukey ----------------------------------------------------------------------------------

TEST(Tukey, Examples) {
    EXPECT_TRUE(tukey_separated({95, 105}, {55, 62}));
    EXPECT_FALSE(tukey_separated({95, 105}, {60, 70}));
    EXPECT_FALSE(tukey_separated({95, 105}, {95, 105}));
}

// Brute force: enumerate both fenced intervals on the half-integer grid
// (integer quartiles put every fence on it) and look for a candidate point
// at or above a baseline point.
TEST(Tukey, AgreesWithBruteForce) {
    std::mt19937_64 rng(10);
    std::uniform_int_distribution<int> v(0, 200), w(0, 40);
    for (int i = 0; i < 1000; ++i) {
        double bq1 = v(rng), cq1 = v(rng);
        Quartiles b{bq1, bq1 + w(rng)}, c{cq1, cq1 + w(rng)};
        bool separated = true;
        for (double x = b.lower_fence(); x <= b.upper_fence() && separated; x += 0.5)
            for (double y = c.lower_fence(); y <= c.upper_fence(); y += 0.5)
                if (y >= x) {
                    separated = false;
                    break;
                }
        EXPECT_EQ(tukey_separated(b, c), separated) << b.q1 << " " << b.q3 << " / " << c.q1 << " " << c.q3;
    }
}

TEST(Tukey, Antisymmetric) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> v(0, 100), w(0, 20);
    for (int i = 0; i < 1000; ++i) {
        double a = v(rng), b = v(rng);
        Quartiles x{a, a + w(rng)}, y{b, b + w(rng)};
        EXPECT_FALSE(tukey_separated(x, y) && tukey_separated(y, x));
    }
}

// ---- memory ---------------------------------------------------------------------------------

TEST(Memory, Comparisons) {
    EXPECT_EQ(compare_memory(1024, 512), MemoryChange::Improved);
    EXPECT_EQ(compare_memory(512, 1024), MemoryChange::Regressed);
    EXPECT_EQ(compare_memory(512, 512), MemoryChange::Equal);
}

// ---- judge ----------------------------------------------------------------------------------

TEST(Judge, FasterWithSeparatedFencesAndEqualAllocations) {
    auto r = judge({summary("B", 100e-6, 2e-6, 20, 99e-6, 101e-6, 64)}, {summary("B", 60e-6, 2e-6, 20, 59e-6, 61e-6, 64)});
    ASSERT_EQ(r.benchmarks.size(), 1u);
    EXPECT_TRUE(r.benchmarks[0].duration_improved);
    EXPECT_TRUE(r.benchmarks[0].improved());
    EXPECT_TRUE(r.overall_improved);
    EXPECT_NEAR(r.benchmarks[0].duration_change_pct, 40.0, 1e-9);
}

TEST(Judge, FasterButMoreAllocations) {
    auto r = judge({summary("B", 100e-6, 2e-6, 20, 99e-6, 101e-6, 64)}, {summary("B", 60e-6, 2e-6, 20, 59e-6, 61e-6, 128)});
    EXPECT_TRUE(r.benchmarks[0].duration_improved);
    EXPECT_TRUE(r.benchmarks[0].memory_regressed);
    EXPECT_FALSE(r.benchmarks[0].improved());
    EXPECT_FALSE(r.overall_improved);
}

TEST(Judge, IdenticalRaisesNoFlags) {
    auto s = summary("B", 100e-6, 2e-6, 20, 99e-6, 101e-6, 64);
    auto v = judge({s}, {s}).benchmarks.at(0);
    EXPECT_FALSE(v.duration_improved || v.duration_regressed || v.memory_improved || v.memory_regressed);
}

TEST(Judge, FastButOverlappingFencesIsNotImproved) {
    auto r = judge({summary("B", 100, 5, 20, 95, 105)}, {summary("B", 90, 4, 20, 60, 70)});
    EXPECT_FALSE(r.benchmarks[0].duration_improved);
}

TEST(Judge, NameMismatch) {
    auto s = summary("A", 1, 0.1, 5, 0.9, 1.1, 0);
    auto t = summary("B", 1, 0.1, 5, 0.9, 1.1, 0);
    EXPECT_THROW(judge({s}, {t}), BenchmarkNameMismatch);
    EXPECT_THROW(judge({s}, {s}, 1.5), ConfigError);
}

TEST(Judge, UnknownAllocationWarns) {
    auto a = summary("A", 1, 0.1, 5, 0.9, 1.1, 0);
    a.allocation_known = false;
    auto r = judge({a}, {a});
    EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(Judge, FixtureSummaries) {
    auto dir = testing_support::fixtures() / "minirepo" / "summaries";
    auto base = load_summary((dir / "baseline.csv").string());
    EXPECT_TRUE(judge(base, load_summary((dir / "faster.csv").string())).overall_improved);
    EXPECT_FALSE(judge(base, load_summary((dir / "identity.csv").string())).overall_improved);
}

// ---- parsing --------------------------------------------------------------------------------

TEST(Parse, ExampleRow) {
    auto s = parse_summary("Method;Mean;StdDev;Iterations;Q1;Q3;Allocated\nSort;10.2 ms;0.5 ms;20;9.9 ms;10.6 ms;1.2 KB\n");
    ASSERT_EQ(s.size(), 1u);
    EXPECT_EQ(s[0].benchmark_name, "Sort");
    EXPECT_NEAR(s[0].mean, 0.0102, 1e-15);
    EXPECT_NEAR(s[0].stddev, 0.0005, 1e-15);
    EXPECT_EQ(s[0].n, 20u);
    EXPECT_NEAR(s[0].q1, 0.0099, 1e-15);
    EXPECT_EQ(s[0].allocated_bytes, 1228u);
}

TEST(Parse, Units) {
    auto s = parse_summary(
        "Method,Mean,StdDev,Iterations,Q1,Q3,Allocated\n"
        "A,5 ns,1 ns,3,4 ns,6 ns,10 B\nB,2 \xC2\xB5s,1 us,3,1 us,3 us,1 MB\nC,1.5 s,0.1 s,3,1.4 s,1.6 s,-\n");
    ASSERT_EQ(s.size(), 3u);
    EXPECT_NEAR(s[0].mean, 5e-9, 1e-20);
    EXPECT_NEAR(s[1].mean, 2e-6, 1e-18);
    EXPECT_EQ(s[1].allocated_bytes, 1024u * 1024u);
    EXPECT_FALSE(s[2].allocation_known);
    EXPECT_EQ(parse_summary("Method;Mean;StdDev;Iterations;Q1;Q3;Allocated\nA;1 s;0 s;2;1 s;1 s;1 KB\n", "x", {1000})[0]
                  .allocated_bytes,
              1000u);
    EXPECT_THROW(parse_summary("Method;Mean;StdDev;Iterations;Q1;Q3;Allocated\nA;1 fortnight;0 s;2;1 s;1 s;1 KB\n"),
                 UnitError);
    EXPECT_THROW(parse_summary("Method;Mean;StdDev;Iterations;Q1;Q3;Allocated\nA;1 s;0 s;2;1 s;1 s;1 GiB\n"), UnitError);
}

TEST(Parse, MissingColumnIsNamed) {
    try {
        parse_summary("Method;Mean;StdDev;Iterations;Q1;Q3\nSort;10.2 ms;0.5 ms;20;9.9 ms;10.6 ms\n");
        FAIL();
    } catch (const SchemaError& e) {
        EXPECT_NE(std::string(e.what()).find("Allocated"), std::string::npos);
    }
}

TEST(Parse, DuplicateNames) {
    EXPECT_THROW(parse_summary("Method;Mean;StdDev;Iterations;Q1;Q3;Allocated\n"
                               "A;1 s;0 s;2;1 s;1 s;1 B\nA;1 s;0 s;2;1 s;1 s;1 B\n"),
                 SchemaError);
}

TEST(Parse, BadCells) {
    const std::string h = "Method;Mean;StdDev;Iterations;Q1;Q3;Allocated\n";
    EXPECT_THROW(parse_summary(h + "A;fast;0 s;2;1 s;1 s;1 B\n"), SchemaError);
    EXPECT_THROW(parse_summary(h + "A;1 s;0 s;1;1 s;1 s;1 B\n"), SchemaError);
    EXPECT_THROW(parse_summary(h + "A;1 s;0 s;2;2 s;1 s;1 B\n"), SchemaError);
    EXPECT_THROW(parse_summary(h + "A;1 s;0 s\n"), SchemaError);
    EXPECT_THROW(parse_summary(""), SchemaError);
}

TEST(Parse, JsonMatchesCsv) {
    auto csv = parse_summary("Method;Mean;StdDev;Iterations;Q1;Q3;Allocated\nSort;10.2 ms;0.5 ms;20;9.9 ms;10.6 ms;1.2 KB\n");
    auto js = parse_summary(R"({"benchmarks": [{"Method": "Sort", "Mean": "10.2 ms", "StdDev": 0.0005,
        "Iterations": 20, "Q1": "9.9 ms", "Q3": "10.6 ms", "Allocated": "1.2 KB"}]})");
    ASSERT_EQ(js.size(), 1u);
    EXPECT_EQ(util::json(js).dump(), util::json(csv).dump());
    EXPECT_THROW(parse_summary("[{\"Method\": \"A\"}]"), SchemaError);
    EXPECT_THROW(parse_summary("[1, 2"), SchemaError);
}
