#pragma once

// Human-readable and JSON reports over pipeline artifacts.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "perfpatch/bench_stats.hpp"
#include "perfpatch/eval_metrics.hpp"
#include "perfpatch/patch_validator.hpp"
#include "perfpatch/util/jsonl.hpp"

namespace perfpatch {

/// Benchmark outcome of one validated suggestion.
struct BenchRecord {
    std::string suggestion_id;
    std::string example_id;
    std::string method;  // Class.signature of the focal method
    JudgeResult result;
};

inline void to_json(util::json& j, const BenchRecord& r) {
    j = util::json{{"suggestion_id", r.suggestion_id}, {"example_id", r.example_id}, {"method", r.method},
                   {"result", r.result}};
}
inline void from_json(const util::json& j, BenchRecord& r) {
    j.at("suggestion_id").get_to(r.suggestion_id);
    r.example_id = j.value("example_id", std::string());
    r.method = j.value("method", std::string());
    if (j.contains("result")) r.result = j["result"].get<JudgeResult>();
}

struct ReportRow {
    std::string label;
    std::size_t count = 0;
    double percent = 0.0;
};

struct Improvement {
    std::string suggestion_id;
    std::string method;
    double duration_change_pct = 0.0;  // best benchmark, positive = faster
    double memory_change_pct = 0.0;    // best benchmark, positive = fewer bytes
};

struct Report {
    std::vector<ReportRow> funnel;      // four stages, then Total
    std::vector<ReportRow> categories;  // five categories, then Total
    std::optional<MetricReport> metrics;
    std::size_t benchmarked = 0;
    std::vector<Improvement> improvements;
};

namespace detail {

inline double percent(std::size_t part, std::size_t whole) {
    return whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

}  // namespace detail

inline Report build_report(const std::vector<ValidationVerdict>& verdicts, const std::optional<MetricReport>& metrics,
                           const std::vector<BenchRecord>& bench) {
    Report r;
    FunnelSummary f = summarize(verdicts);
    for (const auto& [stage, n] : f.stages) r.funnel.push_back({to_string(stage), n, detail::percent(n, f.total)});
    r.funnel.push_back({"Total", f.total, f.total ? 100.0 : 0.0});
    std::size_t compile_errors = f.stages[Stage::CompilationError];
    for (const auto& [cat, n] : f.categories) r.categories.push_back({to_string(cat), n, detail::percent(n, compile_errors)});
    r.categories.push_back({"Total", compile_errors, compile_errors ? 100.0 : 0.0});
    r.metrics = metrics;
    r.benchmarked = bench.size();
    for (const auto& b : bench) {
        if (!b.result.overall_improved) continue;
        Improvement imp{b.suggestion_id, b.method, 0.0, 0.0};
        for (const auto& v : b.result.benchmarks) {
            if (v.duration_improved) imp.duration_change_pct = std::max(imp.duration_change_pct, v.duration_change_pct);
            if (v.memory_improved) imp.memory_change_pct = std::max(imp.memory_change_pct, v.memory_change_pct);
        }
        r.improvements.push_back(std::move(imp));
    }
    return r;
}

inline void to_json(util::json& j, const ReportRow& r) {
    j = util::json{{"label", r.label}, {"count", r.count}, {"percent", r.percent}};
}
inline void to_json(util::json& j, const Improvement& i) {
    j = util::json{{"suggestion_id", i.suggestion_id}, {"method", i.method},
                   {"duration_change_pct", i.duration_change_pct}, {"memory_change_pct", i.memory_change_pct}};
}
inline void to_json(util::json& j, const Report& r) {
    j = util::json{{"funnel", r.funnel}, {"compile_errors", r.categories}, {"benchmarked", r.benchmarked},
                   {"improvements", r.improvements}};
    j["metrics"] = r.metrics ? util::json(*r.metrics) : util::json(nullptr);
    if (r.metrics) j["metrics"].erase("per_example");
}

inline std::string render_text(const Report& r) {
    std::ostringstream out;
    char buf[256];
    auto table = [&](const char* title, const char* head, const std::vector<ReportRow>& rows) {
        out << title << "\n";
        std::snprintf(buf, sizeof buf, "  %-22s %8s %8s\n", head, "Count", "%");
        out << buf;
        for (const auto& row : rows) {
            std::snprintf(buf, sizeof buf, "  %-22s %8zu %8.1f\n", row.label.c_str(), row.count, row.percent);
            out << buf;
        }
        out << "\n";
    };
    table("Unit test funnel", "Stage", r.funnel);
    table("Compilation errors (first error per suggestion)", "Category", r.categories);

    out << "Metrics\n";
    if (r.metrics) {
        const auto& m = *r.metrics;
        std::snprintf(buf, sizeof buf, "  %-22s %8zu\n", "Examples", m.examples);
        out << buf;
        std::snprintf(buf, sizeof buf, "  %-22s %8.1f\n", "Verbatim match %", m.verbatim_pct);
        out << buf;
        std::snprintf(buf, sizeof buf, "  %-22s %8.1f\n", "Abstracted match %", m.abstracted_pct);
        out << buf;
        std::snprintf(buf, sizeof buf, "  %-22s %8.3f\n", "CodeBLEU (mean)", m.codebleu_mean);
        out << buf;
        for (const auto& [k, v] : m.topk_accuracy) {
            std::snprintf(buf, sizeof buf, "  Top-%-18zu %8.1f\n", k, v);
            out << buf;
        }
    } else {
        out << "  (no evaluation)\n";
    }
    out << "\n";

    std::snprintf(buf, sizeof buf, "Benchmark improvements (%zu of %zu benchmarked)\n", r.improvements.size(), r.benchmarked);
    out << buf;
    for (const auto& i : r.improvements) {
        std::snprintf(buf, sizeof buf, "  %-40s time %+6.1f%%  alloc %+6.1f%%\n", i.method.c_str(), i.duration_change_pct,
                      i.memory_change_pct);
        out << buf;
    }
    return out.str();
}

/// Reads verdicts.jsonl, metrics.json and bench.jsonl from `dir`; absent
/// files give empty sections.
inline Report load_report(const std::filesystem::path& dir) {
    std::vector<ValidationVerdict> verdicts;
    std::optional<MetricReport> metrics;
    std::vector<BenchRecord> bench;
    if (std::filesystem::exists(dir / "verdicts.jsonl")) verdicts = util::read_jsonl<ValidationVerdict>(dir / "verdicts.jsonl");
    if (std::filesystem::exists(dir / "metrics.json"))
        metrics = util::json::parse(util::read_file(dir / "metrics.json")).get<MetricReport>();
    if (std::filesystem::exists(dir / "bench.jsonl")) bench = util::read_jsonl<BenchRecord>(dir / "bench.jsonl");
    return build_report(verdicts, metrics, bench);
}

}  // namespace perfpatch
