#pragma once

// Benchmark summaries and the improvement decision: one-tailed Welch test
// plus Tukey-fence separation on durations, strict comparison on
// allocations, and no regression on either axis.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "perfpatch/error.hpp"
#include "perfpatch/util/jsonl.hpp"
#include "perfpatch/util/text.hpp"

namespace perfpatch {

// ---- Student-t ------------------------------------------------------------------------------

namespace detail {

// Continued fraction for the incomplete beta function, modified Lentz.
inline double betacf(double a, double b, double x) {
    constexpr int max_iter = 500;
    constexpr double eps = 1e-15;
    constexpr double tiny = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) return h;
    }
    return h;  // converged to within double noise for every df we meet
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b), a, b > 0, x in [0, 1].
inline double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    double front = std::exp(ln_front);
    // the fraction converges fast only on this side of the mean
    if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::betacf(a, b, x) / a;
    return 1.0 - front * detail::betacf(b, a, 1.0 - x) / b;
}

/// P(T > t) for Student-t with `df` > 0 degrees of freedom.
inline double student_t_upper(double t, double df) {
    if (std::isnan(t) || !(df > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
    double tail = 0.5 * incomplete_beta(df / 2.0, 0.5, df / (df + t * t));
    return t >= 0 ? tail : 1.0 - tail;
}

/// t with P(T > t) = alpha, by bisection on the monotone tail.
inline double student_t_critical(double alpha, double df) {
    if (!(alpha > 0.0 && alpha < 1.0) || !(df > 0.0)) throw ConfigError("critical value needs 0 < alpha < 1 and df > 0");
    double lo = -1.0, hi = 1.0;
    while (student_t_upper(lo, df) < alpha) lo *= 2.0;
    while (student_t_upper(hi, df) > alpha) hi *= 2.0;
    for (int i = 0; i < 200 && hi - lo > 1e-12 * std::max(1.0, std::fabs(hi)); ++i) {
        double mid = 0.5 * (lo + hi);
        (student_t_upper(mid, df) > alpha ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// ---- Welch / Tukey / memory --------------------------------------------------------------------

struct SampleStats {
    double mean = 0.0;
    double sd = 0.0;
    std::size_t n = 0;
};

struct WelchResult {
    double t = 0.0;
    double df = 0.0;
    double p = 0.5;
    bool reject = false;
};

/// H1: candidate mean < baseline mean. With both sds zero the decision is
/// the plain mean comparison and p is 0 or 1.
inline WelchResult welch_one_tailed(const SampleStats& base, const SampleStats& cand, double alpha = 0.05) {
    if (base.n < 2 || cand.n < 2) throw DegenerateSample("Welch test needs n >= 2 on both sides");
    if (base.sd < 0 || cand.sd < 0 || std::isnan(base.sd) || std::isnan(cand.sd))
        throw DegenerateSample("standard deviation must be non-negative");
    double nb = static_cast<double>(base.n), nc = static_cast<double>(cand.n);
    double vb = base.sd * base.sd / nb, vc = cand.sd * cand.sd / nc;
    WelchResult r;
    if (vb + vc == 0.0) {
        r.df = nb + nc - 2.0;
        r.t = cand.mean < base.mean ? std::numeric_limits<double>::infinity()
              : cand.mean > base.mean ? -std::numeric_limits<double>::infinity()
                                      : 0.0;
        r.p = cand.mean < base.mean ? 0.0 : 1.0;
        r.reject = cand.mean < base.mean;
        return r;
    }
    r.t = (base.mean - cand.mean) / std::sqrt(vb + vc);
    r.df = (vb + vc) * (vb + vc) / (vb * vb / (nb - 1.0) + vc * vc / (nc - 1.0));
    r.p = student_t_upper(r.t, r.df);
    r.reject = r.p < alpha;
    return r;
}

struct Quartiles {
    double q1 = 0.0;
    double q3 = 0.0;
    double lower_fence() const { return q1 - 1.5 * (q3 - q1); }
    double upper_fence() const { return q3 + 1.5 * (q3 - q1); }
};

/// Candidate's upper fence strictly below the baseline's lower fence.
inline bool tukey_separated(const Quartiles& base, const Quartiles& cand) {
    return cand.upper_fence() < base.lower_fence();
}

enum class MemoryChange { Improved, Regressed, Equal };

inline const char* to_string(MemoryChange m) {
    switch (m) {
        case MemoryChange::Improved: return "improved";
        case MemoryChange::Regressed: return "regressed";
        default: return "equal";
    }
}

inline MemoryChange compare_memory(std::uint64_t base_alloc, std::uint64_t cand_alloc) {
    if (cand_alloc < base_alloc) return MemoryChange::Improved;
    if (cand_alloc > base_alloc) return MemoryChange::Regressed;
    return MemoryChange::Equal;
}

// ---- summaries ----------------------------------------------------------------------------------

struct BenchmarkSummary {
    std::string benchmark_name;
    double mean = 0.0;    // seconds
    double stddev = 0.0;  // seconds
    std::size_t n = 0;
    double q1 = 0.0;  // seconds
    double q3 = 0.0;  // seconds
    std::uint64_t allocated_bytes = 0;
    bool allocation_known = true;  // false when the harness printed "-"

    SampleStats stats() const { return {mean, stddev, n}; }
    Quartiles quartiles() const { return {q1, q3}; }
};

inline void to_json(util::json& j, const BenchmarkSummary& s) {
    j = util::json{{"Method", s.benchmark_name}, {"Mean", s.mean}, {"StdDev", s.stddev}, {"Iterations", s.n},
                   {"Q1", s.q1},                 {"Q3", s.q3}};
    j["Allocated"] = s.allocation_known ? util::json(s.allocated_bytes) : util::json("-");
}

struct UnitOptions {
    double kilo = 1024.0;  // bytes per KB; MB = kilo * kilo
};

namespace detail {

inline std::pair<double, std::string> split_quantity(std::string_view cell, const std::string& where) {
    std::string s;
    for (char c : cell)
        if (c != ',' && c != ' ') s += c;  // thousands separators and the number/unit gap
    std::size_t i = 0;
    while (i < s.size() && (std::isdigit(static_cast<unsigned char>(s[i])) || s[i] == '.' || s[i] == '-' ||
                            s[i] == '+' || s[i] == 'e' || s[i] == 'E')) {
        // an 'e' only belongs to the number when digits follow
        if ((s[i] == 'e' || s[i] == 'E') &&
            !(i + 1 < s.size() && (std::isdigit(static_cast<unsigned char>(s[i + 1])) || s[i + 1] == '-' || s[i + 1] == '+')))
            break;
        ++i;
    }
    std::string num = s.substr(0, i);
    double v = 0.0;
    try {
        std::size_t used = 0;
        v = std::stod(num, &used);
        if (used != num.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
        throw SchemaError(where + ": not a number: '" + std::string(cell) + "'");
    }
    if (!std::isfinite(v)) throw SchemaError(where + ": not finite: '" + std::string(cell) + "'");
    return {v, s.substr(i)};
}

inline double parse_duration(std::string_view cell, const std::string& where) {
    auto [v, unit] = split_quantity(cell, where);
    if (unit == "ns") return v * 1e-9;
    if (unit == "us" || unit == "\xC2\xB5s" || unit == "\xCE\xBCs") return v * 1e-6;
    if (unit == "ms") return v * 1e-3;
    if (unit == "s") return v;
    throw UnitError(where + ": unknown duration unit '" + unit + "'");
}

inline std::optional<std::uint64_t> parse_bytes(std::string_view cell, const std::string& where, const UnitOptions& u) {
    std::string t = util::trim(cell);
    if (t == "-" || t == "NA" || t.empty()) return std::nullopt;
    auto [v, unit] = split_quantity(t, where);
    double mult = 0.0;
    if (unit == "B") mult = 1.0;
    else if (unit == "KB") mult = u.kilo;
    else if (unit == "MB") mult = u.kilo * u.kilo;
    else throw UnitError(where + ": unknown size unit '" + unit + "'");
    if (v < 0) throw SchemaError(where + ": negative allocation");
    // partial bytes are display rounding; truncate toward zero
    return static_cast<std::uint64_t>(std::floor(v * mult + 1e-9));
}

inline std::size_t parse_count(std::string_view cell, const std::string& where) {
    auto [v, unit] = split_quantity(cell, where);
    if (!unit.empty() || v < 0 || v != std::floor(v)) throw SchemaError(where + ": not a count: '" + std::string(cell) + "'");
    return static_cast<std::size_t>(v);
}

inline void check_summary(const BenchmarkSummary& s, const std::string& where) {
    if (s.n < 2) throw SchemaError(where + ": column 'Iterations': need at least 2");
    if (s.stddev < 0) throw SchemaError(where + ": column 'StdDev': negative");
    if (s.q1 > s.q3) throw SchemaError(where + ": columns 'Q1'/'Q3': Q1 exceeds Q3");
}

inline const std::vector<std::string>& summary_columns() {
    static const std::vector<std::string> cols{"Mean", "StdDev", "Iterations", "Q1", "Q3", "Allocated"};
    return cols;
}

inline std::vector<BenchmarkSummary> parse_summary_csv(std::string_view text, const std::string& origin, const UnitOptions& u) {
    std::vector<BenchmarkSummary> out;
    std::map<std::string, std::size_t> col;
    char sep = ';';
    std::size_t row = 0;
    for (const auto& raw : util::split_lines(text)) {
        ++row;
        std::string line = util::trim(raw);
        if (line.empty()) continue;
        if (col.empty()) {
            if (line.find(';') == std::string::npos && line.find(',') != std::string::npos) sep = ',';
            auto cells = util::split(line, sep);
            for (std::size_t i = 0; i < cells.size(); ++i) col[util::trim(cells[i])] = i;
            if (!col.count("Method") && col.count("Benchmark")) col["Method"] = col["Benchmark"];
            if (!col.count("Method")) throw SchemaError(origin + ":" + std::to_string(row) + ": missing column 'Method'");
            for (const auto& c : summary_columns())
                if (!col.count(c)) throw SchemaError(origin + ":" + std::to_string(row) + ": missing column '" + c + "'");
            continue;
        }
        auto cells = util::split(line, sep);
        auto cell = [&](const std::string& name) -> std::string {
            std::size_t i = col.at(name);
            if (i >= cells.size())
                throw SchemaError(origin + ":" + std::to_string(row) + ": column '" + name + "': missing value");
            return util::trim(cells[i]);
        };
        auto where = [&](const std::string& name) { return origin + ":" + std::to_string(row) + ": column '" + name + "'"; };
        BenchmarkSummary s;
        s.benchmark_name = cell("Method");
        if (s.benchmark_name.empty()) throw SchemaError(where("Method") + ": empty name");
        s.mean = parse_duration(cell("Mean"), where("Mean"));
        s.stddev = parse_duration(cell("StdDev"), where("StdDev"));
        s.n = parse_count(cell("Iterations"), where("Iterations"));
        s.q1 = parse_duration(cell("Q1"), where("Q1"));
        s.q3 = parse_duration(cell("Q3"), where("Q3"));
        auto alloc = parse_bytes(cell("Allocated"), where("Allocated"), u);
        s.allocation_known = alloc.has_value();
        s.allocated_bytes = alloc.value_or(0);
        check_summary(s, origin + ":" + std::to_string(row));
        out.push_back(std::move(s));
    }
    if (col.empty()) throw SchemaError(origin + ": empty summary");
    return out;
}

// JSON cells are strings with units, or bare numbers already in seconds/bytes.
inline std::vector<BenchmarkSummary> parse_summary_json(std::string_view text, const std::string& origin, const UnitOptions& u) {
    util::json j;
    try {
        j = util::json::parse(text);
    } catch (const util::json::exception& e) {
        throw SchemaError(origin + ": invalid JSON: " + e.what());
    }
    if (j.is_object() && j.contains("benchmarks")) j = j["benchmarks"];
    if (!j.is_array()) throw SchemaError(origin + ": expected an array of benchmarks");
    std::vector<BenchmarkSummary> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& b = j[i];
        std::string at = origin + ":" + std::to_string(i + 1);
        if (!b.is_object()) throw SchemaError(at + ": benchmark entry is not an object");
        auto where = [&](const std::string& name) { return at + ": column '" + name + "'"; };
        auto need = [&](const std::string& name) -> const util::json& {
            if (!b.contains(name)) throw SchemaError(at + ": missing column '" + name + "'");
            return b[name];
        };
        auto duration = [&](const std::string& name) {
            const auto& v = need(name);
            if (v.is_number()) return v.get<double>();
            if (v.is_string()) return parse_duration(v.get<std::string>(), where(name));
            throw SchemaError(where(name) + ": expected number or string");
        };
        BenchmarkSummary s;
        const util::json* name = b.contains("Method") ? &b["Method"] : b.contains("Benchmark") ? &b["Benchmark"] : nullptr;
        if (!name || !name->is_string()) throw SchemaError(at + ": missing column 'Method'");
        s.benchmark_name = name->get<std::string>();
        s.mean = duration("Mean");
        s.stddev = duration("StdDev");
        const auto& it = need("Iterations");
        if (it.is_number_unsigned() || (it.is_number_integer() && it.get<long long>() >= 0)) s.n = it.get<std::size_t>();
        else if (it.is_string()) s.n = parse_count(it.get<std::string>(), where("Iterations"));
        else throw SchemaError(where("Iterations") + ": not a count");
        s.q1 = duration("Q1");
        s.q3 = duration("Q3");
        const auto& al = need("Allocated");
        std::optional<std::uint64_t> alloc;
        if (al.is_number()) {
            if (al.get<double>() < 0) throw SchemaError(where("Allocated") + ": negative allocation");
            alloc = static_cast<std::uint64_t>(al.get<double>());
        } else if (al.is_string()) {
            alloc = parse_bytes(al.get<std::string>(), where("Allocated"), u);
        } else if (!al.is_null()) {
            throw SchemaError(where("Allocated") + ": expected number or string");
        }
        s.allocation_known = alloc.has_value();
        s.allocated_bytes = alloc.value_or(0);
        check_summary(s, at);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace detail

/// Parses a summary report, CSV (`;` or `,` separated) or JSON, detected by
/// the first non-blank character. Durations come back in seconds and
/// allocations in bytes. Throws SchemaError (with row and column) and
/// UnitError.
inline std::vector<BenchmarkSummary> parse_summary(std::string_view text, const std::string& origin = "<summary>",
                                                   const UnitOptions& units = {}) {
    auto first = text.find_first_not_of(" \t\r\n");
    std::vector<BenchmarkSummary> out;
    if (first != std::string_view::npos && (text[first] == '{' || text[first] == '['))
        out = detail::parse_summary_json(text, origin, units);
    else
        out = detail::parse_summary_csv(text, origin, units);
    std::set<std::string> seen;
    for (const auto& s : out)
        if (!seen.insert(s.benchmark_name).second) throw SchemaError(origin + ": duplicate benchmark '" + s.benchmark_name + "'");
    return out;
}

inline std::vector<BenchmarkSummary> load_summary(const std::string& path, const UnitOptions& units = {}) {
    return parse_summary(util::read_file(path), path, units);
}

// ---- judging --------------------------------------------------------------------------------------

struct PerfVerdict {
    std::string benchmark_name;
    bool duration_improved = false;
    bool memory_improved = false;
    bool duration_regressed = false;
    bool memory_regressed = false;
    double t_stat = 0.0;
    double df = 0.0;
    double p_value = 0.5;
    double suggestion_upper_fence = 0.0;
    double baseline_lower_fence = 0.0;
    double duration_change_pct = 0.0;  // positive = faster
    double memory_change_pct = 0.0;    // positive = fewer bytes

    bool improved() const {
        return (duration_improved || memory_improved) && !duration_regressed && !memory_regressed;
    }
};

struct JudgeResult {
    std::vector<PerfVerdict> benchmarks;
    bool overall_improved = false;
    std::vector<std::string> warnings;
};

inline void to_json(util::json& j, const PerfVerdict& v) {
    j = util::json{{"benchmark", v.benchmark_name},
                   {"duration_improved", v.duration_improved},
                   {"memory_improved", v.memory_improved},
                   {"duration_regressed", v.duration_regressed},
                   {"memory_regressed", v.memory_regressed},
                   {"improved", v.improved()},
                   {"t_stat", std::isfinite(v.t_stat) ? util::json(v.t_stat) : util::json(v.t_stat > 0 ? "inf" : "-inf")},
                   {"df", v.df},
                   {"p_value", v.p_value},
                   {"fences", {{"suggestion_upper", v.suggestion_upper_fence}, {"baseline_lower", v.baseline_lower_fence}}},
                   {"duration_change_pct", v.duration_change_pct},
                   {"memory_change_pct", v.memory_change_pct}};
}
inline void from_json(const util::json& j, PerfVerdict& v) {
    v.benchmark_name = j.value("benchmark", std::string());
    v.duration_improved = j.value("duration_improved", false);
    v.memory_improved = j.value("memory_improved", false);
    v.duration_regressed = j.value("duration_regressed", false);
    v.memory_regressed = j.value("memory_regressed", false);
    if (j.contains("t_stat") && j["t_stat"].is_number()) v.t_stat = j["t_stat"].get<double>();
    v.df = j.value("df", 0.0);
    v.p_value = j.value("p_value", 0.5);
    if (j.contains("fences")) {
        v.suggestion_upper_fence = j["fences"].value("suggestion_upper", 0.0);
        v.baseline_lower_fence = j["fences"].value("baseline_lower", 0.0);
    }
    v.duration_change_pct = j.value("duration_change_pct", 0.0);
    v.memory_change_pct = j.value("memory_change_pct", 0.0);
}
inline void to_json(util::json& j, const JudgeResult& r) {
    j = util::json{{"benchmarks", r.benchmarks}, {"overall_improved", r.overall_improved}, {"warnings", r.warnings}};
}
inline void from_json(const util::json& j, JudgeResult& r) {
    r.benchmarks = j.value("benchmarks", std::vector<PerfVerdict>{});
    r.overall_improved = j.value("overall_improved", false);
    r.warnings = j.value("warnings", std::vector<std::string>{});
}

inline PerfVerdict judge_one(const BenchmarkSummary& base, const BenchmarkSummary& cand, double alpha) {
    PerfVerdict v;
    v.benchmark_name = base.benchmark_name;
    auto faster = welch_one_tailed(base.stats(), cand.stats(), alpha);
    auto slower = welch_one_tailed(cand.stats(), base.stats(), alpha);
    v.t_stat = faster.t;
    v.df = faster.df;
    v.p_value = faster.p;
    v.suggestion_upper_fence = cand.quartiles().upper_fence();
    v.baseline_lower_fence = base.quartiles().lower_fence();
    v.duration_improved = faster.reject && tukey_separated(base.quartiles(), cand.quartiles());
    v.duration_regressed = slower.reject;
    if (base.allocation_known && cand.allocation_known) {
        auto m = compare_memory(base.allocated_bytes, cand.allocated_bytes);
        v.memory_improved = m == MemoryChange::Improved;
        v.memory_regressed = m == MemoryChange::Regressed;
        if (base.allocated_bytes > 0)
            v.memory_change_pct = 100.0 * (static_cast<double>(base.allocated_bytes) - static_cast<double>(cand.allocated_bytes)) /
                                  static_cast<double>(base.allocated_bytes);
    }
    if (base.mean > 0) v.duration_change_pct = 100.0 * (base.mean - cand.mean) / base.mean;
    return v;
}

/// Per-benchmark verdicts in baseline order. Both runs must name the same
/// benchmarks; otherwise BenchmarkNameMismatch lists the differences.
inline JudgeResult judge(const std::vector<BenchmarkSummary>& baseline, const std::vector<BenchmarkSummary>& candidate,
                         double alpha = 0.05) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    std::map<std::string, const BenchmarkSummary*> cand;
    for (const auto& c : candidate) cand[c.benchmark_name] = &c;
    std::set<std::string> base_names;
    for (const auto& b : baseline) base_names.insert(b.benchmark_name);
    std::vector<std::string> missing, extra;
    for (const auto& b : baseline)
        if (!cand.count(b.benchmark_name)) missing.push_back(b.benchmark_name);
    for (const auto& c : candidate)
        if (!base_names.count(c.benchmark_name)) extra.push_back(c.benchmark_name);
    if (!missing.empty() || !extra.empty()) {
        std::string msg = "benchmark names differ between runs";
        if (!missing.empty()) msg += "; missing in candidate: " + util::join(missing, ", ");
        if (!extra.empty()) msg += "; only in candidate: " + util::join(extra, ", ");
        throw BenchmarkNameMismatch(msg);
    }

    JudgeResult r;
    bool any_improved = false, any_regressed = false;
    for (const auto& b : baseline) {
        const auto& c = *cand[b.benchmark_name];
        if (!b.allocation_known || !c.allocation_known)
            r.warnings.push_back(b.benchmark_name + ": allocation not reported; memory treated as unchanged");
        auto v = judge_one(b, c, alpha);
        any_improved = any_improved || v.duration_improved || v.memory_improved;
        any_regressed = any_regressed || v.duration_regressed || v.memory_regressed;
        r.benchmarks.push_back(std::move(v));
    }
    r.overall_improved = any_improved && !any_regressed;
    return r;
}

}  // namespace perfpatch
