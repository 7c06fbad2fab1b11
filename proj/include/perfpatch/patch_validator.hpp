#pragma once

// Validation funnel: syntax -> splice -> compile -> unit tests. Each
// suggestion runs in its own copy of the repository tree.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <string>
#include <thread>
#include <unistd.h>
#include <vector>

#include "perfpatch/code_model.hpp"
#include "perfpatch/csharp/parser.hpp"
#include "perfpatch/error.hpp"
#include "perfpatch/example_builder.hpp"
#include "perfpatch/suggestion_engine.hpp"
#include "perfpatch/util/jsonl.hpp"
#include "perfpatch/util/kv_config.hpp"
#include "perfpatch/util/process.hpp"
#include "perfpatch/util/text.hpp"

namespace perfpatch {

namespace fs = std::filesystem;

// ---- verdict types -------------------------------------------------------------------------

enum class Stage { SyntaxError, CompilationError, FailedUnitTests, PassedUnitTests };
enum class ErrorCategory { UndefinedIdentifier, IncorrectArguments, IncorrectUsing, TypeMismatch, Other };

inline const char* to_string(Stage s) {
    switch (s) {
        case Stage::SyntaxError: return "SyntaxError";
        case Stage::CompilationError: return "CompilationError";
        case Stage::FailedUnitTests: return "FailedUnitTests";
        default: return "PassedUnitTests";
    }
}
inline const char* to_string(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::UndefinedIdentifier: return "UndefinedIdentifier";
        case ErrorCategory::IncorrectArguments: return "IncorrectArguments";
        case ErrorCategory::IncorrectUsing: return "IncorrectUsing";
        case ErrorCategory::TypeMismatch: return "TypeMismatch";
        default: return "Other";
    }
}
inline Stage stage_from_string(std::string_view s) {
    for (Stage st : {Stage::SyntaxError, Stage::CompilationError, Stage::FailedUnitTests, Stage::PassedUnitTests})
        if (s == to_string(st)) return st;
    throw SchemaError("unknown stage '" + std::string(s) + "'");
}
inline ErrorCategory category_from_string(std::string_view s) {
    for (ErrorCategory c : {ErrorCategory::UndefinedIdentifier, ErrorCategory::IncorrectArguments,
                            ErrorCategory::IncorrectUsing, ErrorCategory::TypeMismatch, ErrorCategory::Other})
        if (s == to_string(c)) return c;
    throw SchemaError("unknown error category '" + std::string(s) + "'");
}

/// error_category is set iff stage_reached == CompilationError.
struct ValidationVerdict {
    std::string suggestion_id;
    std::string example_id;
    Stage stage_reached = Stage::SyntaxError;
    std::optional<ErrorCategory> error_category;
    std::optional<std::string> first_error_code;
    std::string logs;
};

inline void to_json(util::json& j, const ValidationVerdict& v) {
    j = util::json{{"suggestion_id", v.suggestion_id}, {"example_id", v.example_id},
                   {"stage_reached", to_string(v.stage_reached)}, {"logs", v.logs}};
    j["error_category"] = v.error_category ? util::json(to_string(*v.error_category)) : util::json(nullptr);
    j["first_error_code"] = v.first_error_code ? util::json(*v.first_error_code) : util::json(nullptr);
}
inline void from_json(const util::json& j, ValidationVerdict& v) {
    j.at("suggestion_id").get_to(v.suggestion_id);
    v.example_id = j.value("example_id", std::string());
    v.stage_reached = stage_from_string(j.at("stage_reached").get<std::string>());
    v.error_category.reset();
    v.first_error_code.reset();
    if (j.contains("error_category") && !j["error_category"].is_null())
        v.error_category = category_from_string(j["error_category"].get<std::string>());
    if (j.contains("first_error_code") && !j["first_error_code"].is_null())
        v.first_error_code = j["first_error_code"].get<std::string>();
    v.logs = j.value("logs", std::string());
}

// ---- toolchain -------------------------------------------------------------------------------

/// Key-value file:
///   compile = <command with {tree}>      required
///   test = <command with {tree}>         required
///   bench = <command with {tree}>        optional
///   bench_output = <path in tree>        summary file; default: bench stdout
///   compile_timeout_s / test_timeout_s / bench_timeout_s   default 600
///   workers = <n>                        default 4
///   diagnostic_pattern = <regex>         group 1 is the diagnostic id
///   coverage_threshold = <0..1>          default 0.8
/// Relative paths in commands are resolved by the shell from the tree.
struct ToolchainConfig {
    std::string compile_command;
    std::string unit_test_command;
    std::string bench_command;
    std::string bench_output;
    std::chrono::milliseconds compile_timeout{600000};
    std::chrono::milliseconds test_timeout{600000};
    std::chrono::milliseconds bench_timeout{600000};
    std::size_t workers = 4;
    std::string diagnostic_pattern = R"(error\s+(CS\d{4}))";
    double coverage_threshold = 0.8;
    bool keep_trees = false;

    static constexpr const char* placeholder = "{tree}";

    void validate() const {
        auto need = [](const std::string& key, const std::string& cmd, bool required) {
            if (cmd.empty()) {
                if (required) throw ConfigError("toolchain: missing '" + key + "' command");
                return;
            }
            if (cmd.find(placeholder) == std::string::npos)
                throw ConfigError("toolchain: '" + key + "' command lacks the {tree} placeholder");
        };
        need("compile", compile_command, true);
        need("test", unit_test_command, true);
        need("bench", bench_command, false);
        if (workers == 0) throw ConfigError("toolchain: workers must be positive");
        if (!(coverage_threshold >= 0.0 && coverage_threshold <= 1.0))
            throw ConfigError("toolchain: coverage_threshold must lie in [0, 1]");
        try {
            std::regex re(diagnostic_pattern);
        } catch (const std::regex_error& e) {
            throw ConfigError(std::string("toolchain: bad diagnostic_pattern: ") + e.what());
        }
    }

    static ToolchainConfig from_kv(const util::KeyValueConfig& kv) {
        ToolchainConfig t;
        t.compile_command = kv.get_or("compile", "");
        t.unit_test_command = kv.get_or("test", "");
        t.bench_command = kv.get_or("bench", "");
        t.bench_output = kv.get_or("bench_output", "");
        auto secs = [&](const char* key, std::chrono::milliseconds def) {
            double s = kv.get_real(key, static_cast<double>(def.count()) / 1000.0);
            if (!(s > 0)) throw ConfigError(std::string("toolchain: ") + key + " must be positive");
            return std::chrono::milliseconds(static_cast<long long>(s * 1000.0));
        };
        t.compile_timeout = secs("compile_timeout_s", t.compile_timeout);
        t.test_timeout = secs("test_timeout_s", t.test_timeout);
        t.bench_timeout = secs("bench_timeout_s", t.bench_timeout);
        long w = kv.get_int("workers", static_cast<long>(t.workers));
        if (w < 1) throw ConfigError("toolchain: workers must be positive");
        t.workers = static_cast<std::size_t>(w);
        t.diagnostic_pattern = kv.get_or("diagnostic_pattern", t.diagnostic_pattern);
        t.coverage_threshold = kv.get_real("coverage_threshold", t.coverage_threshold);
        t.keep_trees = kv.get_or("keep_trees", "false") == "true";
        t.validate();
        return t;
    }

    static ToolchainConfig load(const fs::path& path) { return from_kv(util::KeyValueConfig::load(path)); }
};

// ---- stages ------------------------------------------------------------------------------------

inline ErrorCategory categorize_compile_error(std::string_view code) {
    static const std::map<std::string, ErrorCategory, std::less<>> table{
        {"CS1061", ErrorCategory::UndefinedIdentifier}, {"CS0117", ErrorCategory::UndefinedIdentifier},
        {"CS0246", ErrorCategory::UndefinedIdentifier}, {"CS0103", ErrorCategory::UndefinedIdentifier},
        {"CS1579", ErrorCategory::UndefinedIdentifier}, {"CS1503", ErrorCategory::IncorrectArguments},
        {"CS1501", ErrorCategory::IncorrectArguments},  {"CS1729", ErrorCategory::IncorrectArguments},
        {"CS7036", ErrorCategory::IncorrectArguments},  {"CS0305", ErrorCategory::IncorrectArguments},
        {"CS0029", ErrorCategory::IncorrectArguments},  {"CS0019", ErrorCategory::IncorrectArguments},
        {"CS0234", ErrorCategory::IncorrectUsing},      {"CS0266", ErrorCategory::TypeMismatch},
        {"CS0738", ErrorCategory::TypeMismatch},        {"CS0508", ErrorCategory::TypeMismatch},
    };
    auto it = table.find(code);
    return it == table.end() ? ErrorCategory::Other : it->second;
}

/// First diagnostic id in compiler output, scanning in output order.
inline std::optional<std::string> first_diagnostic(std::string_view output, const std::string& pattern) {
    std::regex re(pattern);
    std::string text(output);
    std::smatch m;
    if (!std::regex_search(text, m, re)) return std::nullopt;
    return m.size() > 1 && m[1].matched ? m[1].str() : m[0].str();
}

/// A patch passes the syntax stage when it is non-empty, parses in strict
/// patch mode and contains at least one method.
inline bool check_syntax(std::string_view suggestion) {
    if (util::trim_view(csharp::strip_comments(suggestion)).empty()) return false;
    try {
        SourceUnit u = parse_fragment(suggestion);
        return !u.classes.empty() && !u.classes.front().methods.empty();
    } catch (const UnparseableFile&) {
        return false;
    }
}

struct StageResult {
    int exit_status = 0;
    std::string output;
    std::chrono::milliseconds duration{0};
};

inline std::string expand_template(const std::string& tmpl, const fs::path& tree) {
    return util::replace_all(tmpl, ToolchainConfig::placeholder, util::shell_quote(tree.string()));
}

/// Runs a command template inside `tree`. Throws StageTimeout and
/// CommandNotFound (shell status 127).
inline StageResult run_stage(const fs::path& tree, const std::string& command_template, std::chrono::milliseconds timeout) {
    if (!fs::is_directory(tree)) throw IoError("stage tree does not exist: " + tree.string());
    util::ProcessOptions opt;
    opt.working_dir = tree;
    opt.timeout = timeout;
    auto start = std::chrono::steady_clock::now();
    auto res = util::run_shell(expand_template(command_template, tree), opt);
    StageResult r;
    r.duration = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    r.exit_status = res.exit_status;
    r.output = std::move(res.output);
    if (res.timed_out)
        throw StageTimeout("command exceeded " + std::to_string(timeout.count()) + " ms: " + command_template);
    if (res.exit_status == 127) throw CommandNotFound("command not found: " + command_template);
    return r;
}

// ---- splicing ---------------------------------------------------------------------------------

namespace detail {

struct Splice {
    std::size_t begin = 0;
    std::size_t end = 0;  // == begin for insertions
    std::string text;
};

inline std::size_t line_start(std::string_view s, std::size_t pos) {
    while (pos > 0 && s[pos - 1] != '\n') --pos;
    return pos;
}

inline std::string indentation_at(std::string_view s, std::size_t pos) {
    std::size_t ls = line_start(s, pos);
    std::string ind(s.substr(ls, pos - ls));
    for (char c : ind)
        if (c != ' ' && c != '\t') return {};
    return ind;
}

// Declaration text re-indented for a span whose first line already carries `ind`.
inline std::string reindent_inline(const std::string& text, const std::string& ind) {
    std::string out = util::indent(text, ind);
    return util::starts_with(out, ind) ? out.substr(ind.size()) : out;
}

inline std::size_t last_using_end(std::string_view file) {
    auto res = csharp::parse_compilation_unit(file);
    std::size_t end = std::string::npos;
    std::function<void(const Node&)> scan = [&](const Node& n) {
        for (const auto& c : n.children) {
            if (c.kind == "using_directive") end = (end == std::string::npos) ? c.end : std::max(end, c.end);
            else if (c.kind == "namespace_declaration") scan(c);
        }
    };
    scan(res.root);
    return end;
}

}  // namespace detail

/// Splices a patch into a file. The focal method (by signature) must be in
/// the patch and the file. Patch methods replace file methods with the same
/// signature; a patch method whose name exists only under other signatures
/// fails; methods with new names are appended to the focal class.
/// Attributes replace those declaring the same member name, else go after
/// the last attribute. Imports are appended without duplicates. Throws
/// SpliceFailure.
inline std::string apply_patch(std::string_view file_text, std::string_view suggestion, std::string_view focal_signature,
                               std::string_view class_name = {}) {
    SourceUnit patch, unit;
    try {
        patch = parse_fragment(suggestion);
    } catch (const UnparseableFile& e) {
        throw SpliceFailure(std::string("suggestion does not parse: ") + e.what());
    }
    try {
        unit = parse_source(file_text);
    } catch (const UnparseableFile& e) {
        throw SpliceFailure(std::string("target file does not parse: ") + e.what());
    }
    if (patch.classes.size() > 1) throw SpliceFailure("type declarations inside a patch are not supported");
    const ClassModel& loose = patch.classes.front();
    if (!loose.find(focal_signature))
        throw SpliceFailure("focal method " + std::string(focal_signature) + " missing from suggestion");

    const ClassModel* cls = nullptr;
    for (const auto& c : unit.classes)
        if ((class_name.empty() || c.name == class_name) && c.find(focal_signature)) {
            cls = &c;
            break;
        }
    if (!cls) throw SpliceFailure("focal method " + std::string(focal_signature) + " not found in file");

    std::vector<detail::Splice> edits;
    std::string_view src = unit.raw_text;

    // member indentation of the focal class
    std::string member_ind = detail::indentation_at(src, cls->find(focal_signature)->begin);

    // methods
    std::string appended;
    for (const auto& m : loose.methods) {
        const MethodModel* target = cls->find(m.signature);
        if (!target) target = unit.find_method(m.signature);
        if (target) {
            if (normalize_body(target->text) == normalize_body(m.text)) continue;
            std::string ind = detail::indentation_at(src, target->begin);
            edits.push_back({target->begin, target->end, detail::reindent_inline(m.text, ind)});
            continue;
        }
        for (const auto& existing : cls->methods)
            if (existing.name == m.name)
                throw SpliceFailure("no method matching signature " + m.signature + " in class " + cls->name);
        appended += "\n" + util::indent(m.text, member_ind) + "\n";
    }
    if (!appended.empty()) {
        std::size_t close = cls->end - 1;  // the class's closing brace
        edits.push_back({detail::line_start(src, close), detail::line_start(src, close), appended});
    }

    // attributes
    std::string new_attrs;
    for (const auto& a : loose.attributes) {
        const AttributeModel* same = nullptr;
        for (const auto& e : cls->attributes)
            for (const auto& n : e.names)
                if (std::find(a.names.begin(), a.names.end(), n) != a.names.end()) same = &e;
        if (same) {
            if (same->normalized == a.normalized) continue;
            std::string ind = detail::indentation_at(src, same->begin);
            edits.push_back({same->begin, same->end, detail::reindent_inline(a.text, ind)});
        } else {
            new_attrs += "\n" + util::indent(a.text, member_ind);
        }
    }
    if (!new_attrs.empty()) {
        if (!cls->attributes.empty()) {
            std::size_t at = 0;
            for (const auto& e : cls->attributes) at = std::max(at, e.end);
            edits.push_back({at, at, new_attrs});
        } else {
            std::size_t first = cls->end - 1;
            for (const auto& m : cls->methods) first = std::min(first, m.begin);
            std::size_t at = detail::line_start(src, first);
            edits.push_back({at, at, new_attrs.substr(1) + "\n\n"});
        }
    }

    // imports
    std::set<std::string> have(unit.using_statements.begin(), unit.using_statements.end());
    std::string new_usings;
    for (const auto& u : patch.using_statements)
        if (have.insert(u).second) new_usings += u + "\n";
    if (!new_usings.empty()) {
        std::size_t end = detail::last_using_end(src);
        if (end == std::string::npos) edits.push_back({0, 0, new_usings + "\n"});
        else edits.push_back({end, end, "\n" + new_usings.substr(0, new_usings.size() - 1)});
    }

    std::sort(edits.begin(), edits.end(), [](const auto& a, const auto& b) {
        return a.begin != b.begin ? a.begin > b.begin : a.end > b.end;
    });
    for (std::size_t i = 1; i < edits.size(); ++i)
        if (edits[i].end > edits[i - 1].begin) throw SpliceFailure("overlapping splice sites");
    std::string out(file_text);
    for (const auto& e : edits) out.replace(e.begin, e.end - e.begin, e.text);

    try {
        SourceUnit check = parse_source(out);
        if (check.diagnostics.size() > unit.diagnostics.size() || !check.find_method(cls->name, focal_signature))
            throw SpliceFailure("patched file does not parse cleanly");
    } catch (const UnparseableFile& e) {
        throw SpliceFailure(std::string("patched file does not parse: ") + e.what());
    }
    return out;
}

// ---- validation ---------------------------------------------------------------------------------

/// A suggestion together with where it applies.
struct ValidationTask {
    Suggestion suggestion;
    std::string file_path;  // relative to the repository root
    std::string class_name;
    std::string focal_signature;
};

inline ValidationTask make_task(const Suggestion& s, const TransformationExample& ex) {
    return {s, ex.file_path, ex.class_name, ex.focal_signature};
}

namespace detail {

inline void copy_tree(const fs::path& from, const fs::path& to) {
    fs::create_directories(to);
    for (auto it = fs::recursive_directory_iterator(from); it != fs::recursive_directory_iterator(); ++it) {
        const auto& p = it->path();
        if (p.filename() == ".git") {
            if (it->is_directory()) it.disable_recursion_pending();
            continue;
        }
        fs::path dst = to / fs::relative(p, from);
        if (it->is_symlink()) fs::copy_symlink(p, dst);
        else if (it->is_directory()) fs::create_directories(dst);
        else if (it->is_regular_file()) fs::copy_file(p, dst, fs::copy_options::overwrite_existing);
    }
}

inline std::atomic<std::uint64_t>& tree_counter() {
    static std::atomic<std::uint64_t> n{0};
    return n;
}

// Scratch copy of a repository, removed on destruction.
class WorkingTree {
public:
    WorkingTree(const fs::path& repo, bool keep) : keep_(keep) {
        path_ = fs::temp_directory_path() /
                ("perfpatch-" + std::to_string(::getpid()) + "-" + std::to_string(tree_counter().fetch_add(1)));
        fs::remove_all(path_);
        copy_tree(repo, path_);
    }
    ~WorkingTree() {
        if (keep_) return;
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    WorkingTree(const WorkingTree&) = delete;
    WorkingTree& operator=(const WorkingTree&) = delete;
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
    bool keep_;
};

// Logs mention the tree through the placeholder so verdicts do not depend
// on where the scratch copy lived.
inline std::string sanitize_logs(std::string logs, const fs::path& tree) {
    logs = util::replace_all(std::move(logs), tree.string(), ToolchainConfig::placeholder);
    constexpr std::size_t cap = 16384;
    if (logs.size() > cap) logs = logs.substr(0, cap) + "\n[truncated]";
    return logs;
}

}  // namespace detail

/// Runs the funnel for one suggestion against a private copy of `repo`.
/// Stage errors end up in the verdict; only a missing repository throws.
inline ValidationVerdict validate(const ValidationTask& task, const fs::path& repo, const ToolchainConfig& tc) {
    ValidationVerdict v;
    v.suggestion_id = task.suggestion.suggestion_id;
    v.example_id = task.suggestion.example_id;
    if (!fs::is_directory(repo)) throw IoError("repository tree not found: " + repo.string());

    if (!check_syntax(task.suggestion.patch_text)) {
        v.stage_reached = Stage::SyntaxError;
        v.logs = "suggestion does not parse";
        return v;
    }

    detail::WorkingTree tree(repo, tc.keep_trees);
    fs::path file = tree.path() / task.file_path;
    try {
        if (!fs::is_regular_file(file)) throw SpliceFailure("file not found: " + task.file_path);
        std::string patched = apply_patch(util::read_file(file), task.suggestion.patch_text, task.focal_signature,
                                          task.class_name);
        util::write_file(file, patched);
    } catch (const SpliceFailure& e) {
        v.stage_reached = Stage::SyntaxError;
        v.logs = e.what();
        return v;
    }

    auto stage = [&](const std::string& cmd, std::chrono::milliseconds timeout, std::string& logs) -> bool {
        try {
            auto r = run_stage(tree.path(), cmd, timeout);
            logs += r.output;
            return r.exit_status == 0;
        } catch (const Error& e) {
            logs += std::string(e.what()) + "\n";
            return false;
        }
    };

    std::string logs;
    if (!stage(tc.compile_command, tc.compile_timeout, logs)) {
        v.stage_reached = Stage::CompilationError;
        v.first_error_code = first_diagnostic(logs, tc.diagnostic_pattern);
        v.error_category = v.first_error_code ? categorize_compile_error(*v.first_error_code) : ErrorCategory::Other;
        v.logs = detail::sanitize_logs(std::move(logs), tree.path());
        return v;
    }
    if (!stage(tc.unit_test_command, tc.test_timeout, logs)) {
        v.stage_reached = Stage::FailedUnitTests;
        v.logs = detail::sanitize_logs(std::move(logs), tree.path());
        return v;
    }
    v.stage_reached = Stage::PassedUnitTests;
    v.logs = detail::sanitize_logs(std::move(logs), tree.path());
    return v;
}

/// Validates tasks on up to `tc.workers` threads; verdicts keep task order.
inline std::vector<ValidationVerdict> validate_all(const std::vector<ValidationTask>& tasks, const fs::path& repo,
                                                   const ToolchainConfig& tc) {
    tc.validate();
    std::vector<ValidationVerdict> out(tasks.size());
    std::vector<std::string> fatal(tasks.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            try {
                out[i] = validate(tasks[i], repo, tc);
            } catch (const std::exception& e) {
                fatal[i] = e.what();
            }
        }
    };
    std::size_t workers = std::max<std::size_t>(1, std::min(tc.workers, tasks.size()));
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    for (const auto& f : fatal)
        if (!f.empty()) throw IoError(f);
    return out;
}

// ---- funnel summary -----------------------------------------------------------------------------

struct FunnelSummary {
    std::size_t total = 0;
    std::map<Stage, std::size_t> stages;
    std::map<ErrorCategory, std::size_t> categories;
};

inline FunnelSummary summarize(const std::vector<ValidationVerdict>& verdicts) {
    FunnelSummary s;
    for (Stage st : {Stage::SyntaxError, Stage::CompilationError, Stage::FailedUnitTests, Stage::PassedUnitTests})
        s.stages[st] = 0;
    for (ErrorCategory c : {ErrorCategory::UndefinedIdentifier, ErrorCategory::IncorrectArguments,
                            ErrorCategory::IncorrectUsing, ErrorCategory::TypeMismatch, ErrorCategory::Other})
        s.categories[c] = 0;
    for (const auto& v : verdicts) {
        ++s.total;
        ++s.stages[v.stage_reached];
        if (v.error_category) ++s.categories[*v.error_category];
    }
    return s;
}

// ---- test targets -------------------------------------------------------------------------------

/// Coverage report:
///   {"methods": [{"class": "C", "signature": "...", "line_coverage": 0.93,
///                 "on_benchmark_path": true}, ...]}
struct CoverageEntry {
    std::string class_name;
    std::string signature;
    double line_coverage = 0.0;
    bool on_benchmark_path = false;
};

inline std::vector<CoverageEntry> parse_coverage(std::string_view text, const std::string& origin = "<coverage>") {
    util::json j;
    try {
        j = util::json::parse(text);
    } catch (const util::json::exception& e) {
        throw SchemaError(origin + ": invalid JSON: " + e.what());
    }
    if (!j.is_object() || !j.contains("methods") || !j["methods"].is_array())
        throw SchemaError(origin + ": expected an object with a 'methods' array");
    std::vector<CoverageEntry> out;
    for (std::size_t i = 0; i < j["methods"].size(); ++i) {
        const auto& m = j["methods"][i];
        std::string at = origin + ": methods[" + std::to_string(i) + "]";
        if (!m.is_object() || !m.contains("signature") || !m["signature"].is_string())
            throw SchemaError(at + ": missing 'signature'");
        if (!m.contains("line_coverage") || !m["line_coverage"].is_number())
            throw SchemaError(at + ": missing 'line_coverage'");
        CoverageEntry e;
        e.class_name = m.value("class", std::string());
        e.signature = m["signature"].get<std::string>();
        e.line_coverage = m["line_coverage"].get<double>();
        e.on_benchmark_path = m.value("on_benchmark_path", false);
        if (e.line_coverage < 0.0 || e.line_coverage > 1.0) throw SchemaError(at + ": line_coverage outside [0, 1]");
        out.push_back(std::move(e));
    }
    return out;
}

/// Methods on a benchmark path whose line coverage reaches the threshold.
inline std::vector<CoverageEntry> select_targets(const std::vector<CoverageEntry>& coverage, double threshold = 0.8) {
    std::vector<CoverageEntry> out;
    for (const auto& e : coverage)
        if (e.on_benchmark_path && e.line_coverage >= threshold) out.push_back(e);
    return out;
}

/// Examples whose focal method is a selected target.
inline std::vector<TransformationExample> filter_targets(const std::vector<TransformationExample>& examples,
                                                         const std::vector<CoverageEntry>& targets) {
    std::set<std::pair<std::string, std::string>> keep;
    for (const auto& t : targets) keep.insert({t.class_name, t.signature});
    std::vector<TransformationExample> out;
    for (const auto& ex : examples)
        if (keep.count({ex.class_name, ex.focal_signature}) || keep.count({"", ex.focal_signature})) out.push_back(ex);
    return out;
}

}  // namespace perfpatch
