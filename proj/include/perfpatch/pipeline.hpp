#pragma once

// Stage orchestration: mine -> build-examples -> dataset -> targets ->
// suggest -> evaluate -> validate -> bench -> report. Every stage reads and
// writes files in the output directory; a stage is skipped when the hash
// of its inputs matches the last run and its outputs are intact.

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "perfpatch/bench_stats.hpp"
#include "perfpatch/code_model.hpp"
#include "perfpatch/corpus_miner.hpp"
#include "perfpatch/error.hpp"
#include "perfpatch/eval_metrics.hpp"
#include "perfpatch/example_builder.hpp"
#include "perfpatch/patch_validator.hpp"
#include "perfpatch/remote_backend.hpp"
#include "perfpatch/report.hpp"
#include "perfpatch/rule_backend.hpp"
#include "perfpatch/suggestion_engine.hpp"
#include "perfpatch/util/jsonl.hpp"
#include "perfpatch/util/kv_config.hpp"
#include "perfpatch/util/text.hpp"

namespace perfpatch {

// ---- configuration ---------------------------------------------------------------------------

/// Key-value file; every key may be overridden by PERFPATCH_<KEY> in the
/// environment. Relative paths resolve against the config file's directory.
struct PipelineConfig {
    // mining
    std::string repo;
    std::string branch = "main";
    std::vector<std::string> keywords = default_perf_keywords();
    bool perf_only = true;
    bool single_file = true;
    std::size_t max_commits = 0;
    // examples
    ExampleOptions example;
    double dedup_threshold = 0.9;
    std::vector<double> split_fractions{0.8, 0.1, 0.1};
    std::uint64_t split_seed = 0;
    std::string suggest_split = "all";  // all | train | validation | test
    // suggestions
    std::string backend = "rules";  // rules | remote
    std::string endpoint = "http://127.0.0.1:8080/sample";
    std::size_t endpoint_timeout_ms = 30000;
    std::vector<std::string> rules = all_rule_ids();
    std::size_t n_samples = 2000;
    std::size_t top_k = 100;
    std::optional<std::uint64_t> seed;
    std::size_t workers = 4;
    std::size_t max_in_flight = 8;
    // validation and benchmarks
    std::string validate_repo;  // defaults to repo
    std::string toolchain;
    std::string coverage;
    double alpha = 0.05;
    // evaluation
    CodeBleuWeights weights;
    std::string judgments;
    std::vector<std::size_t> topk{1, 10, 100, 500};
    // artifacts
    std::string out_dir = "perfpatch-out";

    static const std::vector<std::string>& keys() {
        static const std::vector<std::string> k{
            "repo",          "branch",          "keywords",   "perf_only",     "single_file",     "max_commits",
            "budget",        "begin_marker",    "end_marker", "dedup_threshold", "split_fractions", "split_seed",
            "suggest_split", "backend",         "endpoint",   "endpoint_timeout_ms", "rules",       "n_samples",
            "top_k",         "seed",            "workers",    "max_in_flight", "validate_repo",   "toolchain",
            "coverage",      "alpha",           "codebleu_weights", "judgments", "topk",          "out_dir"};
        return k;
    }

    void validate() const {
        validate_fractions(split_fractions);
        weights.validate();
        if (example.budget == 0) throw ConfigError("budget must be positive");
        if (example.begin_marker.empty() || example.end_marker.empty() || example.begin_marker == example.end_marker)
            throw ConfigError("markers must be non-empty and distinct");
        if (!(dedup_threshold > 0.0 && dedup_threshold <= 1.0)) throw ConfigError("dedup_threshold must lie in (0, 1]");
        if (top_k < 1 || n_samples < top_k) throw ConfigError("need n_samples >= top_k >= 1");
        if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
        if (backend != "rules" && backend != "remote") throw ConfigError("backend must be 'rules' or 'remote'");
        if (suggest_split != "all" && suggest_split != "train" && suggest_split != "validation" && suggest_split != "test")
            throw ConfigError("suggest_split must be all, train, validation or test");
        for (const auto& r : rules)
            if (std::find(all_rule_ids().begin(), all_rule_ids().end(), r) == all_rule_ids().end())
                throw ConfigError("unknown rule '" + r + "'");
        if (workers == 0 || max_in_flight == 0) throw ConfigError("workers and max_in_flight must be positive");
        if (out_dir.empty()) throw ConfigError("out_dir must be set");
    }

    /// Canonical text of every setting; part of each stage's input hash.
    std::string fingerprint() const {
        util::json j{{"repo", repo},
                     {"branch", branch},
                     {"keywords", keywords},
                     {"perf_only", perf_only},
                     {"single_file", single_file},
                     {"max_commits", max_commits},
                     {"budget", example.budget},
                     {"begin_marker", example.begin_marker},
                     {"end_marker", example.end_marker},
                     {"dedup_threshold", dedup_threshold},
                     {"split_fractions", split_fractions},
                     {"split_seed", split_seed},
                     {"suggest_split", suggest_split},
                     {"backend", backend},
                     {"endpoint", endpoint},
                     {"endpoint_timeout_ms", endpoint_timeout_ms},
                     {"rules", rules},
                     {"n_samples", n_samples},
                     {"top_k", top_k},
                     {"seed", seed ? util::json(*seed) : util::json(nullptr)},
                     {"validate_repo", validate_repo},
                     {"toolchain", toolchain},
                     {"coverage", coverage},
                     {"alpha", alpha},
                     {"codebleu_weights", {weights.alpha, weights.beta, weights.gamma, weights.delta}},
                     {"judgments", judgments},
                     {"topk", topk}};
        return j.dump();
    }

    static PipelineConfig from_kv(util::KeyValueConfig kv, const std::filesystem::path& base_dir = {}) {
        kv.apply_env_overrides("PERFPATCH_", keys());
        PipelineConfig c;
        auto path = [&](const std::string& key, const std::string& def) {
            std::string v = kv.get_or(key, def);
            if (v.empty() || std::filesystem::path(v).is_absolute() || base_dir.empty()) return v;
            return (base_dir / v).lexically_normal().string();
        };
        auto flag = [&](const std::string& key, bool def) {
            auto v = kv.get(key);
            if (!v) return def;
            std::string s = util::to_lower(*v);
            if (s == "true" || s == "yes" || s == "1") return true;
            if (s == "false" || s == "no" || s == "0") return false;
            throw ConfigError(key + ": expected a boolean, got '" + *v + "'");
        };
        auto count = [&](const std::string& key, std::size_t def) {
            long v = kv.get_int(key, static_cast<long>(def));
            if (v < 0) throw ConfigError(key + " must be non-negative");
            return static_cast<std::size_t>(v);
        };
        auto list = [&](const std::string& key, std::vector<std::string> def) {
            auto v = kv.get(key);
            if (!v) return def;
            std::vector<std::string> out;
            for (const auto& p : util::split(*v, ','))
                if (!util::trim(p).empty()) out.push_back(util::trim(p));
            return out;
        };
        auto reals = [&](const std::string& key, std::vector<double> def) {
            auto v = kv.get(key);
            if (!v) return def;
            try {
                return util::parse_real_list(*v);
            } catch (const std::exception&) {
                throw ConfigError(key + ": expected comma-separated numbers");
            }
        };

        c.repo = path("repo", "");
        c.branch = kv.get_or("branch", c.branch);
        c.keywords = list("keywords", c.keywords);
        c.perf_only = flag("perf_only", c.perf_only);
        c.single_file = flag("single_file", c.single_file);
        c.max_commits = count("max_commits", c.max_commits);
        c.example.budget = count("budget", c.example.budget);
        c.example.begin_marker = kv.get_or("begin_marker", c.example.begin_marker);
        c.example.end_marker = kv.get_or("end_marker", c.example.end_marker);
        c.dedup_threshold = kv.get_real("dedup_threshold", c.dedup_threshold);
        c.split_fractions = reals("split_fractions", c.split_fractions);
        c.split_seed = count("split_seed", c.split_seed);
        c.suggest_split = kv.get_or("suggest_split", c.suggest_split);
        c.backend = kv.get_or("backend", c.backend);
        c.endpoint = kv.get_or("endpoint", c.endpoint);
        c.endpoint_timeout_ms = count("endpoint_timeout_ms", c.endpoint_timeout_ms);
        c.rules = list("rules", c.rules);
        c.n_samples = count("n_samples", c.n_samples);
        c.top_k = count("top_k", c.top_k);
        if (kv.get("seed") && !kv.get("seed")->empty()) c.seed = count("seed", 0);
        c.workers = count("workers", c.workers);
        c.max_in_flight = count("max_in_flight", c.max_in_flight);
        c.validate_repo = path("validate_repo", "");
        c.toolchain = path("toolchain", "");
        c.coverage = path("coverage", "");
        c.alpha = kv.get_real("alpha", c.alpha);
        auto w = reals("codebleu_weights", {c.weights.alpha, c.weights.beta, c.weights.gamma, c.weights.delta});
        if (w.size() != 4) throw ConfigError("codebleu_weights needs four values");
        c.weights = {w[0], w[1], w[2], w[3]};
        c.judgments = path("judgments", "");
        auto ks = reals("topk", {1, 10, 100, 500});
        c.topk.clear();
        for (double k : ks) {
            if (k < 1 || k != std::floor(k)) throw ConfigError("topk values must be positive integers");
            c.topk.push_back(static_cast<std::size_t>(k));
        }
        c.out_dir = path("out_dir", c.out_dir);
        c.validate();
        return c;
    }

    static PipelineConfig load(const std::filesystem::path& file) {
        return from_kv(util::KeyValueConfig::load(file), std::filesystem::absolute(file).parent_path());
    }
};

// ---- helpers -----------------------------------------------------------------------------------

inline const std::vector<std::string>& pipeline_stages() {
    static const std::vector<std::string> s{"mine",    "build-examples", "dataset",  "targets", "suggest",
                                            "evaluate", "validate",      "bench",    "report"};
    return s;
}

/// Content hash of every regular file below `root` except .git, in path order.
inline std::string tree_hash(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) return "missing";
    std::vector<fs::path> files;
    for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator(); ++it) {
        if (it->path().filename() == ".git") {
            if (it->is_directory()) it.disable_recursion_pending();
            continue;
        }
        if (it->is_regular_file()) files.push_back(fs::relative(it->path(), root));
    }
    std::sort(files.begin(), files.end());
    std::string acc;
    for (const auto& f : files) acc += f.generic_string() + '\0' + util::content_hash(util::read_file(root / f)) + '\n';
    return util::content_hash(acc);
}

/// Examples for in-the-wild targets: each selected method in the current
/// tree becomes an input with an empty output.
inline std::vector<TransformationExample> build_target_examples(const std::filesystem::path& tree,
                                                                const std::vector<CoverageEntry>& targets,
                                                                const ExampleOptions& opt, const std::string& repo_id,
                                                                std::vector<std::string>* skipped = nullptr) {
    namespace fs = std::filesystem;
    std::vector<fs::path> files;
    for (auto it = fs::recursive_directory_iterator(tree); it != fs::recursive_directory_iterator(); ++it) {
        if (it->path().filename() == ".git") {
            if (it->is_directory()) it.disable_recursion_pending();
            continue;
        }
        if (it->is_regular_file() && it->path().extension() == ".cs") files.push_back(fs::relative(it->path(), tree));
    }
    std::sort(files.begin(), files.end());
    std::vector<std::pair<fs::path, SourceUnit>> units;
    for (const auto& f : files) {
        try {
            units.emplace_back(f, parse_source(util::read_file(tree / f)));
        } catch (const UnparseableFile&) {
        }
    }
    std::vector<TransformationExample> out;
    for (const auto& t : targets) {
        bool found = false;
        for (const auto& [path, unit] : units) {
            for (const auto& cls : unit.classes) {
                if (!t.class_name.empty() && cls.name != t.class_name) continue;
                const MethodModel* m = cls.find(t.signature);
                if (!m) continue;
                found = true;
                FocalMethodPair pair{cls.name, m->signature, *m, *m};
                try {
                    auto in = build_input(pair, unit, opt);
                    TransformationExample ex;
                    ex.repo_id = repo_id;
                    ex.commit_id = "working-tree";
                    ex.file_path = path.generic_string();
                    ex.class_name = cls.name;
                    ex.focal_signature = m->signature;
                    ex.input_text = std::move(in.text);
                    ex.included_context = std::move(in.included_context);
                    ex.token_count_input = in.token_count;
                    ex.example_id = make_example_id(repo_id, ex.commit_id, ex.file_path, ex.class_name, ex.focal_signature);
                    out.push_back(std::move(ex));
                } catch (const Error& e) {
                    if (skipped) skipped->push_back(cls.name + "." + t.signature + ": " + e.what());
                }
                break;
            }
            if (found) break;
        }
        if (!found && skipped) skipped->push_back(t.class_name + "." + t.signature + ": not found in tree");
    }
    return out;
}

inline std::unique_ptr<Backend> make_backend(const PipelineConfig& c) {
    if (c.backend == "remote") {
        RemoteEndpoint ep;
        ep.url = c.endpoint;
        ep.timeout = std::chrono::milliseconds(c.endpoint_timeout_ms);
        return std::make_unique<RemoteBackend>(ep);
    }
    return std::make_unique<RuleBackend>(c.example, c.rules);
}

/// Runs the bench command in `tree` and parses its summary.
inline std::vector<BenchmarkSummary> run_benchmarks(const std::filesystem::path& tree, const ToolchainConfig& tc) {
    auto r = run_stage(tree, tc.bench_command, tc.bench_timeout);
    if (r.exit_status != 0)
        throw StageFailed("bench command exited with status " + std::to_string(r.exit_status) + ":\n" +
                          detail::sanitize_logs(r.output, tree));
    if (tc.bench_output.empty()) return parse_summary(r.output, "bench output");
    return parse_summary(util::read_file(tree / tc.bench_output), tc.bench_output);
}

// ---- runner ------------------------------------------------------------------------------------

struct StageOutcome {
    std::string stage;
    bool skipped = false;
    std::vector<std::string> notes;
};

struct PipelineResult {
    std::vector<StageOutcome> stages;
};

class Pipeline {
public:
    explicit Pipeline(PipelineConfig cfg) : cfg_(std::move(cfg)), dir_(cfg_.out_dir) { cfg_.validate(); }

    /// Runs `stages` (a contiguous run of the pipeline order; empty = all).
    PipelineResult run(std::vector<std::string> stages = {}) {
        if (stages.empty()) stages = pipeline_stages();
        check_order(stages);
        std::filesystem::create_directories(dir_);
        load_state();
        PipelineResult res;
        for (const auto& s : stages) {
            StageOutcome o;
            o.stage = s;
            try {
                o.skipped = run_stage_named(s, o.notes);
            } catch (const StageFailed&) {
                throw;
            } catch (const std::exception& e) {
                throw StageFailed(s + ": " + e.what());
            }
            save_state();
            res.stages.push_back(std::move(o));
        }
        return res;
    }

    const std::filesystem::path& dir() const { return dir_; }

private:
    struct Spec {
        std::vector<std::string> inputs;
        std::vector<std::string> outputs;
        std::function<std::string()> extra;
        std::function<void(std::vector<std::string>&)> body;
    };

    static void check_order(const std::vector<std::string>& stages) {
        const auto& all = pipeline_stages();
        std::optional<std::size_t> prev;
        for (const auto& s : stages) {
            auto it = std::find(all.begin(), all.end(), s);
            if (it == all.end()) throw ConfigError("unknown stage '" + s + "'");
            std::size_t i = static_cast<std::size_t>(it - all.begin());
            if (prev && i != *prev + 1) throw ConfigError("stages must be a contiguous run of the pipeline order");
            prev = i;
        }
    }

    std::filesystem::path at(const std::string& name) const { return dir_ / name; }

    std::string file_hash(const std::string& name) const {
        if (!std::filesystem::exists(at(name))) return {};
        return util::content_hash(util::read_file(at(name)));
    }

    void load_state() {
        state_ = util::json::object();
        if (std::filesystem::exists(at("state.json"))) {
            try {
                state_ = util::json::parse(util::read_file(at("state.json")));
            } catch (const util::json::exception&) {
                state_ = util::json::object();  // a damaged state only costs a re-run
            }
        }
    }
    void save_state() const { util::write_file(at("state.json"), util::dump_pretty(state_)); }

    std::string validate_tree() const { return cfg_.validate_repo.empty() ? cfg_.repo : cfg_.validate_repo; }

    std::optional<ToolchainConfig> toolchain() const {
        if (cfg_.toolchain.empty()) return std::nullopt;
        return ToolchainConfig::load(cfg_.toolchain);
    }

    std::string optional_file(const std::string& path) const {
        if (path.empty()) return "-";
        if (!std::filesystem::exists(path)) throw ConfigError("file not found: " + path);
        return util::content_hash(util::read_file(path));
    }

    // Returns true when skipped.
    bool run_stage_named(const std::string& name, std::vector<std::string>& notes) {
        Spec spec = spec_for(name);
        for (const auto& in : spec.inputs)
            if (!std::filesystem::exists(at(in)))
                throw StageFailed(name + ": missing input artifact " + in + " (run the earlier stages first)");
        std::string key = name + '\n' + cfg_.fingerprint() + '\n';
        for (const auto& in : spec.inputs) key += in + '=' + file_hash(in) + '\n';
        if (spec.extra) key += spec.extra();
        std::string input_hash = util::content_hash(key);

        if (state_.contains(name) && state_[name].value("input", std::string()) == input_hash) {
            bool intact = true;
            for (const auto& out : spec.outputs)
                if (file_hash(out).empty() || state_[name]["outputs"].value(out, std::string()) != file_hash(out))
                    intact = false;
            if (intact) return true;
        }
        spec.body(notes);
        util::json outs = util::json::object();
        for (const auto& out : spec.outputs) outs[out] = file_hash(out);
        state_[name] = util::json{{"input", input_hash}, {"outputs", outs}};
        return false;
    }

    std::vector<TransformationExample> suggest_set() const {
        auto data = util::read_jsonl<TransformationExample>(at("dataset.jsonl"));
        if (cfg_.suggest_split != "all") {
            auto split = util::json::parse(util::read_file(at("split.json"))).get<DatasetSplit>();
            std::vector<TransformationExample> keep;
            for (auto& e : data)
                if (split_of(split, e.repo_id) == cfg_.suggest_split) keep.push_back(std::move(e));
            data = std::move(keep);
        }
        return data;
    }

    Spec spec_for(const std::string& name) {
        if (name == "mine") {
            return {{},
                    {"commits.jsonl"},
                    [this] {
                        if (cfg_.repo.empty()) throw ConfigError("repo must be set for mining");
                        MinerOptions mo;
                        auto head = detail::git(mo, cfg_.repo, {"rev-parse", "--verify", "--quiet", cfg_.branch + "^{commit}"});
                        return "head=" + util::trim(head.output) + '\n';
                    },
                    [this](std::vector<std::string>& notes) {
                        MinerOptions mo;
                        mo.keywords = cfg_.keywords;
                        mo.max_commits = cfg_.max_commits;
                        std::vector<CommitRecord> keep;
                        std::size_t seen = 0;
                        crawl_history(cfg_.repo, cfg_.branch, mo, [&](CommitRecord&& r) {
                            ++seen;
                            if (cfg_.perf_only && !r.is_perf) return;
                            if (cfg_.single_file && r.file_changes.size() != 1) return;
                            keep.push_back(std::move(r));
                        });
                        notes.push_back(std::to_string(seen) + " commits crawled, " + std::to_string(keep.size()) + " kept");
                        util::write_jsonl(at("commits.jsonl"), keep);
                    }};
        }
        if (name == "build-examples") {
            return {{"commits.jsonl"},
                    {"examples.jsonl", "build_stats.json"},
                    nullptr,
                    [this](std::vector<std::string>& notes) {
                        BuildStats stats;
                        std::vector<TransformationExample> all;
                        for (const auto& c : util::read_jsonl<CommitRecord>(at("commits.jsonl")))
                            for (auto& e : build_examples(c, cfg_.example, stats)) all.push_back(std::move(e));
                        util::write_jsonl(at("examples.jsonl"), all);
                        util::write_file(at("build_stats.json"), util::dump_pretty(util::json(stats)));
                        notes.push_back(std::to_string(all.size()) + " examples");
                    }};
        }
        if (name == "dataset") {
            return {{"examples.jsonl"},
                    {"dataset.jsonl", "split.json", "dataset_stats.json"},
                    nullptr,
                    [this](std::vector<std::string>& notes) {
                        DedupStats ds;
                        auto kept = dedup(util::read_jsonl<TransformationExample>(at("examples.jsonl")), cfg_.dedup_threshold, &ds);
                        auto split = split_by_project(kept, cfg_.split_fractions, cfg_.split_seed);
                        util::write_jsonl(at("dataset.jsonl"), kept);
                        util::write_file(at("split.json"), util::dump_pretty(util::json(split)));
                        util::write_file(at("dataset_stats.json"),
                                         util::dump_pretty(util::json{{"input", ds.input},
                                                                      {"exact_removed", ds.exact_removed},
                                                                      {"near_removed", ds.near_removed},
                                                                      {"kept", kept.size()}}));
                        notes.push_back(std::to_string(kept.size()) + " examples after dedup");
                    }};
        }
        if (name == "targets") {
            return {{},
                    {"targets.jsonl"},
                    [this] { return "coverage=" + optional_file(cfg_.coverage) + "\ntree=" + tree_hash(validate_tree()) + '\n'; },
                    [this](std::vector<std::string>& notes) {
                        std::vector<TransformationExample> out;
                        if (!cfg_.coverage.empty()) {
                            double threshold = 0.8;
                            if (auto tc = toolchain()) threshold = tc->coverage_threshold;
                            auto cov = parse_coverage(util::read_file(cfg_.coverage), cfg_.coverage);
                            auto sel = select_targets(cov, threshold);
                            std::string repo_id = std::filesystem::path(validate_tree()).filename().string();
                            out = build_target_examples(validate_tree(), sel, cfg_.example, repo_id, &notes);
                        } else {
                            notes.push_back("no coverage report configured; no in-the-wild targets");
                        }
                        util::write_jsonl(at("targets.jsonl"), out);
                    }};
        }
        if (name == "suggest") {
            return {{"dataset.jsonl", "split.json", "targets.jsonl"},
                    {"suggestions.jsonl", "suggest_failures.jsonl"},
                    nullptr,
                    [this](std::vector<std::string>& notes) {
                        auto examples = suggest_set();
                        for (auto& t : util::read_jsonl<TransformationExample>(at("targets.jsonl"))) examples.push_back(std::move(t));
                        auto backend = make_backend(cfg_);
                        SuggestOptions so;
                        so.n_samples = cfg_.n_samples;
                        so.top_k = cfg_.top_k;
                        so.seed = cfg_.seed;
                        so.workers = cfg_.workers;
                        so.max_in_flight = cfg_.max_in_flight;
                        std::vector<SuggestFailure> failures;
                        auto sugg = suggest_all(examples, *backend, so, &failures);
                        util::write_jsonl(at("suggestions.jsonl"), sugg);
                        std::string lines;
                        for (const auto& f : failures)
                            lines += util::json{{"example_id", f.example_id}, {"error", f.error}}.dump() + "\n";
                        util::write_file(at("suggest_failures.jsonl"), lines);
                        notes.push_back(std::to_string(sugg.size()) + " suggestions, " + std::to_string(failures.size()) +
                                        " failed examples");
                    }};
        }
        if (name == "evaluate") {
            return {{"dataset.jsonl", "split.json", "suggestions.jsonl"},
                    {"metrics.json"},
                    [this] { return "judgments=" + optional_file(cfg_.judgments) + '\n'; },
                    [this](std::vector<std::string>&) {
                        std::vector<TransformationExample> truth;
                        for (auto& e : suggest_set())
                            if (!e.output_text.empty()) truth.push_back(std::move(e));
                        std::optional<std::vector<Judgment>> judgments;
                        if (!cfg_.judgments.empty()) judgments = parse_judgments(util::read_file(cfg_.judgments), cfg_.judgments);
                        auto report = evaluate(util::read_jsonl<Suggestion>(at("suggestions.jsonl")), truth, judgments,
                                               cfg_.weights, cfg_.topk);
                        util::write_file(at("metrics.json"), util::dump_pretty(util::json(report)));
                    }};
        }
        if (name == "validate") {
            return {{"targets.jsonl", "suggestions.jsonl"},
                    {"verdicts.jsonl"},
                    [this] { return "toolchain=" + optional_file(cfg_.toolchain) + "\ntree=" + tree_hash(validate_tree()) + '\n'; },
                    [this](std::vector<std::string>& notes) {
                        std::map<std::string, TransformationExample> targets;
                        for (auto& t : util::read_jsonl<TransformationExample>(at("targets.jsonl"))) targets[t.example_id] = t;
                        std::vector<ValidationTask> tasks;
                        for (const auto& s : util::read_jsonl<Suggestion>(at("suggestions.jsonl"))) {
                            auto it = targets.find(s.example_id);
                            if (it != targets.end()) tasks.push_back(make_task(s, it->second));
                        }
                        std::vector<ValidationVerdict> verdicts;
                        if (!tasks.empty()) {
                            auto tc = toolchain();
                            if (!tc) throw ConfigError("validation needs a toolchain config");
                            verdicts = validate_all(tasks, validate_tree(), *tc);
                        }
                        util::write_jsonl(at("verdicts.jsonl"), verdicts);
                        notes.push_back(std::to_string(verdicts.size()) + " suggestions validated");
                    }};
        }
        if (name == "bench") {
            return {{"targets.jsonl", "suggestions.jsonl", "verdicts.jsonl"},
                    {"bench.jsonl"},
                    [this] { return "toolchain=" + optional_file(cfg_.toolchain) + "\ntree=" + tree_hash(validate_tree()) + '\n'; },
                    [this](std::vector<std::string>& notes) { run_bench(notes); }};
        }
        return {{},
                {"report.txt", "report.json"},
                [this] {
                    std::string k;
                    for (const char* f : {"verdicts.jsonl", "metrics.json", "bench.jsonl"}) k += std::string(f) + '=' + file_hash(f) + '\n';
                    return k;
                },
                [this](std::vector<std::string>&) {
                    Report r = load_report(dir_);
                    util::write_file(at("report.txt"), render_text(r));
                    util::write_file(at("report.json"), util::dump_pretty(util::json(r)));
                }};
    }

    // Benchmarks run one at a time: baseline once, then each passing suggestion.
    void run_bench(std::vector<std::string>& notes) {
        std::map<std::string, TransformationExample> targets;
        for (auto& t : util::read_jsonl<TransformationExample>(at("targets.jsonl"))) targets[t.example_id] = t;
        std::map<std::string, Suggestion> sugg;
        for (auto& s : util::read_jsonl<Suggestion>(at("suggestions.jsonl"))) sugg[s.suggestion_id] = s;
        std::vector<BenchRecord> records;
        auto tc = toolchain();
        std::vector<const ValidationVerdict*> passed;
        auto verdicts = util::read_jsonl<ValidationVerdict>(at("verdicts.jsonl"));
        for (const auto& v : verdicts)
            if (v.stage_reached == Stage::PassedUnitTests) passed.push_back(&v);
        if (passed.empty() || !tc || tc->bench_command.empty()) {
            if (!passed.empty()) notes.push_back("no bench command configured; benchmarks skipped");
            util::write_jsonl(at("bench.jsonl"), records);
            return;
        }
        std::vector<BenchmarkSummary> baseline;
        {
            detail::WorkingTree tree(validate_tree(), tc->keep_trees);
            baseline = run_benchmarks(tree.path(), *tc);
        }
        for (const auto* v : passed) {
            auto s = sugg.find(v->suggestion_id);
            auto t = targets.find(v->example_id);
            if (s == sugg.end() || t == targets.end()) continue;
            detail::WorkingTree tree(validate_tree(), tc->keep_trees);
            fs::path file = tree.path() / t->second.file_path;
            util::write_file(file, apply_patch(util::read_file(file), s->second.patch_text, t->second.focal_signature,
                                               t->second.class_name));
            BenchRecord rec;
            rec.suggestion_id = v->suggestion_id;
            rec.example_id = v->example_id;
            rec.method = t->second.class_name + "." + t->second.focal_signature;
            try {
                rec.result = judge(baseline, run_benchmarks(tree.path(), *tc), cfg_.alpha);
            } catch (const Error& e) {
                rec.result.warnings.push_back(e.what());
            }
            records.push_back(std::move(rec));
        }
        util::write_jsonl(at("bench.jsonl"), records);
        notes.push_back(std::to_string(records.size()) + " suggestions benchmarked");
    }

    PipelineConfig cfg_;
    std::filesystem::path dir_;
    util::json state_;
};

}  // namespace perfpatch
