// Command-line front end. Every subcommand reads and writes the same
// artifact formats as the pipeline stages.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "perfpatch.hpp"

using namespace perfpatch;
namespace fs = std::filesystem;

namespace {

void write_or_print(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") std::cout << content;
    else util::write_file(path, content);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    for (const auto& p : util::split(s, ','))
        if (!util::trim(p).empty()) out.push_back(util::trim(p));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"perfpatch: mine, suggest, validate and benchmark performance patches"};
    app.require_subcommand(1);

    // mine
    auto* mine = app.add_subcommand("mine", "crawl a repository's history into commit records");
    std::string repo, branch = "main", out, keywords;
    bool perf_only = false, single_file = false;
    std::size_t max_commits = 0;
    mine->add_option("--repo", repo, "repository path")->required();
    mine->add_option("--branch", branch, "branch to crawl");
    mine->add_flag("--perf-only", perf_only, "keep performance commits only");
    mine->add_flag("--single-file", single_file, "keep commits touching exactly one source file");
    mine->add_option("--keywords", keywords, "comma-separated performance keywords");
    mine->add_option("--max-commits", max_commits, "stop after this many commits (0 = all)");
    mine->add_option("--out", out, "output JSONL")->required();

    // build-examples
    auto* build = app.add_subcommand("build-examples", "turn commit records into transformation examples");
    std::string commits, stats_out, begin_marker = "/* edit */", end_marker = "/* end */";
    std::size_t budget = 1024;
    build->add_option("--commits", commits, "commit JSONL")->required();
    build->add_option("--budget", budget, "input token budget");
    build->add_option("--begin-marker", begin_marker);
    build->add_option("--end-marker", end_marker);
    build->add_option("--stats", stats_out, "write build counters as JSON");
    build->add_option("--out", out, "output JSONL")->required();

    // dataset
    auto* dataset = app.add_subcommand("dataset", "dataset operations");
    dataset->require_subcommand(1);
    auto* split = dataset->add_subcommand("split", "project-level train/validation/test split");
    std::string examples, fractions = "0.8,0.1,0.1";
    std::uint64_t seed = 0;
    split->add_option("--examples", examples, "example JSONL")->required();
    split->add_option("--fractions", fractions, "train,validation,test");
    split->add_option("--seed", seed);
    split->add_option("--out", out, "output JSON (default stdout)");
    auto* dd = dataset->add_subcommand("dedup", "remove exact and near duplicates");
    double threshold = 0.9;
    dd->add_option("--examples", examples, "example JSONL")->required();
    dd->add_option("--threshold", threshold, "Jaccard threshold");
    dd->add_option("--out", out, "output JSONL")->required();

    // targets
    auto* targets = app.add_subcommand("targets", "inputs for covered methods of a working tree");
    std::string coverage;
    double coverage_threshold = 0.8;
    targets->add_option("--repo", repo, "working tree")->required();
    targets->add_option("--coverage", coverage, "coverage JSON")->required();
    targets->add_option("--threshold", coverage_threshold, "minimum line coverage");
    targets->add_option("--budget", budget);
    targets->add_option("--out", out, "output JSONL")->required();

    // suggest
    auto* suggest = app.add_subcommand("suggest", "sample and rank patches for examples");
    std::string backend = "rules", endpoint = "http://127.0.0.1:8080/sample", rules;
    std::size_t n = 2000, top = 100, workers = 4, in_flight = 8, timeout_ms = 30000;
    std::optional<std::uint64_t> sample_seed;
    suggest->add_option("--example", examples, "example JSONL")->required();
    suggest->add_option("--backend", backend)->check(CLI::IsMember({"rules", "remote"}));
    suggest->add_option("--n", n, "hypotheses to sample");
    suggest->add_option("--top", top, "suggestions to keep");
    suggest->add_option("--endpoint", endpoint, "remote endpoint URL");
    suggest->add_option("--timeout-ms", timeout_ms);
    suggest->add_option("--rules", rules, "comma-separated rule ids");
    suggest->add_option("--seed", sample_seed);
    suggest->add_option("--workers", workers);
    suggest->add_option("--max-in-flight", in_flight);
    suggest->add_option("--out", out, "output JSONL (default stdout)");

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "score suggestions against developer patches");
    std::string suggestions, truth, judgments, report_path, weights = "0.1,0.1,0.4,0.4";
    eval->add_option("--suggestions", suggestions)->required();
    eval->add_option("--truth", truth)->required();
    eval->add_option("--judgments", judgments, "CSV example_id,accepted,rank");
    eval->add_option("--weights", weights, "CodeBLEU weights");
    eval->add_option("--report", report_path, "output JSON (default stdout)");

    // validate
    auto* val = app.add_subcommand("validate", "run the syntax/compile/test funnel");
    std::string toolchain;
    val->add_option("--suggestions", suggestions)->required();
    val->add_option("--examples", examples, "examples the suggestions refer to")->required();
    val->add_option("--repo", repo, "working tree")->required();
    val->add_option("--toolchain", toolchain)->required();
    val->add_option("--out", out, "output JSONL")->required();

    // bench-compare
    auto* bench = app.add_subcommand("bench-compare", "decide whether a candidate run improves on a baseline");
    std::string baseline, candidate;
    double alpha = 0.05;
    bench->add_option("--baseline", baseline)->required();
    bench->add_option("--candidate", candidate)->required();
    bench->add_option("--alpha", alpha);
    bench->add_option("--out", out, "output JSON (default stdout)");

    // report
    auto* report = app.add_subcommand("report", "render funnel, error, metric and improvement tables");
    std::string in_dir, format = "text";
    report->add_option("--in", in_dir, "artifact directory")->required();
    report->add_option("--format", format)->check(CLI::IsMember({"text", "json"}));

    // run
    auto* run = app.add_subcommand("run", "run pipeline stages from a config file");
    std::string config, stages;
    run->add_option("--config", config)->required();
    run->add_option("--stages", stages, "comma-separated contiguous stages (default all)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (mine->parsed()) {
            MinerOptions mo;
            if (!keywords.empty()) mo.keywords = split_list(keywords);
            mo.max_commits = max_commits;
            std::vector<CommitRecord> keep;
            crawl_history(repo, branch, mo, [&](CommitRecord&& r) {
                if (perf_only && !r.is_perf) return;
                if (single_file && r.file_changes.size() != 1) return;
                keep.push_back(std::move(r));
            });
            util::write_jsonl(out, keep);
            std::fprintf(stderr, "%zu commits written\n", keep.size());
        } else if (build->parsed()) {
            ExampleOptions opt{budget, begin_marker, end_marker};
            BuildStats stats;
            std::vector<TransformationExample> all;
            for (const auto& c : util::read_jsonl<CommitRecord>(commits))
                for (auto& e : build_examples(c, opt, stats)) all.push_back(std::move(e));
            util::write_jsonl(out, all);
            if (!stats_out.empty()) util::write_file(stats_out, util::dump_pretty(util::json(stats)));
            std::fprintf(stderr, "%zu examples written\n", all.size());
        } else if (split->parsed()) {
            auto ex = util::read_jsonl<TransformationExample>(examples);
            auto s = split_by_project(ex, util::parse_real_list(fractions), seed);
            write_or_print(out, util::dump_pretty(util::json(s)));
        } else if (dd->parsed()) {
            DedupStats ds;
            auto kept = dedup(util::read_jsonl<TransformationExample>(examples), threshold, &ds);
            util::write_jsonl(out, kept);
            std::fprintf(stderr, "%zu in, %zu exact and %zu near duplicates removed\n", ds.input, ds.exact_removed,
                         ds.near_removed);
        } else if (targets->parsed()) {
            auto sel = select_targets(parse_coverage(util::read_file(coverage), coverage), coverage_threshold);
            std::vector<std::string> skipped;
            ExampleOptions opt;
            opt.budget = budget;
            auto ex = build_target_examples(repo, sel, opt, fs::weakly_canonical(repo).filename().string(), &skipped);
            for (const auto& s : skipped) std::fprintf(stderr, "skipped %s\n", s.c_str());
            util::write_jsonl(out, ex);
        } else if (suggest->parsed()) {
            std::unique_ptr<Backend> b;
            if (backend == "remote") {
                RemoteEndpoint ep;
                ep.url = endpoint;
                ep.timeout = std::chrono::milliseconds(timeout_ms);
                b = std::make_unique<RemoteBackend>(ep);
            } else {
                b = std::make_unique<RuleBackend>(ExampleOptions{}, rules.empty() ? all_rule_ids() : split_list(rules));
            }
            SuggestOptions so{n, top, sample_seed, workers, in_flight};
            std::vector<SuggestFailure> failures;
            auto sugg = suggest_all(util::read_jsonl<TransformationExample>(examples), *b, so, &failures);
            for (const auto& f : failures) std::fprintf(stderr, "%s: %s\n", f.example_id.c_str(), f.error.c_str());
            write_or_print(out, util::to_jsonl(sugg));
        } else if (eval->parsed()) {
            auto w = util::parse_real_list(weights);
            if (w.size() != 4) throw ConfigError("--weights needs four values");
            std::optional<std::vector<Judgment>> js;
            if (!judgments.empty()) js = parse_judgments(util::read_file(judgments), judgments);
            auto r = evaluate(util::read_jsonl<Suggestion>(suggestions), util::read_jsonl<TransformationExample>(truth), js,
                              {w[0], w[1], w[2], w[3]});
            write_or_print(report_path, util::dump_pretty(util::json(r)));
        } else if (val->parsed()) {
            auto tc = ToolchainConfig::load(toolchain);
            std::map<std::string, TransformationExample> by_id;
            for (auto& e : util::read_jsonl<TransformationExample>(examples)) by_id[e.example_id] = e;
            std::vector<ValidationTask> tasks;
            for (const auto& s : util::read_jsonl<Suggestion>(suggestions)) {
                auto it = by_id.find(s.example_id);
                if (it == by_id.end()) throw SchemaError("suggestion " + s.suggestion_id + " refers to unknown example " + s.example_id);
                tasks.push_back(make_task(s, it->second));
            }
            auto verdicts = validate_all(tasks, repo, tc);
            util::write_jsonl(out, verdicts);
            auto f = summarize(verdicts);
            for (const auto& [stage, count] : f.stages) std::fprintf(stderr, "%-18s %zu\n", to_string(stage), count);
        } else if (bench->parsed()) {
            auto r = judge(load_summary(baseline), load_summary(candidate), alpha);
            for (const auto& w : r.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
            write_or_print(out, util::dump_pretty(util::json(r)));
        } else if (report->parsed()) {
            Report r = load_report(in_dir);
            std::cout << (format == "json" ? util::dump_pretty(util::json(r)) : render_text(r));
        } else if (run->parsed()) {
            Pipeline p(PipelineConfig::load(config));
            auto res = p.run(stages.empty() ? std::vector<std::string>{} : split_list(stages));
            for (const auto& s : res.stages) {
                std::fprintf(stderr, "%-15s %s\n", s.stage.c_str(), s.skipped ? "skipped (unchanged)" : "done");
                for (const auto& note : s.notes) std::fprintf(stderr, "    %s\n", note.c_str());
            }
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
