#pragma once

// Git history mining through the `git` command line. Commits are listed
// newest first in topological order; every commit is diffed against its
// first parent (the empty tree for a root commit) without rename detection,
// so a rename shows up as a delete plus an add.

#include <algorithm>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "perfpatch/error.hpp"
#include "perfpatch/util/jsonl.hpp"
#include "perfpatch/util/process.hpp"
#include "perfpatch/util/text.hpp"

namespace perfpatch {

struct FileChange {
    std::string path;
    std::string before_text;  // empty when the file was added
    std::string after_text;   // empty when the file was deleted
};

struct CommitRecord {
    std::string repo_id;
    std::string commit_id;
    std::string parent_id;  // empty for a root commit
    std::string message;
    bool is_perf = false;
    std::vector<FileChange> file_changes;
};

inline void to_json(util::json& j, const FileChange& f) {
    j = util::json{{"path", f.path}, {"before_text", f.before_text}, {"after_text", f.after_text}};
}
inline void from_json(const util::json& j, FileChange& f) {
    j.at("path").get_to(f.path);
    j.at("before_text").get_to(f.before_text);
    j.at("after_text").get_to(f.after_text);
}
inline void to_json(util::json& j, const CommitRecord& c) {
    j = util::json{{"repo_id", c.repo_id},   {"commit_id", c.commit_id}, {"parent_id", c.parent_id},
                   {"message", c.message},   {"is_perf", c.is_perf},     {"file_changes", c.file_changes}};
}
inline void from_json(const util::json& j, CommitRecord& c) {
    c.repo_id = j.value("repo_id", std::string());
    j.at("commit_id").get_to(c.commit_id);
    c.parent_id = j.value("parent_id", std::string());
    j.at("message").get_to(c.message);
    j.at("is_perf").get_to(c.is_perf);
    j.at("file_changes").get_to(c.file_changes);
}

inline const std::vector<std::string>& default_perf_keywords() {
    static const std::vector<std::string> kKeywords = {"perf",   "performance", "reduce allocation", "optimiz",
                                                       "speed up", "faster",    "memory usage",      "alloc"};
    return kKeywords;
}

/// Case-insensitive substring match against any keyword.
inline bool classify_perf_commit(std::string_view message,
                                 const std::vector<std::string>& keywords = default_perf_keywords()) {
    std::string lower = util::to_lower(message);
    for (const auto& k : keywords) {
        std::string lk = util::to_lower(k);
        if (!lk.empty() && lower.find(lk) != std::string::npos) return true;
    }
    return false;
}

struct MinerOptions {
    std::vector<std::string> keywords = default_perf_keywords();
    std::string extension = ".cs";
    std::string repo_id;  // defaults to the repository directory name
    std::size_t max_commits = 0;  // 0 = unlimited
    std::string git = "git";
};

namespace detail {

inline util::ProcessResult git(const MinerOptions& opt, const std::filesystem::path& repo,
                               std::vector<std::string> args) {
    std::vector<std::string> argv{opt.git, "-C", repo.string()};
    argv.insert(argv.end(), args.begin(), args.end());
    util::ProcessOptions po;
    po.merge_stderr = false;
    auto r = util::run_process(argv, po);
    if (r.exit_status == 127) throw CommandNotFound("cannot execute '" + opt.git + "'");
    return r;
}

inline std::string read_blob(const MinerOptions& opt, const std::filesystem::path& repo, const std::string& sha) {
    if (sha.find_first_not_of('0') == std::string::npos) return {};
    auto r = git(opt, repo, {"cat-file", "blob", sha});
    if (r.exit_status != 0) throw RepositoryUnreadable("cannot read blob " + sha + " in " + repo.string());
    return r.output;
}

struct LogEntry {
    std::string id;
    std::string parent;
    std::string message;
};

inline std::vector<LogEntry> list_commits(const MinerOptions& opt, const std::filesystem::path& repo,
                                          const std::string& branch) {
    std::vector<std::string> args{"log", "--topo-order", "--format=%H%x1f%P%x1f%B%x1e"};
    if (opt.max_commits > 0) args.push_back("-n" + std::to_string(opt.max_commits));
    args.push_back(branch);
    args.push_back("--");
    auto r = git(opt, repo, args);
    if (r.exit_status != 0) throw RepositoryUnreadable("git log failed for " + repo.string());
    std::vector<LogEntry> out;
    for (const auto& rec : util::split(r.output, '\x1e')) {
        std::string_view chunk = rec;
        while (!chunk.empty() && chunk.front() == '\n') chunk.remove_prefix(1);
        if (chunk.empty()) continue;
        auto fields = util::split(chunk, '\x1f');
        if (fields.size() < 3) continue;
        LogEntry e;
        e.id = fields[0];
        auto parents = util::split(fields[1], ' ');
        if (!parents.empty()) e.parent = parents.front();
        e.message = fields[2];
        while (!e.message.empty() && e.message.back() == '\n') e.message.pop_back();
        out.push_back(std::move(e));
    }
    return out;
}

inline std::vector<FileChange> changed_files(const MinerOptions& opt, const std::filesystem::path& repo,
                                             const LogEntry& c) {
    std::vector<std::string> args{"diff-tree", "-r", "--no-renames", "--no-commit-id", "--raw", "-z"};
    if (c.parent.empty()) {
        args.push_back("--root");
        args.push_back(c.id);
    } else {
        args.push_back(c.parent);
        args.push_back(c.id);
    }
    auto r = git(opt, repo, args);
    if (r.exit_status != 0) throw RepositoryUnreadable("git diff-tree failed for " + c.id);
    std::vector<FileChange> out;
    auto parts = util::split(r.output, '\0');
    for (std::size_t i = 0; i + 1 < parts.size(); i += 2) {
        // ":<old mode> <new mode> <old sha> <new sha> <status>" then path
        auto meta = util::split(parts[i], ' ');
        const std::string& path = parts[i + 1];
        if (meta.size() < 5 || !util::ends_with(path, opt.extension)) continue;
        if (meta[0] == ":160000" || meta[1] == "160000") continue;  // submodule
        if (meta[2] == meta[3]) continue;
        FileChange fc;
        fc.path = path;
        fc.before_text = read_blob(opt, repo, meta[2]);
        fc.after_text = read_blob(opt, repo, meta[3]);
        if (fc.before_text == fc.after_text) continue;
        out.push_back(std::move(fc));
    }
    std::sort(out.begin(), out.end(), [](const FileChange& a, const FileChange& b) { return a.path < b.path; });
    return out;
}

}  // namespace detail

/// Streams records newest to oldest. Throws RepositoryUnreadable or
/// BranchNotFound before the first record.
inline void crawl_history(const std::filesystem::path& repo, const std::string& branch, const MinerOptions& opt,
                          const std::function<void(CommitRecord&&)>& sink) {
    if (!std::filesystem::is_directory(repo)) throw RepositoryUnreadable("not a directory: " + repo.string());
    auto bare = detail::git(opt, repo, {"rev-parse", "--is-bare-repository"});
    if (bare.exit_status != 0) throw RepositoryUnreadable("not a git repository: " + repo.string());
    if (util::trim(bare.output) != "true") {
        // a plain directory nested inside some other work tree is not a repository
        auto top = detail::git(opt, repo, {"rev-parse", "--show-toplevel"});
        std::error_code ec;
        if (top.exit_status != 0 ||
            !std::filesystem::equivalent(std::filesystem::path(util::trim(top.output)), repo, ec))
            throw RepositoryUnreadable("not the root of a git work tree: " + repo.string());
    }
    if (detail::git(opt, repo, {"rev-parse", "--verify", "--quiet", branch + "^{commit}"}).exit_status != 0)
        throw BranchNotFound("branch not found: " + branch);

    std::string repo_id = opt.repo_id;
    if (repo_id.empty()) repo_id = std::filesystem::weakly_canonical(repo).filename().string();
    for (auto& entry : detail::list_commits(opt, repo, branch)) {
        CommitRecord rec;
        rec.repo_id = repo_id;
        rec.commit_id = entry.id;
        rec.parent_id = entry.parent;
        rec.message = entry.message;
        rec.is_perf = classify_perf_commit(rec.message, opt.keywords);
        rec.file_changes = detail::changed_files(opt, repo, entry);
        sink(std::move(rec));
    }
}

inline std::vector<CommitRecord> crawl_history(const std::filesystem::path& repo, const std::string& branch,
                                               const MinerOptions& opt = {}) {
    std::vector<CommitRecord> out;
    crawl_history(repo, branch, opt, [&](CommitRecord&& r) { out.push_back(std::move(r)); });
    return out;
}

/// Performance commits that change exactly one subject-language file.
inline std::vector<CommitRecord> mine_single_file_perf_commits(const std::filesystem::path& repo,
                                                               const std::string& branch = "main",
                                                               const MinerOptions& opt = {}) {
    std::vector<CommitRecord> out;
    crawl_history(repo, branch, opt, [&](CommitRecord&& r) {
        if (r.is_perf && r.file_changes.size() == 1) out.push_back(std::move(r));
    });
    return out;
}

}  // namespace perfpatch
