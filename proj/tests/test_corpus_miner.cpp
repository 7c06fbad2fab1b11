#include <gtest/gtest.h>

#include "perfpatch.hpp"
#include "test_support.hpp"

using namespace perfpatch;
using testing_support::GitRepo;
using testing_support::TempDir;

// ---- classification ---------------------------------------------------------------------

TEST(Classify, Examples) {
    EXPECT_TRUE(classify_perf_commit("Reduce allocation in lexer"));
    EXPECT_FALSE(classify_perf_commit(""));
    EXPECT_TRUE(classify_perf_commit("Improve PERFORMANCE of parser"));
    EXPECT_FALSE(classify_perf_commit("Fix typo in README"));
}

TEST(Classify, CaseInvariant) {
    for (const std::string msg : {"speed up tokenizer", "Faster hashing", "avoid extra ALLOCATIONS", "rename things"}) {
        bool base = classify_perf_commit(msg);
        EXPECT_EQ(classify_perf_commit(util::to_upper(msg)), base) << msg;
        EXPECT_EQ(classify_perf_commit(util::to_lower(msg)), base) << msg;
    }
}

TEST(Classify, CustomKeywords) {
    EXPECT_TRUE(classify_perf_commit("Tune cache eviction", {"cache"}));
    EXPECT_FALSE(classify_perf_commit("Reduce allocation", {"cache"}));
}

// ---- crawling ---------------------------------------------------------------------------

class CrawlTest : public ::testing::Test {
protected:
    TempDir dir{"crawl"};
};

TEST_F(CrawlTest, ThreeCommitsOneTouchingSource) {
    GitRepo repo(dir / "r");
    repo.write("README.md", "hello\n");
    repo.commit("Initial");
    repo.write("notes.txt", "n\n");
    repo.commit("Add notes");
    repo.write("a.cs", "class A { }\n");
    repo.commit("Add A");

    auto recs = crawl_history(repo.root(), "main");
    ASSERT_EQ(recs.size(), 3u);
    std::size_t with_changes = 0;
    for (const auto& r : recs)
        if (!r.file_changes.empty()) {
            ++with_changes;
            ASSERT_EQ(r.file_changes.size(), 1u);
            EXPECT_EQ(r.file_changes[0].path, "a.cs");
            EXPECT_EQ(r.file_changes[0].before_text, "");
            EXPECT_EQ(r.file_changes[0].after_text, "class A { }\n");
        }
    EXPECT_EQ(with_changes, 1u);
    EXPECT_EQ(recs[0].message, "Add A");
    EXPECT_EQ(recs[0].repo_id, "r");
}

TEST_F(CrawlTest, ReadmeOnlyCommitHasNoFileChanges) {
    GitRepo repo(dir / "r");
    repo.write("a.cs", "class A { }\n");
    repo.commit("Initial");
    repo.write("README.md", "docs\n");
    repo.commit("Document the project");
    auto recs = crawl_history(repo.root(), "main");
    ASSERT_EQ(recs.size(), 2u);
    EXPECT_TRUE(recs[0].file_changes.empty());
}

TEST_F(CrawlTest, WhitespaceOnlyChangeIsEmitted) {
    GitRepo repo(dir / "r");
    repo.write("a.cs", "class A { int x = 1; }\n");
    repo.commit("Initial");
    repo.write("a.cs", "class A {  int x  =  1; }\n");
    repo.commit("Optimize spacing");
    auto recs = crawl_history(repo.root(), "main");
    ASSERT_EQ(recs[0].file_changes.size(), 1u);
    EXPECT_NE(recs[0].file_changes[0].before_text, recs[0].file_changes[0].after_text);
    EXPECT_TRUE(recs[0].is_perf);
}

TEST_F(CrawlTest, ParentAndBeforeTextMatchHistory) {
    GitRepo repo(dir / "r");
    repo.write("a.cs", "class A { }\n");
    std::string first = repo.commit("Initial");
    repo.write("a.cs", "class A { void F() { } }\n");
    repo.commit("Faster F");
    auto recs = crawl_history(repo.root(), "main");
    EXPECT_EQ(recs[0].parent_id, first);
    EXPECT_EQ(recs[0].file_changes[0].before_text, "class A { }\n");
    EXPECT_TRUE(recs[1].parent_id.empty());
}

TEST_F(CrawlTest, DeletedFileHasEmptyAfterText) {
    GitRepo repo(dir / "r");
    repo.write("a.cs", "class A { }\n");
    repo.write("b.cs", "class B { }\n");
    repo.commit("Initial");
    repo.remove("b.cs");
    repo.commit("Drop B");
    auto recs = crawl_history(repo.root(), "main");
    ASSERT_EQ(recs[0].file_changes.size(), 1u);
    EXPECT_EQ(recs[0].file_changes[0].path, "b.cs");
    EXPECT_TRUE(recs[0].file_changes[0].after_text.empty());
}

TEST_F(CrawlTest, MaxCommitsStopsEarly) {
    GitRepo repo(dir / "r");
    for (int i = 0; i < 4; ++i) {
        repo.write("a.cs", "class A { int v = " + std::to_string(i) + "; }\n");
        repo.commit("Step " + std::to_string(i));
    }
    MinerOptions opt;
    opt.max_commits = 2;
    EXPECT_EQ(crawl_history(repo.root(), "main", opt).size(), 2u);
}

TEST_F(CrawlTest, Deterministic) {
    GitRepo repo(dir / "r");
    repo.write("a.cs", "class A { }\n");
    repo.commit("Initial");
    repo.write("a.cs", "class A { void F() { } }\n");
    repo.write("b.cs", "class B { }\n");
    repo.commit("Speed up A");
    auto a = util::to_jsonl(crawl_history(repo.root(), "main"));
    auto b = util::to_jsonl(crawl_history(repo.root(), "main"));
    EXPECT_EQ(a, b);
}

TEST_F(CrawlTest, Errors) {
    EXPECT_THROW(crawl_history(dir / "missing", "main"), RepositoryUnreadable);
    std::filesystem::create_directories(dir / "plain");
    EXPECT_THROW(crawl_history(dir / "plain", "main"), RepositoryUnreadable);
    GitRepo repo(dir / "r");
    repo.write("a.cs", "class A { }\n");
    repo.commit("Initial");
    EXPECT_THROW(crawl_history(repo.root(), "no-such-branch"), BranchNotFound);
}

// ---- single-file filter ----------------------------------------------------------------------

TEST_F(CrawlTest, SingleFilePerfFilter) {
    GitRepo repo(dir / "r");
    repo.write("a.cs", "class A { }\n");
    repo.write("b.cs", "class B { }\n");
    repo.commit("Initial");
    repo.write("a.cs", "class A { int x; }\n");
    repo.write("b.cs", "class B { int y; }\n");
    repo.commit("Improve performance of A and B");
    repo.write("a.cs", "class A { int z; }\n");
    std::string single = repo.commit("Reduce allocation in A");
    repo.write("b.cs", "class B { int w; }\n");
    repo.commit("Rename field in B");

    auto mined = mine_single_file_perf_commits(repo.root());
    ASSERT_EQ(mined.size(), 1u);
    EXPECT_EQ(mined[0].commit_id, single);
    EXPECT_EQ(mined[0].file_changes.size(), 1u);
}

TEST_F(CrawlTest, NoPerfCommitsGivesEmpty) {
    GitRepo repo(dir / "r");
    repo.write("a.cs", "class A { }\n");
    repo.commit("Initial");
    repo.write("a.cs", "class A { int x; }\n");
    repo.commit("Add a field");
    EXPECT_TRUE(mine_single_file_perf_commits(repo.root()).empty());
}

TEST(MiniRepo, PlantedCommitIsMined) {
    TempDir dir("mini");
    auto root = testing_support::build_minirepo(dir / "minirepo");
    auto mined = mine_single_file_perf_commits(root);
    std::vector<std::string> messages;
    for (const auto& m : mined) messages.push_back(util::split_lines(m.message).front());
    EXPECT_NE(std::find(messages.begin(), messages.end(), "Reduce allocation in Report.Describe"), messages.end());
    // the two-file perf commit is excluded
    EXPECT_EQ(std::find(messages.begin(), messages.end(), "Faster counting in TextUtil and Report"), messages.end());
}

TEST(Records, JsonRoundTrip) {
    CommitRecord c{"repo", "abc", "def", "msg", true, {{"a.cs", "x", "y"}}};
    auto back = util::from_jsonl<CommitRecord>(util::to_jsonl(std::vector<CommitRecord>{c}));
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0].commit_id, "abc");
    EXPECT_EQ(back[0].file_changes[0].after_text, "y");
    EXPECT_TRUE(back[0].is_perf);
}
