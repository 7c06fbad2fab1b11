#pragma once

// Model-ready input/output pairs with budgeted context, plus corpus-level
// dedup and project-level splitting.
//
// Input layout (categories in brackets are optional, all-or-nothing):
//
//   [using directives]
//   [class attributes]
//   /* edit */
//   <focal method, before version>
//   /* end */
//   [caller/callee methods, before versions]
//   [other method headers, each terminated by ';']
//
// Categories are considered in the order usings, class_attributes,
// caller_callee, other_signatures; each is kept only if the rendered input
// stays within the token budget.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "perfpatch/code_model.hpp"
#include "perfpatch/corpus_miner.hpp"
#include "perfpatch/error.hpp"
#include "perfpatch/util/jsonl.hpp"
#include "perfpatch/util/text.hpp"

namespace perfpatch {

// ---- tokenizer ----------------------------------------------------------------

namespace detail {
inline bool word_byte(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c >= 0x80;
}
}  // namespace detail

/// Maximal runs of word bytes (ASCII alphanumerics, '_', any byte >= 0x80)
/// are one token; every other non-whitespace byte is a token of its own.
inline std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (util::is_space(static_cast<char>(c))) {
            ++i;
        } else if (detail::word_byte(c)) {
            std::size_t j = i;
            while (j < text.size() && detail::word_byte(static_cast<unsigned char>(text[j]))) ++j;
            out.emplace_back(text.substr(i, j - i));
            i = j;
        } else {
            out.emplace_back(1, static_cast<char>(c));
            ++i;
        }
    }
    return out;
}

inline std::size_t count_tokens(std::string_view text) {
    std::size_t n = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        unsigned char c = static_cast<unsigned char>(text[i]);
        if (util::is_space(static_cast<char>(c))) {
            ++i;
            continue;
        }
        ++n;
        if (detail::word_byte(c))
            while (i < text.size() && detail::word_byte(static_cast<unsigned char>(text[i]))) ++i;
        else
            ++i;
    }
    return n;
}

// ---- examples ---------------------------------------------------------------------

inline const std::vector<std::string>& context_categories() {
    static const std::vector<std::string> kOrder = {"usings", "class_attributes", "caller_callee", "other_signatures"};
    return kOrder;
}

struct ExampleOptions {
    std::size_t budget = 1024;
    std::string begin_marker = "/* edit */";
    std::string end_marker = "/* end */";
};

struct TransformationExample {
    std::string example_id;
    std::string repo_id;
    std::string commit_id;
    std::string file_path;
    std::string class_name;
    std::string focal_signature;
    std::string input_text;
    std::string output_text;
    bool is_perf = false;
    std::vector<std::string> included_context;  // subset of context_categories(), in that order
    std::size_t token_count_input = 0;
};

inline void to_json(util::json& j, const TransformationExample& e) {
    j = util::json{{"example_id", e.example_id},
                   {"repo_id", e.repo_id},
                   {"commit_id", e.commit_id},
                   {"file_path", e.file_path},
                   {"class_name", e.class_name},
                   {"focal_signature", e.focal_signature},
                   {"input_text", e.input_text},
                   {"output_text", e.output_text},
                   {"is_perf", e.is_perf},
                   {"included_context", e.included_context},
                   {"token_count_input", e.token_count_input}};
}
inline void from_json(const util::json& j, TransformationExample& e) {
    j.at("example_id").get_to(e.example_id);
    j.at("repo_id").get_to(e.repo_id);
    e.commit_id = j.value("commit_id", std::string());
    e.file_path = j.value("file_path", std::string());
    e.class_name = j.value("class_name", std::string());
    j.at("focal_signature").get_to(e.focal_signature);
    j.at("input_text").get_to(e.input_text);
    j.at("output_text").get_to(e.output_text);
    e.is_perf = j.value("is_perf", false);
    e.included_context = j.value("included_context", std::vector<std::string>{});
    e.token_count_input = j.value("token_count_input", std::size_t{0});
}

struct BuiltInput {
    std::string text;
    std::vector<std::string> included_context;
    std::size_t token_count = 0;
};

namespace detail {

// Comment-free, dedented element text.
inline std::string clean_element(std::string_view text) {
    std::string stripped = csharp::strip_comments(text);
    std::string out;
    for (const auto& line : util::split_lines(stripped)) {
        std::string_view l = line;
        while (!l.empty() && util::is_space(l.back())) l.remove_suffix(1);
        out.append(l);
        out += '\n';
    }
    return util::dedent(out);
}

inline std::vector<const MethodModel*> related_methods(const ClassModel& cls, const MethodModel& focal) {
    std::vector<const MethodModel*> out;
    for (const auto& m : cls.methods) {
        if (m.signature == focal.signature) continue;
        if (focal.callees.count(m.signature) || focal.callers.count(m.signature)) out.push_back(&m);
    }
    return out;
}

struct InputParts {
    std::vector<std::string> usings;
    std::vector<std::string> attributes;
    std::string focal;
    std::vector<std::string> related;
    std::vector<std::string> signatures;
};

inline std::string render_input(const InputParts& p, const std::set<std::string>& with, const ExampleOptions& opt) {
    std::vector<std::string> sections;
    if (with.count("usings") && !p.usings.empty()) sections.push_back(util::join(p.usings, "\n"));
    if (with.count("class_attributes") && !p.attributes.empty()) sections.push_back(util::join(p.attributes, "\n"));
    sections.push_back(opt.begin_marker + "\n" + p.focal + "\n" + opt.end_marker);
    if (with.count("caller_callee"))
        for (const auto& r : p.related) sections.push_back(r);
    if (with.count("other_signatures") && !p.signatures.empty()) sections.push_back(util::join(p.signatures, "\n"));
    return util::join(sections, "\n\n") + "\n";
}

inline bool contains_marker(std::string_view text, const ExampleOptions& opt) {
    return text.find(opt.begin_marker) != std::string_view::npos || text.find(opt.end_marker) != std::string_view::npos;
}

}  // namespace detail

/// Throws FocalTooLarge when the marked focal method alone exceeds the
/// budget, MarkerCollision when an element already contains a marker.
inline BuiltInput build_input(const FocalMethodPair& pair, const SourceUnit& unit_before,
                              const ExampleOptions& opt = {}) {
    const ClassModel* cls = nullptr;
    for (const auto& c : unit_before.classes)
        if (c.name == pair.class_name && c.find(pair.signature)) cls = &c;
    if (!cls) throw SpliceFailure("focal method " + pair.signature + " not found in before version");
    const MethodModel& focal = *cls->find(pair.signature);

    detail::InputParts parts;
    parts.focal = detail::clean_element(focal.text);
    for (const auto& u : unit_before.using_statements) parts.usings.push_back(u);
    for (const auto& a : cls->attributes) parts.attributes.push_back(detail::clean_element(a.text));
    for (const auto* m : detail::related_methods(*cls, focal)) parts.related.push_back(detail::clean_element(m->text));
    for (const auto& m : cls->methods) {
        if (m.signature == focal.signature || focal.callees.count(m.signature) || focal.callers.count(m.signature))
            continue;
        parts.signatures.push_back(m.header + ";");
    }

    auto check = [&](const std::vector<std::string>& v) {
        for (const auto& s : v)
            if (detail::contains_marker(s, opt)) throw MarkerCollision("context element contains a marker");
    };
    if (detail::contains_marker(parts.focal, opt)) throw MarkerCollision("focal method contains a marker");
    check(parts.usings);
    check(parts.attributes);
    check(parts.related);
    check(parts.signatures);

    std::set<std::string> with;
    BuiltInput out;
    out.text = detail::render_input(parts, with, opt);
    out.token_count = count_tokens(out.text);
    if (out.token_count > opt.budget)
        throw FocalTooLarge(pair.signature + " needs " + std::to_string(out.token_count) + " tokens, budget " +
                            std::to_string(opt.budget));
    for (const auto& cat : context_categories()) {
        with.insert(cat);
        std::string candidate = detail::render_input(parts, with, opt);
        std::size_t n = count_tokens(candidate);
        if (n <= opt.budget) {
            out.text = std::move(candidate);
            out.token_count = n;
            out.included_context.push_back(cat);
        } else {
            with.erase(cat);
        }
    }
    return out;
}

/// Added imports, then added or modified attributes referenced by the
/// emitted methods, then the focal after-version, then caller/callee
/// methods of the focal (either version) that were added or modified.
inline std::string build_output(const FocalMethodPair& pair, const SourceUnit& unit_before,
                                const SourceUnit& unit_after) {
    const ClassModel* cls_after = nullptr;
    for (const auto& c : unit_after.classes)
        if (c.name == pair.class_name && c.find(pair.signature)) cls_after = &c;
    if (!cls_after) throw SpliceFailure("focal method " + pair.signature + " not found in after version");
    const ClassModel* cls_before = nullptr;
    for (const auto& c : unit_before.classes)
        if (c.name == pair.class_name) cls_before = &c;

    const MethodModel& focal_after = *cls_after->find(pair.signature);
    std::set<std::string> related = focal_after.callees;
    related.insert(focal_after.callers.begin(), focal_after.callers.end());
    if (cls_before)
        if (const auto* fb = cls_before->find(pair.signature)) {
            related.insert(fb->callees.begin(), fb->callees.end());
            related.insert(fb->callers.begin(), fb->callers.end());
        }
    related.erase(pair.signature);

    std::vector<const MethodModel*> emitted{&focal_after};
    for (const auto& m : cls_after->methods) {
        if (!related.count(m.signature)) continue;
        const MethodModel* prev = cls_before ? cls_before->find(m.signature) : nullptr;
        if (!prev || prev->normalized_body != m.normalized_body) emitted.push_back(&m);
    }

    std::vector<std::string> imports;
    for (const auto& u : unit_after.using_statements)
        if (std::find(unit_before.using_statements.begin(), unit_before.using_statements.end(), u) ==
            unit_before.using_statements.end())
            imports.push_back(u);

    std::set<std::string> used_names;
    for (const auto* m : emitted)
        for (auto& t : tokenize(csharp::strip_comments(m->text))) used_names.insert(std::move(t));
    std::set<std::string> old_attrs;
    if (cls_before)
        for (const auto& a : cls_before->attributes) old_attrs.insert(a.normalized);
    std::vector<std::string> attrs;
    for (const auto& a : cls_after->attributes) {
        if (old_attrs.count(a.normalized)) continue;
        bool referenced = std::any_of(a.names.begin(), a.names.end(), [&](const std::string& n) { return used_names.count(n) > 0; });
        if (referenced) attrs.push_back(detail::clean_element(a.text));
    }

    std::vector<std::string> sections;
    if (!imports.empty()) sections.push_back(util::join(imports, "\n"));
    if (!attrs.empty()) sections.push_back(util::join(attrs, "\n"));
    for (const auto* m : emitted) sections.push_back(detail::clean_element(m->text));
    return util::join(sections, "\n\n") + "\n";
}

struct BuildStats {
    std::size_t files = 0;
    std::size_t unparseable_files = 0;
    std::size_t pairs = 0;
    std::size_t emitted = 0;
    std::size_t focal_too_large = 0;
    std::size_t marker_collisions = 0;
    std::size_t unparsed_bodies = 0;
};

inline void to_json(util::json& j, const BuildStats& s) {
    j = util::json{{"files", s.files},
                   {"unparseable_files", s.unparseable_files},
                   {"pairs", s.pairs},
                   {"emitted", s.emitted},
                   {"focal_too_large", s.focal_too_large},
                   {"marker_collisions", s.marker_collisions},
                   {"unparsed_bodies", s.unparsed_bodies}};
}

inline std::string make_example_id(const std::string& repo, const std::string& commit, const std::string& path,
                                   const std::string& cls, const std::string& sig) {
    return util::content_hash(repo + '\n' + commit + '\n' + path + '\n' + cls + '\n' + sig);
}

/// Every focal method of every changed file in the commit.
inline std::vector<TransformationExample> build_examples(const CommitRecord& commit, const ExampleOptions& opt,
                                                         BuildStats& stats) {
    std::vector<TransformationExample> out;
    for (const auto& fc : commit.file_changes) {
        ++stats.files;
        if (fc.before_text.empty() || fc.after_text.empty()) continue;  // added or deleted file
        SourceUnit before, after;
        try {
            before = parse_source(fc.before_text);
            after = parse_source(fc.after_text);
        } catch (const UnparseableFile&) {
            ++stats.unparseable_files;
            continue;
        }
        for (const auto& pair : pair_methods(before, after)) {
            ++stats.pairs;
            if (!pair.before.body_parsed || !pair.after.body_parsed) {
                ++stats.unparsed_bodies;
                continue;
            }
            TransformationExample ex;
            try {
                BuiltInput in = build_input(pair, before, opt);
                ex.input_text = std::move(in.text);
                ex.included_context = std::move(in.included_context);
                ex.token_count_input = in.token_count;
            } catch (const FocalTooLarge&) {
                ++stats.focal_too_large;
                continue;
            } catch (const MarkerCollision&) {
                ++stats.marker_collisions;
                continue;
            }
            ex.output_text = build_output(pair, before, after);
            ex.repo_id = commit.repo_id;
            ex.commit_id = commit.commit_id;
            ex.file_path = fc.path;
            ex.class_name = pair.class_name;
            ex.focal_signature = pair.signature;
            ex.is_perf = commit.is_perf;
            ex.example_id = make_example_id(ex.repo_id, ex.commit_id, ex.file_path, ex.class_name, ex.focal_signature);
            ++stats.emitted;
            out.push_back(std::move(ex));
        }
    }
    return out;
}

/// The marked focal region of an input text (markers excluded), or empty
/// when the markers are missing.
inline std::string focal_region(std::string_view input, const ExampleOptions& opt = {}) {
    auto b = input.find(opt.begin_marker);
    if (b == std::string_view::npos) return {};
    b += opt.begin_marker.size();
    auto e = input.find(opt.end_marker, b);
    if (e == std::string_view::npos) return {};
    return util::trim(input.substr(b, e - b));
}

// ---- dedup --------------------------------------------------------------------------

/// Multiset Jaccard |A ∩ B| / |A ∪ B| over token counts.
inline double multiset_jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    if (a.empty() && b.empty()) return 1.0;
    std::map<std::string_view, std::pair<std::size_t, std::size_t>> counts;
    for (const auto& t : a) ++counts[t].first;
    for (const auto& t : b) ++counts[t].second;
    std::size_t inter = 0, uni = 0;
    for (const auto& [_, c] : counts) {
        inter += std::min(c.first, c.second);
        uni += std::max(c.first, c.second);
    }
    return static_cast<double>(inter) / static_cast<double>(uni);
}

struct DedupStats {
    std::size_t input = 0;
    std::size_t exact_removed = 0;
    std::size_t near_removed = 0;
};

namespace detail {

// Prefix-filtered similarity join. A multiset becomes a set of
// (token, occurrence) elements so multiset Jaccard equals set Jaccard;
// elements are ranked rarest first across the corpus. Two sets with
// Jaccard >= t must share an element within their first
// |x| - ceil(t |x|) + 1 ranked elements.
class NearDuplicateIndex {
public:
    NearDuplicateIndex(const std::vector<std::vector<std::uint32_t>>& records, double threshold)
        : records_(records), t_(threshold) {}

    bool similar_to_kept(std::size_t i) const {
        const auto& x = records_[i];
        std::size_t nx = x.size();
        if (nx == 0) return !empty_kept_.empty();
        std::size_t prefix = prefix_len(nx);
        std::unordered_set<std::size_t> tried;
        for (std::size_t p = 0; p < prefix && p < nx; ++p) {
            auto it = index_.find(x[p]);
            if (it == index_.end()) continue;
            for (std::size_t j : it->second) {
                if (!tried.insert(j).second) continue;
                std::size_t ny = records_[j].size();
                if (static_cast<double>(ny) < t_ * static_cast<double>(nx) - 1e-9 ||
                    static_cast<double>(ny) * t_ > static_cast<double>(nx) + 1e-9)
                    continue;
                if (jaccard(x, records_[j]) >= t_) return true;
            }
        }
        return false;
    }

    void keep(std::size_t i) {
        const auto& x = records_[i];
        if (x.empty()) {
            empty_kept_.push_back(i);
            return;
        }
        std::size_t prefix = prefix_len(x.size());
        for (std::size_t p = 0; p < prefix && p < x.size(); ++p) index_[x[p]].push_back(i);
    }

    static double jaccard(const std::vector<std::uint32_t>& a, const std::vector<std::uint32_t>& b) {
        // both sorted by rank, elements unique within a record
        std::size_t i = 0, j = 0, inter = 0;
        while (i < a.size() && j < b.size()) {
            if (a[i] == b[j]) {
                ++inter;
                ++i;
                ++j;
            } else if (a[i] < b[j]) {
                ++i;
            } else {
                ++j;
            }
        }
        std::size_t uni = a.size() + b.size() - inter;
        return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
    }

private:
    std::size_t prefix_len(std::size_t n) const {
        auto need = static_cast<std::size_t>(std::ceil(t_ * static_cast<double>(n) - 1e-9));
        return n - std::min(n, need) + 1;
    }

    const std::vector<std::vector<std::uint32_t>>& records_;
    double t_;
    std::unordered_map<std::uint32_t, std::vector<std::size_t>> index_;
    std::vector<std::size_t> empty_kept_;
};

}  // namespace detail

/// Drops exact duplicates of (input, output), then inputs whose token
/// multiset Jaccard with an already kept input reaches `threshold`. The
/// first occurrence always survives.
inline std::vector<TransformationExample> dedup(const std::vector<TransformationExample>& examples,
                                                double threshold = 0.9, DedupStats* stats = nullptr) {
    DedupStats local;
    local.input = examples.size();

    std::vector<std::size_t> unique;
    {
        std::unordered_set<std::string> seen;
        for (std::size_t i = 0; i < examples.size(); ++i) {
            std::string key = examples[i].input_text;
            key += '\0';
            key += examples[i].output_text;
            if (seen.insert(std::move(key)).second) unique.push_back(i);
            else ++local.exact_removed;
        }
    }

    // element = (token id, occurrence number), ranked by corpus frequency
    std::unordered_map<std::string, std::uint32_t> token_ids;
    std::vector<std::vector<std::uint64_t>> raw(unique.size());
    std::unordered_map<std::uint64_t, std::uint32_t> freq;
    for (std::size_t r = 0; r < unique.size(); ++r) {
        std::unordered_map<std::uint32_t, std::uint32_t> occ;
        for (auto& tok : tokenize(examples[unique[r]].input_text)) {
            auto [it, _] = token_ids.emplace(std::move(tok), static_cast<std::uint32_t>(token_ids.size()));
            std::uint64_t elem = (static_cast<std::uint64_t>(it->second) << 32) | occ[it->second]++;
            raw[r].push_back(elem);
            ++freq[elem];
        }
    }
    std::vector<std::pair<std::uint32_t, std::uint64_t>> order;
    order.reserve(freq.size());
    for (const auto& [elem, f] : freq) order.emplace_back(f, elem);
    std::sort(order.begin(), order.end());
    std::unordered_map<std::uint64_t, std::uint32_t> rank;
    rank.reserve(order.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) rank[order[i].second] = i;
    std::vector<std::vector<std::uint32_t>> records(unique.size());
    for (std::size_t r = 0; r < unique.size(); ++r) {
        records[r].reserve(raw[r].size());
        for (auto e : raw[r]) records[r].push_back(rank[e]);
        std::sort(records[r].begin(), records[r].end());
    }

    detail::NearDuplicateIndex index(records, threshold);
    std::vector<TransformationExample> out;
    for (std::size_t r = 0; r < unique.size(); ++r) {
        if (index.similar_to_kept(r)) {
            ++local.near_removed;
            continue;
        }
        index.keep(r);
        out.push_back(examples[unique[r]]);
    }
    if (stats) *stats = local;
    return out;
}

// ---- project split ------------------------------------------------------------------

struct DatasetSplit {
    std::vector<std::string> train;
    std::vector<std::string> validation;
    std::vector<std::string> test;
};

inline void to_json(util::json& j, const DatasetSplit& s) {
    j = util::json{{"train", s.train}, {"validation", s.validation}, {"test", s.test}};
}
inline void from_json(const util::json& j, DatasetSplit& s) {
    j.at("train").get_to(s.train);
    j.at("validation").get_to(s.validation);
    j.at("test").get_to(s.test);
}

namespace detail {

// Unbiased draw in [0, bound) by rejection; independent of the standard
// library's distribution implementations so splits agree across platforms.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
    std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    for (;;) {
        std::uint64_t v = rng();
        if (v < limit) return v % bound;
    }
}

}  // namespace detail

inline void validate_fractions(const std::vector<double>& fractions) {
    if (fractions.size() != 3) throw ConfigError("split fractions need exactly three values");
    double sum = 0;
    for (double f : fractions) {
        if (!(f >= 0.0) || !std::isfinite(f)) throw ConfigError("split fractions must be non-negative");
        sum += f;
    }
    if (std::fabs(sum - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
}

/// Sorted unique repos, Fisher-Yates shuffled with mt19937_64(seed), then
/// cut into train/validation/test by largest-remainder rounding.
inline DatasetSplit split_repos(std::vector<std::string> repos, const std::vector<double>& fractions,
                                std::uint64_t seed) {
    validate_fractions(fractions);
    std::sort(repos.begin(), repos.end());
    repos.erase(std::unique(repos.begin(), repos.end()), repos.end());
    std::mt19937_64 rng(seed);
    for (std::size_t i = repos.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(detail::bounded(rng, i));
        std::swap(repos[i - 1], repos[j]);
    }
    const std::size_t n = repos.size();
    std::size_t counts[3];
    double rem[3];
    std::size_t assigned = 0;
    for (int k = 0; k < 3; ++k) {
        double exact = fractions[static_cast<std::size_t>(k)] * static_cast<double>(n);
        counts[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        rem[k] = exact - static_cast<double>(counts[k]);
        assigned += counts[k];
    }
    while (assigned < n) {
        int best = 0;
        for (int k = 1; k < 3; ++k)
            if (rem[k] > rem[best] + 1e-12) best = k;
        ++counts[best];
        rem[best] = -1.0;
        ++assigned;
    }
    DatasetSplit s;
    auto it = repos.begin();
    s.train.assign(it, it + static_cast<std::ptrdiff_t>(counts[0]));
    it += static_cast<std::ptrdiff_t>(counts[0]);
    s.validation.assign(it, it + static_cast<std::ptrdiff_t>(counts[1]));
    it += static_cast<std::ptrdiff_t>(counts[1]);
    s.test.assign(it, repos.end());
    return s;
}

inline DatasetSplit split_by_project(const std::vector<TransformationExample>& examples,
                                     const std::vector<double>& fractions, std::uint64_t seed) {
    std::vector<std::string> repos;
    for (const auto& e : examples) repos.push_back(e.repo_id);
    return split_repos(std::move(repos), fractions, seed);
}

/// "train", "validation" or "test" for the example's repository.
inline std::string split_of(const DatasetSplit& s, const std::string& repo_id) {
    if (std::find(s.train.begin(), s.train.end(), repo_id) != s.train.end()) return "train";
    if (std::find(s.validation.begin(), s.validation.end(), repo_id) != s.validation.end()) return "validation";
    if (std::find(s.test.begin(), s.test.end(), repo_id) != s.test.end()) return "test";
    return {};
}

}  // namespace perfpatch
