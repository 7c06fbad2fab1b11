#pragma once

// Scoring of suggestions against developer patches: verbatim and
// abstracted match, CodeBLEU, closest-match retrieval and top-K accuracy.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "perfpatch/code_model.hpp"
#include "perfpatch/csharp/lexer.hpp"
#include "perfpatch/csharp/parser.hpp"
#include "perfpatch/error.hpp"
#include "perfpatch/example_builder.hpp"
#include "perfpatch/suggestion_engine.hpp"
#include "perfpatch/util/jsonl.hpp"
#include "perfpatch/util/text.hpp"

namespace perfpatch {

// ---- verbatim / abstracted -----------------------------------------------------------

/// Patch text in comparison form: one line per import, attribute and
/// method, each comment-free with whitespace collapsed. Text that does not
/// parse as a patch is normalized as a whole.
inline std::string canonical_patch(std::string_view text) {
    try {
        SourceUnit unit = parse_fragment(text);
        std::vector<std::string> lines;
        for (const auto& u : unit.using_statements) lines.push_back(util::collapse_whitespace(u));
        for (const auto& c : unit.classes) {
            for (const auto& a : c.attributes) lines.push_back(a.normalized);
            for (const auto& m : c.methods) lines.push_back(normalize_body(m.text));
        }
        // nested types and anything the model did not capture still count
        if (lines.empty()) return normalize_body(text);
        return util::join(lines, "\n");
    } catch (const UnparseableFile&) {
        return normalize_body(text);
    }
}

inline bool verbatim_equal(std::string_view suggestion, std::string_view truth) {
    return canonical_patch(suggestion) == canonical_patch(truth);
}

/// Abstracted comparison form, or nullopt when the text cannot be parsed
/// for abstraction.
inline std::optional<std::string> abstracted_form(std::string_view text) {
    try {
        return canonical_patch(abstract_variables(text));
    } catch (const AbstractionParseError&) {
        return std::nullopt;
    }
}

inline bool verbatim_match(const std::vector<std::string>& suggestions, std::string_view truth) {
    std::string t = canonical_patch(truth);
    return std::any_of(suggestions.begin(), suggestions.end(),
                       [&](const std::string& s) { return canonical_patch(s) == t; });
}

/// Verbatim match, or equality after variable abstraction. Texts that fail
/// to parse never match by abstraction.
inline bool abstracted_match(const std::vector<std::string>& suggestions, std::string_view truth) {
    if (verbatim_match(suggestions, truth)) return true;
    auto t = abstracted_form(truth);
    if (!t) return false;
    for (const auto& s : suggestions) {
        auto a = abstracted_form(s);
        if (a && *a == *t) return true;
    }
    return false;
}

// ---- CodeBLEU --------------------------------------------------------------------------

struct CodeBleuWeights {
    double alpha = 0.1;  // BLEU
    double beta = 0.1;   // keyword-weighted BLEU
    double gamma = 0.4;  // syntax subtree match
    double delta = 0.4;  // dataflow match

    void validate() const {
        for (double w : {alpha, beta, gamma, delta})
            if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("CodeBLEU weights must be non-negative");
        if (std::fabs(alpha + beta + gamma + delta - 1.0) > 1e-9) throw ConfigError("CodeBLEU weights must sum to 1");
    }
};

struct CodeBleuParts {
    double bleu = 0.0;
    double weighted_bleu = 0.0;
    double syntax = 0.0;
    double dataflow = 0.0;
    double score = 0.0;
};

/// Lexer tokens without comments. Throws TokenizationFailure.
inline std::vector<std::string> code_tokens(std::string_view text) {
    std::vector<std::string> out;
    for (const auto& t : csharp::tokenize_strict(text))
        if (t.kind != csharp::TokenKind::Comment && t.kind != csharp::TokenKind::End) out.push_back(t.text);
    return out;
}

namespace detail {

inline std::map<std::vector<std::string>, std::size_t> ngrams(const std::vector<std::string>& toks, std::size_t n) {
    std::map<std::vector<std::string>, std::size_t> out;
    if (toks.size() < n) return out;
    for (std::size_t i = 0; i + n <= toks.size(); ++i)
        ++out[std::vector<std::string>(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                       toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
    return out;
}

inline double brevity_penalty(std::size_t c, std::size_t r) {
    if (c == 0) return 0.0;
    if (c > r) return 1.0;
    return std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
}

// Weighted clipped n-gram precision with add-one smoothing.
inline double smoothed_precision(const std::vector<std::string>& cand, const std::vector<std::string>& ref,
                                 std::size_t n, const std::function<double(const std::vector<std::string>&)>& weight) {
    auto c = ngrams(cand, n);
    auto r = ngrams(ref, n);
    double num = 0.0, den = 0.0;
    for (const auto& [g, cnt] : c) {
        double w = weight(g);
        auto it = r.find(g);
        std::size_t clip = it == r.end() ? 0 : std::min(cnt, it->second);
        num += w * static_cast<double>(clip);
        den += w * static_cast<double>(cnt);
    }
    return (num + 1.0) / (den + 1.0);
}

inline double bleu_with(const std::vector<std::string>& cand, const std::vector<std::string>& ref,
                        const std::function<double(const std::vector<std::string>&)>& weight) {
    if (cand.empty() && ref.empty()) return 1.0;
    double log_sum = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) log_sum += 0.25 * std::log(smoothed_precision(cand, ref, n, weight));
    return brevity_penalty(cand.size(), ref.size()) * std::exp(log_sum);
}

inline std::optional<Node> parse_for_metrics(std::string_view text) {
    auto res = csharp::parse_snippet(text);
    if (!res.ok()) return std::nullopt;
    return std::move(res.root);
}

inline std::map<std::string, std::size_t> subtrees(const Node& root) {
    std::map<std::string, std::size_t> out;
    csharp::walk(root, [&](const Node& n, const Node* parent) {
        // the synthetic root wrapper carries no syntax of its own
        if (parent && !n.children.empty()) ++out[csharp::sexp(n)];
        return true;
    });
    return out;
}

// Def-use relations over abstracted variables:
//   "VAR_t<-VAR_s"       t is assigned from an expression reading s
//   "VAR_v@<context>"    v is read directly under a node of that kind
inline std::map<std::string, std::size_t> dataflow_edges(const Node& root) {
    auto vars = collect_variables(root);
    std::map<const Node*, const VariableOccurrence*> by_node;
    for (const auto& v : vars) by_node[v.node] = &v;
    std::map<std::string, std::size_t> edges;

    auto reads_in = [&](const Node& expr) {
        std::vector<int> ids;
        csharp::walk(expr, [&](const Node& n, const Node*) {
            auto it = by_node.find(&n);
            if (it != by_node.end() && !it->second->declaration) ids.push_back(it->second->id);
            return n.kind != "lambda_expression";
        });
        return ids;
    };
    auto name = [](int id) { return "VAR_" + std::to_string(id); };

    csharp::walk(root, [&](const Node& n, const Node* parent) {
        if (n.kind == "variable_declarator" && n.children.size() >= 2) {
            auto it = by_node.find(&n.children[0]);
            if (it != by_node.end())
                for (int s : reads_in(n.children[1])) ++edges[name(it->second->id) + "<-" + name(s)];
        } else if (n.kind == "assignment_expression" && n.children.size() == 2) {
            auto it = by_node.find(&n.children[0]);
            if (it != by_node.end()) {
                for (int s : reads_in(n.children[1])) ++edges[name(it->second->id) + "<-" + name(s)];
                if (n.text != "=") ++edges[name(it->second->id) + "<-" + name(it->second->id)];
            }
        } else if (n.kind == "foreach_statement" && n.children.size() >= 3) {
            auto it = by_node.find(&n.children[1]);
            if (it != by_node.end())
                for (int s : reads_in(n.children[2])) ++edges[name(it->second->id) + "<-" + name(s)];
        }
        auto it = by_node.find(&n);
        if (it != by_node.end() && !it->second->declaration && parent) ++edges[name(it->second->id) + "@" + parent->kind];
        return true;
    });
    return edges;
}

// Fraction of reference items (with multiplicity) present in the candidate.
inline double clipped_recall(const std::map<std::string, std::size_t>& cand, const std::map<std::string, std::size_t>& ref) {
    std::size_t total = 0, hit = 0;
    for (const auto& [k, c] : ref) {
        total += c;
        auto it = cand.find(k);
        if (it != cand.end()) hit += std::min(c, it->second);
    }
    return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

}  // namespace detail

inline double bleu(const std::vector<std::string>& cand, const std::vector<std::string>& ref) {
    return detail::bleu_with(cand, ref, [](const std::vector<std::string>&) { return 1.0; });
}

/// Keyword unigrams count `keyword_weight` times; longer n-grams count once.
inline double weighted_bleu(const std::vector<std::string>& cand, const std::vector<std::string>& ref,
                            double keyword_weight = 5.0) {
    return detail::bleu_with(cand, ref, [&](const std::vector<std::string>& g) {
        return g.size() == 1 && csharp::is_reserved_keyword(g[0]) ? keyword_weight : 1.0;
    });
}

inline CodeBleuParts codebleu_parts(std::string_view candidate, std::string_view reference,
                                    const CodeBleuWeights& w = {}) {
    w.validate();
    auto ct = code_tokens(candidate);
    auto rt = code_tokens(reference);
    CodeBleuParts p;
    p.bleu = bleu(ct, rt);
    p.weighted_bleu = weighted_bleu(ct, rt);

    auto cn = detail::parse_for_metrics(candidate);
    auto rn = detail::parse_for_metrics(reference);
    std::map<std::string, std::size_t> cs, rs, ce, re;
    if (cn) {
        cs = detail::subtrees(*cn);
        ce = detail::dataflow_edges(*cn);
    }
    if (rn) {
        rs = detail::subtrees(*rn);
        re = detail::dataflow_edges(*rn);
    }
    p.syntax = (cs.empty() || rs.empty()) ? p.bleu : detail::clipped_recall(cs, rs);
    p.dataflow = (ce.empty() || re.empty()) ? p.syntax : detail::clipped_recall(ce, re);
    double s = w.alpha * p.bleu + w.beta * p.weighted_bleu + w.gamma * p.syntax + w.delta * p.dataflow;
    p.score = std::clamp(s, 0.0, 1.0);
    return p;
}

inline double codebleu(std::string_view candidate, std::string_view reference, const CodeBleuWeights& w = {}) {
    return codebleu_parts(candidate, reference, w).score;
}

// ---- closest match -------------------------------------------------------------------------

struct ClosestMatch {
    std::size_t index = 0;  // position in the suggestion list
    std::size_t rank = 0;   // likelihood rank of that suggestion
    double similarity = 0.0;
};

/// Token bigrams plus parent>child node-kind pairs, as counts.
inline std::map<std::string, double> retrieval_features(std::string_view text) {
    std::map<std::string, double> f;
    std::vector<std::string> toks;
    try {
        toks = code_tokens(text);
    } catch (const TokenizationFailure&) {
        toks = tokenize(text);
    }
    for (std::size_t i = 0; i + 1 < toks.size(); ++i) f["t:" + toks[i] + " " + toks[i + 1]] += 1.0;
    if (toks.size() == 1) f["t:" + toks[0]] += 1.0;
    if (auto root = detail::parse_for_metrics(text)) {
        csharp::walk(*root, [&](const Node& n, const Node* parent) {
            if (parent) f["p:" + parent->kind + ">" + n.kind] += 1.0;
            return true;
        });
    }
    return f;
}

inline double cosine(const std::map<std::string, double>& a, const std::map<std::string, double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (const auto& [k, v] : a) {
        na += v * v;
        auto it = b.find(k);
        if (it != b.end()) dot += v * it->second;
    }
    for (const auto& [k, v] : b) nb += v * v;
    if (na == 0 || nb == 0) return (na == 0 && nb == 0) ? 1.0 : 0.0;
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
}

inline double retrieval_similarity(std::string_view a, std::string_view b) {
    return cosine(retrieval_features(a), retrieval_features(b));
}

/// Most similar suggestion to the truth; ties go to the better rank.
inline std::optional<ClosestMatch> closest_match(const std::vector<Suggestion>& suggestions, std::string_view truth) {
    if (suggestions.empty()) return std::nullopt;
    auto tf = retrieval_features(truth);
    std::optional<ClosestMatch> best;
    for (std::size_t i = 0; i < suggestions.size(); ++i) {
        double sim = cosine(retrieval_features(suggestions[i].patch_text), tf);
        std::size_t rank = suggestions[i].rank == 0 ? i + 1 : suggestions[i].rank;
        if (!best || sim > best->similarity + 1e-12 ||
            (std::fabs(sim - best->similarity) <= 1e-12 && rank < best->rank))
            best = ClosestMatch{i, rank, sim};
    }
    return best;
}

// ---- top-K ---------------------------------------------------------------------------------

struct Judgment {
    std::string example_id;
    bool accepted = false;
    std::size_t rank = 0;
};

/// CSV with header `example_id,accepted,rank`; accepted is true/false,
/// yes/no or 1/0.
inline std::vector<Judgment> parse_judgments(std::string_view csv, const std::string& origin = "<judgments>") {
    std::vector<Judgment> out;
    auto lines = util::split_lines(csv);
    std::size_t row = 0;
    std::map<std::string, std::size_t> col;
    for (const auto& raw : lines) {
        ++row;
        std::string line = util::trim(raw);
        if (line.empty()) continue;
        auto cells = util::split(line, ',');
        for (auto& c : cells) c = util::trim(c);
        if (col.empty()) {
            for (std::size_t i = 0; i < cells.size(); ++i) col[util::to_lower(cells[i])] = i;
            for (const char* need : {"example_id", "accepted", "rank"})
                if (!col.count(need)) throw SchemaError(origin + ": missing column '" + need + "'");
            continue;
        }
        if (cells.size() < col.size()) throw SchemaError(origin + ":" + std::to_string(row) + ": too few cells");
        Judgment j;
        j.example_id = cells[col["example_id"]];
        std::string acc = util::to_lower(cells[col["accepted"]]);
        if (acc == "true" || acc == "yes" || acc == "1") j.accepted = true;
        else if (acc == "false" || acc == "no" || acc == "0") j.accepted = false;
        else throw SchemaError(origin + ":" + std::to_string(row) + ": column 'accepted': bad value '" + acc + "'");
        try {
            j.rank = static_cast<std::size_t>(std::stoul(cells[col["rank"]]));
        } catch (const std::exception&) {
            throw SchemaError(origin + ":" + std::to_string(row) + ": column 'rank': not an integer");
        }
        out.push_back(std::move(j));
    }
    return out;
}

inline std::map<std::size_t, double> topk_accuracy(const std::vector<Judgment>& judgments,
                                                   const std::vector<std::size_t>& ks = {1, 10, 100, 500}) {
    std::map<std::size_t, double> out;
    for (std::size_t k : ks) {
        if (judgments.empty()) {
            out[k] = 0.0;
            continue;
        }
        std::size_t hit = 0;
        for (const auto& j : judgments)
            if (j.accepted && j.rank >= 1 && j.rank <= k) ++hit;
        out[k] = 100.0 * static_cast<double>(hit) / static_cast<double>(judgments.size());
    }
    return out;
}

// ---- report --------------------------------------------------------------------------------

struct ExampleScore {
    std::string example_id;
    std::size_t suggestions = 0;
    bool verbatim = false;
    bool abstracted = false;
    double codebleu = 0.0;  // rank-1 suggestion against the truth
    std::optional<std::size_t> closest_rank;
    double closest_similarity = 0.0;
};

struct MetricReport {
    std::size_t examples = 0;
    double verbatim_pct = 0.0;
    double abstracted_pct = 0.0;
    double codebleu_mean = 0.0;
    std::map<std::size_t, double> topk_accuracy;
    std::vector<ExampleScore> per_example;
};

inline void to_json(util::json& j, const ExampleScore& s) {
    j = util::json{{"example_id", s.example_id}, {"suggestions", s.suggestions},
                   {"verbatim", s.verbatim},     {"abstracted", s.abstracted},
                   {"codebleu", s.codebleu},     {"closest_similarity", s.closest_similarity}};
    j["closest_rank"] = s.closest_rank ? util::json(*s.closest_rank) : util::json(nullptr);
}
inline void from_json(const util::json& j, ExampleScore& s) {
    j.at("example_id").get_to(s.example_id);
    s.suggestions = j.value("suggestions", std::size_t{0});
    s.verbatim = j.value("verbatim", false);
    s.abstracted = j.value("abstracted", false);
    s.codebleu = j.value("codebleu", 0.0);
    s.closest_similarity = j.value("closest_similarity", 0.0);
    if (j.contains("closest_rank") && !j["closest_rank"].is_null()) s.closest_rank = j["closest_rank"].get<std::size_t>();
}
inline void to_json(util::json& j, const MetricReport& r) {
    util::json topk = util::json::object();
    for (const auto& [k, v] : r.topk_accuracy) topk[std::to_string(k)] = v;
    j = util::json{{"examples", r.examples},         {"verbatim_pct", r.verbatim_pct},
                   {"abstracted_pct", r.abstracted_pct}, {"codebleu_mean", r.codebleu_mean},
                   {"topk_accuracy", topk},          {"per_example", r.per_example}};
}
inline void from_json(const util::json& j, MetricReport& r) {
    r.examples = j.value("examples", std::size_t{0});
    r.verbatim_pct = j.value("verbatim_pct", 0.0);
    r.abstracted_pct = j.value("abstracted_pct", 0.0);
    r.codebleu_mean = j.value("codebleu_mean", 0.0);
    if (j.contains("topk_accuracy"))
        for (const auto& [k, v] : j["topk_accuracy"].items()) r.topk_accuracy[std::stoul(k)] = v.get<double>();
    r.per_example = j.value("per_example", std::vector<ExampleScore>{});
}

/// Scores every truth example against its suggestions (matched by
/// example_id). Examples without suggestions count as misses.
inline MetricReport evaluate(const std::vector<Suggestion>& suggestions,
                             const std::vector<TransformationExample>& truth,
                             const std::optional<std::vector<Judgment>>& judgments = std::nullopt,
                             const CodeBleuWeights& weights = {}, const std::vector<std::size_t>& ks = {1, 10, 100, 500}) {
    weights.validate();
    std::map<std::string, std::vector<Suggestion>> by_example;
    for (const auto& s : suggestions) by_example[s.example_id].push_back(s);
    for (auto& [_, v] : by_example)
        std::stable_sort(v.begin(), v.end(), [](const Suggestion& a, const Suggestion& b) { return a.rank < b.rank; });

    MetricReport r;
    std::size_t verbatim = 0, abstracted = 0;
    double bleu_sum = 0.0;
    for (const auto& ex : truth) {
        ExampleScore row;
        row.example_id = ex.example_id;
        auto it = by_example.find(ex.example_id);
        if (it != by_example.end() && !it->second.empty()) {
            const auto& list = it->second;
            std::vector<std::string> texts;
            for (const auto& s : list) texts.push_back(s.patch_text);
            row.suggestions = list.size();
            row.verbatim = verbatim_match(texts, ex.output_text);
            row.abstracted = row.verbatim || abstracted_match(texts, ex.output_text);
            try {
                row.codebleu = codebleu(list.front().patch_text, ex.output_text, weights);
            } catch (const TokenizationFailure&) {
                row.codebleu = 0.0;
            }
            if (auto cm = closest_match(list, ex.output_text)) {
                row.closest_rank = cm->rank;
                row.closest_similarity = cm->similarity;
            }
        }
        verbatim += row.verbatim;
        abstracted += row.abstracted;
        bleu_sum += row.codebleu;
        r.per_example.push_back(std::move(row));
    }
    r.examples = truth.size();
    if (!truth.empty()) {
        double n = static_cast<double>(truth.size());
        r.verbatim_pct = 100.0 * static_cast<double>(verbatim) / n;
        r.abstracted_pct = 100.0 * static_cast<double>(abstracted) / n;
        r.codebleu_mean = bleu_sum / n;
    }
    if (judgments) r.topk_accuracy = topk_accuracy(*judgments, ks);
    return r;
}

}  // namespace perfpatch
