#pragma once

// Deterministic rewrite rules over the marked focal method of an example
// input. Each rule that fires yields one hypothesis with log-likelihood 0;
// hypotheses come out in rule-id order.
//
//   R1  x.Count() == 0          ->  !x.Any()        (also != 0, > 0, mirrored)
//   R2  x.Where(p).First...()   ->  x.First...(p)
//   R3  foreach (.. in s.ToCharArray())  ->  foreach (.. in s)
//   R4  constant array literal inside a loop  ->  static readonly field
//   R5  string built by += in a loop  ->  cached StringBuilder field

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "perfpatch/code_model.hpp"
#include "perfpatch/example_builder.hpp"
#include "perfpatch/suggestion_engine.hpp"

namespace perfpatch {

struct RuleHypothesis {
    std::string rule_id;
    std::string patch_text;
};

namespace rules {

struct Edit {
    std::size_t begin;
    std::size_t end;
    std::string text;
};

inline std::string apply_edits(std::string_view text, std::vector<Edit> edits) {
    std::sort(edits.begin(), edits.end(), [](const Edit& a, const Edit& b) {
        if (a.begin != b.begin) return a.begin < b.begin;
        return a.end > b.end;  // outermost first
    });
    std::string out;
    std::size_t at = 0;
    for (const auto& e : edits) {
        if (e.begin < at) continue;  // overlaps an earlier edit
        out.append(text.substr(at, e.begin - at));
        out += e.text;
        at = e.end;
    }
    out.append(text.substr(at));
    return out;
}

inline std::string src(std::string_view text, const Node& n) { return std::string(text.substr(n.begin, n.end - n.begin)); }

inline bool is_primary(const Node& n) {
    static const std::set<std::string> kPrimary = {"identifier",          "member_access_expression",
                                                   "invocation_expression", "element_access_expression",
                                                   "this_expression",     "parenthesized_expression",
                                                   "generic_name",        "object_creation_expression"};
    return kPrimary.count(n.kind) > 0;
}

inline std::string as_receiver(std::string_view text, const Node& n) {
    return is_primary(n) ? src(text, n) : "(" + src(text, n) + ")";
}

// `recv.name(args)` with a plain "." access: returns recv, or nullptr.
inline const Node* member_call(const Node& n, std::string_view name, std::size_t args) {
    if (n.kind != "invocation_expression" || n.children.size() != 2) return nullptr;
    const Node& target = n.children[0];
    if (target.kind != "member_access_expression" || target.text != "." || target.children.size() != 2) return nullptr;
    if (target.children[1].kind != "identifier" || target.children[1].text != name) return nullptr;
    const Node& list = n.children[1];
    if (list.children.size() != args) return nullptr;
    for (const auto& a : list.children)
        if (!a.text.empty() || a.find("argument_name")) return nullptr;
    return &target.children[0];
}

inline bool is_zero(const Node& n) { return n.kind == "integer_literal" && n.text == "0"; }

inline bool is_loop(const Node& n) {
    return n.kind == "for_statement" || n.kind == "foreach_statement" || n.kind == "while_statement" ||
           n.kind == "do_statement";
}

// Pre-order walk that reports how many loops enclose each node.
inline void walk_loops(const Node& n, int depth, const std::function<void(const Node&, int, const Node*)>& f,
                       const Node* parent = nullptr) {
    f(n, depth, parent);
    int inner = depth + (is_loop(n) ? 1 : 0);
    for (const auto& c : n.children) walk_loops(c, inner, f, &n);
}

inline std::vector<Edit> r1_edits(std::string_view text, const Node& root) {
    std::vector<Edit> edits;
    csharp::walk(root, [&](const Node& n, const Node*) {
        if (n.kind != "binary_expression" || n.children.size() != 2) return true;
        const Node& l = n.children[0];
        const Node& r = n.children[1];
        const Node* recv = nullptr;
        bool empty_test = false;
        if (is_zero(r) && (recv = member_call(l, "Count", 0))) {
            if (n.text == "==") empty_test = true;
            else if (n.text != "!=" && n.text != ">") return true;
        } else if (is_zero(l) && (recv = member_call(r, "Count", 0))) {
            if (n.text == "==") empty_test = true;
            else if (n.text != "!=" && n.text != "<") return true;
        } else {
            return true;
        }
        std::string any = as_receiver(text, *recv) + ".Any()";
        edits.push_back({n.begin, n.end, empty_test ? "!" + any : any});
        return false;
    });
    return edits;
}

inline std::vector<Edit> r2_edits(std::string_view text, const Node& root) {
    static const std::vector<std::string> kTerminal = {"FirstOrDefault", "First", "SingleOrDefault", "Single",
                                                       "LastOrDefault",  "Last",  "Any",             "Count"};
    std::vector<Edit> edits;
    csharp::walk(root, [&](const Node& n, const Node*) {
        for (const auto& term : kTerminal) {
            const Node* inner = member_call(n, term, 0);
            if (!inner) continue;
            const Node* recv = member_call(*inner, "Where", 1);
            if (!recv) continue;
            const Node& pred = inner->children[1].children[0];
            edits.push_back({n.begin, n.end, src(text, *recv) + "." + term + "(" + src(text, pred) + ")"});
            return false;
        }
        return true;
    });
    return edits;
}

inline std::vector<Edit> r3_edits(std::string_view text, const Node& root) {
    std::vector<Edit> edits;
    csharp::walk(root, [&](const Node& n, const Node*) {
        if (n.kind != "foreach_statement" || n.children.size() < 3) return true;
        const Node& coll = n.children[2];
        if (const Node* recv = member_call(coll, "ToCharArray", 0)) edits.push_back({coll.begin, coll.end, src(text, *recv)});
        return true;
    });
    return edits;
}

inline std::string literal_type(const Node& n) {
    if (n.kind == "char_literal") return "char";
    if (n.kind == "string_literal") return "string";
    if (n.kind == "integer_literal") return "int";
    if (n.kind == "real_literal") return "double";
    if (n.kind == "boolean_literal") return "bool";
    return {};
}

inline std::string unique_name(std::string base, const std::set<std::string>& taken) {
    if (!taken.count(base)) return base;
    for (int i = 2;; ++i) {
        std::string candidate = base + std::to_string(i);
        if (!taken.count(candidate)) return candidate;
    }
}

inline std::string pascal(std::string s) {
    if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
}

struct Hoisted {
    std::vector<Edit> edits;
    std::vector<std::string> attributes;
};

inline Hoisted r4_edits(std::string_view text, const Node& root, const std::string& method_name,
                        std::set<std::string> taken) {
    Hoisted h;
    std::map<std::string, std::string> by_literal;  // normalized creation text -> field name
    walk_loops(root, 0, [&](const Node& n, int loops, const Node*) {
        if (loops == 0 || n.kind != "array_creation_expression" || n.children.size() != 2) return;
        const Node& ty = n.children[0];
        const Node& init = n.children[1];
        if (init.kind != "initializer_expression" || init.children.empty()) return;
        std::string elem;
        for (const auto& e : init.children) {
            std::string t = literal_type(e);
            if (t.empty() || (!elem.empty() && t != elem)) return;
            elem = t;
        }
        std::string array_type = ty.kind == "type" ? ty.text : elem + "[]";
        if (array_type.size() < 3 || array_type.substr(array_type.size() - 2) != "[]") return;
        std::string creation = src(text, n);
        std::string key = normalize_body(creation);
        auto it = by_literal.find(key);
        if (it == by_literal.end()) {
            std::string name = unique_name(pascal(method_name) + "Values", taken);
            taken.insert(name);
            h.attributes.push_back("private static readonly " + array_type + " " + name + " = " +
                                   util::collapse_whitespace(creation) + ";");
            it = by_literal.emplace(key, name).first;
        }
        h.edits.push_back({n.begin, n.end, it->second});
    });
    return h;
}

inline bool is_string_type(const std::string& t) { return t == "string" || t == "String" || t == "System.String"; }

struct Builder {
    std::vector<Edit> edits;
    std::string attribute;
    bool fired = false;
};

// Candidate: `string x = init;` (or `var x = "..."`) as a direct statement of
// the method block, only ever extended by `x += e` / `x = x + e` statements,
// at least one of them inside a loop.
inline Builder r5_edits(std::string_view text, const Node& method, bool is_static, std::set<std::string> taken) {
    Builder out;
    const Node* body = method.children.empty() ? nullptr : &method.children.back();
    if (!body || body->kind != "block") return out;
    auto vars = collect_variables(method);

    // parent links for occurrence classification
    std::map<const Node*, const Node*> parent;
    std::map<const Node*, int> loop_depth;
    walk_loops(method, 0, [&](const Node& n, int loops, const Node* p) {
        parent[&n] = p;
        loop_depth[&n] = loops;
    });

    for (const auto& stmt : body->children) {
        if (stmt.kind != "local_declaration" || !stmt.text.empty() || stmt.children.size() != 2) continue;
        const Node& ty = stmt.children[0];
        const Node& decl = stmt.children[1];
        if (decl.children.size() != 2) continue;
        const Node& init = decl.children[1];
        bool stringy = is_string_type(ty.text) ||
                       (ty.text == "var" && (init.kind == "string_literal" || init.kind == "interpolated_string"));
        if (!stringy) continue;
        const Node* id = &decl.children[0];
        int var_id = -1;
        for (const auto& v : vars)
            if (v.node == id) var_id = v.id;
        if (var_id < 0) continue;

        std::vector<Edit> edits;
        bool ok = true;
        bool appended_in_loop = false;
        std::set<const Node*> handled;
        for (const auto& v : vars) {
            if (v.id != var_id || v.declaration) continue;
            if (handled.count(v.node)) continue;
            const Node* p = parent[v.node];
            if (p && p->kind == "argument" && !p->text.empty()) {
                ok = false;  // ref/out
                break;
            }
            if (p && p->kind == "assignment_expression" && &p->children[0] == v.node) {
                const Node* stmt_node = parent[p];
                if (!stmt_node || stmt_node->kind != "expression_statement") {
                    ok = false;
                    break;
                }
                std::vector<const Node*> parts;
                if (p->text == "+=") {
                    parts.push_back(&p->children[1]);
                } else if (p->text == "=") {
                    // x = x + a + b  ==>  leftmost operand of a '+' chain is x
                    const Node* cur = &p->children[1];
                    std::vector<const Node*> rights;
                    while (cur->kind == "binary_expression" && cur->text == "+") {
                        rights.push_back(&cur->children[1]);
                        cur = &cur->children[0];
                    }
                    bool self = false;
                    for (const auto& w : vars)
                        if (w.node == cur && w.id == var_id) self = true;
                    if (!self || rights.empty()) {
                        ok = false;
                        break;
                    }
                    handled.insert(cur);
                    parts.assign(rights.rbegin(), rights.rend());
                } else {
                    ok = false;
                    break;
                }
                std::string call = src(text, *v.node);
                for (const Node* part : parts) call += ".Append(" + src(text, *part) + ")";
                edits.push_back({p->begin, p->end, call});
                if (loop_depth[p] > 0) appended_in_loop = true;
                continue;
            }
            if (p && (p->kind == "postfix_unary_expression" || p->kind == "unary_expression") &&
                (p->text == "++" || p->text == "--")) {
                ok = false;
                break;
            }
            edits.push_back({v.node->begin, v.node->end, src(text, *v.node) + ".ToString()"});
        }
        if (!ok || !appended_in_loop) continue;

        std::string name = id->text;
        std::string field = is_static ? unique_name("Cached" + pascal(name) + "Builder", taken)
                                      : unique_name("_" + name + "Builder", taken);
        out.attribute = is_static ? "private static readonly StringBuilder " + field + " = new StringBuilder();"
                                  : "private readonly StringBuilder " + field + " = new StringBuilder();";
        std::string decl_text = "var " + name + " = " + field + ".Clear()";
        bool empty_init = (init.kind == "string_literal" && (init.text == "\"\"" || init.text == "@\"\"")) ||
                          src(text, init) == "string.Empty" || src(text, init) == "String.Empty";
        if (!empty_init) decl_text += ".Append(" + src(text, init) + ")";
        decl_text += ";";
        edits.push_back({stmt.begin, stmt.end, decl_text});
        out.edits = std::move(edits);
        out.fired = true;
        return out;  // one builder per hypothesis
    }
    return out;
}

inline std::string render_patch(const std::vector<std::string>& imports, const std::vector<std::string>& attrs,
                                const std::string& method) {
    std::vector<std::string> sections;
    if (!imports.empty()) sections.push_back(util::join(imports, "\n"));
    if (!attrs.empty()) sections.push_back(util::join(attrs, "\n"));
    sections.push_back(util::trim(method));
    return util::join(sections, "\n\n") + "\n";
}

}  // namespace rules

inline const std::vector<std::string>& all_rule_ids() {
    static const std::vector<std::string> kIds = {"R1", "R2", "R3", "R4", "R5"};
    return kIds;
}

/// Hypotheses for the focal method in `input_text`, one per fired rule, in
/// rule-id order. Each hypothesis parses and keeps the focal signature.
inline std::vector<RuleHypothesis> apply_rules(const std::string& input_text, const ExampleOptions& markers = {},
                                               const std::vector<std::string>& enabled = all_rule_ids()) {
    std::vector<RuleHypothesis> out;
    std::string focal = focal_region(input_text, markers);
    if (focal.empty()) return out;
    auto parsed = csharp::parse_member_fragment(focal);
    if (!parsed.ok() || parsed.root.children.empty()) return out;
    const Node* method = nullptr;
    for (const auto& c : parsed.root.children)
        if (c.kind == "method_declaration" || c.kind == "constructor_declaration") {
            method = &c;
            break;
        }
    if (!method) return out;

    std::size_t lo, hi;
    bool variadic;
    const std::string signature = detail::method_signature(*method, lo, hi, variadic);
    const Node* mods = method->find("modifiers");
    bool is_static = mods && (" " + mods->text + " ").find(" static ") != std::string::npos;

    std::set<std::string> taken;
    for (auto& t : tokenize(input_text)) taken.insert(std::move(t));
    bool has_text_import = input_text.find("using System.Text;") != std::string::npos;
    bool has_linq_import = input_text.find("using System.Linq;") != std::string::npos;

    auto emit = [&](const std::string& rule, std::vector<std::string> imports, std::vector<std::string> attrs,
                    const std::vector<rules::Edit>& edits) {
        if (edits.empty()) return;
        std::string method_text = rules::apply_edits(focal, edits);
        std::string patch = rules::render_patch(imports, attrs, method_text);
        // keep only hypotheses that parse and preserve the signature
        try {
            SourceUnit unit = parse_fragment(patch);
            if (unit.classes.empty() || unit.classes.front().methods.empty()) return;
            if (unit.classes.front().methods.front().signature != signature) return;
        } catch (const UnparseableFile&) {
            return;
        }
        out.push_back({rule, std::move(patch)});
    };
    auto enabled_rule = [&](const std::string& r) { return std::find(enabled.begin(), enabled.end(), r) != enabled.end(); };
    const std::vector<std::string> linq = has_linq_import ? std::vector<std::string>{} : std::vector<std::string>{"using System.Linq;"};

    if (enabled_rule("R1")) emit("R1", linq, {}, rules::r1_edits(focal, *method));
    if (enabled_rule("R2")) emit("R2", linq, {}, rules::r2_edits(focal, *method));
    if (enabled_rule("R3")) emit("R3", {}, {}, rules::r3_edits(focal, *method));
    if (enabled_rule("R4")) {
        auto h = rules::r4_edits(focal, *method, method->text, taken);
        emit("R4", {}, h.attributes, h.edits);
    }
    if (enabled_rule("R5")) {
        auto b = rules::r5_edits(focal, *method, is_static, taken);
        if (b.fired) {
            std::vector<std::string> imports;
            if (!has_text_import) imports.push_back("using System.Text;");
            emit("R5", imports, {b.attribute}, b.edits);
        }
    }
    return out;
}

class RuleBackend : public Backend {
public:
    explicit RuleBackend(ExampleOptions markers = {}, std::vector<std::string> enabled = all_rule_ids())
        : markers_(std::move(markers)), enabled_(std::move(enabled)) {}

    std::string id() const override { return "rules"; }

    std::vector<Hypothesis> sample(const std::string& input_text, std::size_t n,
                                   std::optional<std::uint64_t>) override {
        std::vector<Hypothesis> out;
        for (auto& h : apply_rules(input_text, markers_, enabled_)) {
            if (out.size() >= n) break;
            out.push_back({std::move(h.patch_text), 0.0});
        }
        return out;
    }

private:
    ExampleOptions markers_;
    std::vector<std::string> enabled_;
};

}  // namespace perfpatch
