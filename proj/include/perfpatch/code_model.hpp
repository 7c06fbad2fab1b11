#pragma once

// Source model over parsed C#: classes, member attributes (fields and
// properties), methods with normalized signatures, within-unit call graph,
// method pairing across file versions, and variable abstraction.

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "perfpatch/csharp/parser.hpp"
#include "perfpatch/error.hpp"
#include "perfpatch/util/text.hpp"

namespace perfpatch {

using csharp::Node;

struct AttributeModel {
    std::vector<std::string> names;  // declared member names
    std::string text;                // dedented declaration text
    std::string normalized;          // normalize_body(text)
    std::size_t begin = 0;           // span in the unit's raw text
    std::size_t end = 0;
};

struct MethodModel {
    std::string signature;
    std::string name;
    std::string class_name;
    std::size_t min_arity = 0;
    std::size_t max_arity = 0;
    bool variadic = false;
    bool body_parsed = true;

    std::string text;       // dedented full declaration
    std::string header;     // declaration up to the body, whitespace collapsed
    std::string body_text;  // raw body: block, or `=> expr;`
    std::string normalized_body;
    std::size_t begin = 0;  // span of the declaration in the unit's raw text
    std::size_t end = 0;

    std::set<std::string> callees;
    std::set<std::string> callers;

    Node syntax;  // the declaration node, offsets relative to the unit text

    bool accepts(std::size_t args) const { return args >= min_arity && (variadic || args <= max_arity); }
};

struct ClassModel {
    std::string name;
    std::vector<AttributeModel> attributes;
    std::vector<MethodModel> methods;
    std::size_t begin = 0;
    std::size_t end = 0;

    const MethodModel* find(std::string_view signature) const {
        for (const auto& m : methods)
            if (m.signature == signature) return &m;
        return nullptr;
    }
};

struct SourceUnit {
    std::vector<std::string> using_statements;  // "using X.Y;" texts
    std::vector<ClassModel> classes;
    std::string raw_text;
    std::vector<std::string> diagnostics;

    const MethodModel* find_method(std::string_view class_name, std::string_view signature) const {
        for (const auto& c : classes)
            if (c.name == class_name)
                if (const auto* m = c.find(signature)) return m;
        return nullptr;
    }
    /// First method with this signature in any class.
    const MethodModel* find_method(std::string_view signature) const {
        for (const auto& c : classes)
            if (const auto* m = c.find(signature)) return m;
        return nullptr;
    }
    const ClassModel* class_of(std::string_view signature) const {
        for (const auto& c : classes)
            if (c.find(signature)) return &c;
        return nullptr;
    }
};

struct FocalMethodPair {
    std::string class_name;
    std::string signature;
    MethodModel before;
    MethodModel after;
};

/// Comment-free, whitespace-collapsed text. Iterated to a fixed point: in
/// malformed text a string broken by a newline re-lexes differently once
/// the newline is gone. After the first pass every change removes a
/// comment, so the loop ends.
inline std::string normalize_body(std::string_view body) {
    std::string cur = util::collapse_whitespace(csharp::strip_comments(body));
    for (;;) {
        std::string next = util::collapse_whitespace(csharp::strip_comments(cur));
        if (next == cur) return cur;
        cur = std::move(next);
    }
}

namespace detail {

inline std::string_view span(std::string_view src, const Node& n) { return src.substr(n.begin, n.end - n.begin); }

// Text of a declaration starting at its line's indentation, dedented.
inline std::string declaration_text(std::string_view src, std::size_t begin, std::size_t end) {
    std::size_t line_start = begin;
    while (line_start > 0 && (src[line_start - 1] == ' ' || src[line_start - 1] == '\t')) --line_start;
    if (line_start > 0 && src[line_start - 1] != '\n') line_start = begin;
    return util::dedent(src.substr(line_start, end - line_start));
}

inline const Node* body_of(const Node& decl) {
    if (decl.children.empty()) return nullptr;
    const Node& last = decl.children.back();
    if (last.kind == "block" || last.kind == "arrow_expression" || last.kind == "unparsed_body") return &last;
    return nullptr;
}

inline std::string method_signature(const Node& decl, std::size_t& min_arity, std::size_t& max_arity, bool& variadic) {
    std::string ret;
    std::string name = decl.text;
    std::size_t generic_arity = 0;
    const Node* params = nullptr;
    for (const auto& c : decl.children) {
        if (c.kind == "type" && ret.empty() && decl.kind != "constructor_declaration") ret = c.text;
        if (c.kind == "type_parameter_list") generic_arity = c.children.size();
        if (c.kind == "parameter_list") params = &c;
    }
    std::string sig;
    if (!ret.empty()) sig = ret + " ";
    sig += name;
    if (generic_arity > 0) sig += "`" + std::to_string(generic_arity);
    sig += "(";
    min_arity = max_arity = 0;
    variadic = false;
    if (params) {
        bool first = true;
        for (const auto& p : params->children) {
            if (!first) sig += ",";
            first = false;
            if (!p.text.empty()) sig += p.text + " ";
            const Node* t = p.find("type");
            sig += t ? t->text : std::string("?");
            bool has_default = p.children.size() >= 3;
            bool is_params = p.text.find("params") != std::string::npos;
            if (is_params) variadic = true;
            else {
                ++max_arity;
                if (!has_default) ++min_arity;
            }
        }
    }
    sig += ")";
    return sig;
}

inline MethodModel build_method(std::string_view src, const Node& decl, const std::string& class_name) {
    MethodModel m;
    m.class_name = class_name;
    m.name = decl.text;
    m.signature = method_signature(decl, m.min_arity, m.max_arity, m.variadic);
    m.begin = decl.begin;
    m.end = decl.end;
    m.text = declaration_text(src, decl.begin, decl.end);
    const Node* body = body_of(decl);
    if (body) {
        m.body_parsed = body->kind != "unparsed_body";
        if (body->kind == "arrow_expression") {
            // include `=>` and the terminating `;`
            std::size_t b = src.rfind("=>", body->begin);
            m.body_text = std::string(src.substr(b, decl.end - b));
        } else {
            m.body_text = std::string(span(src, *body));
        }
        std::size_t hb = decl.begin;
        std::size_t he = body->kind == "arrow_expression" ? src.rfind("=>", body->begin) : body->begin;
        // header excludes attribute lists
        for (const auto& c : decl.children)
            if (c.kind == "attribute_list") hb = c.end;
        m.header = util::collapse_whitespace(csharp::strip_comments(src.substr(hb, he - hb)));
    } else {
        std::size_t hb = decl.begin;
        for (const auto& c : decl.children)
            if (c.kind == "attribute_list") hb = c.end;
        std::string h = util::collapse_whitespace(csharp::strip_comments(src.substr(hb, decl.end - hb)));
        if (!h.empty() && h.back() == ';') h.pop_back();
        m.header = util::trim(h);
    }
    m.normalized_body = normalize_body(m.body_text);
    m.syntax = decl;
    return m;
}

inline AttributeModel build_attribute(std::string_view src, const Node& decl) {
    AttributeModel a;
    if (decl.kind == "field_declaration") {
        for (const auto& c : decl.children)
            if (c.kind == "variable_declarator" && !c.children.empty()) a.names.push_back(c.children.front().text);
        if (a.names.empty())
            if (const Node* id = decl.find("identifier")) a.names.push_back(id->text);
    } else {
        a.names.push_back(decl.text);
    }
    a.text = declaration_text(src, decl.begin, decl.end);
    a.normalized = normalize_body(a.text);
    a.begin = decl.begin;
    a.end = decl.end;
    return a;
}

inline void collect_classes(std::string_view src, const Node& container, SourceUnit& unit);

inline ClassModel build_class(std::string_view src, const Node& decl, SourceUnit& unit, const std::string& name) {
    ClassModel cls;
    cls.name = name;
    cls.begin = decl.begin;
    cls.end = decl.end;
    std::set<std::string> seen;
    for (const auto& c : decl.children) {
        if (c.kind == "method_declaration" || c.kind == "constructor_declaration") {
            MethodModel m = build_method(src, c, name);
            if (!m.body_parsed) unit.diagnostics.push_back("unparsed body in " + name + "." + m.signature);
            if (!seen.insert(m.signature).second) {
                unit.diagnostics.push_back("duplicate signature dropped: " + name + "." + m.signature);
                continue;
            }
            cls.methods.push_back(std::move(m));
        } else if (c.kind == "field_declaration" || c.kind == "property_declaration") {
            cls.attributes.push_back(build_attribute(src, c));
        } else if (c.kind == "class_declaration") {
            unit.classes.push_back(build_class(src, c, unit, c.text));
        }
    }
    return cls;
}

inline void collect_classes(std::string_view src, const Node& container, SourceUnit& unit) {
    for (const auto& c : container.children) {
        if (c.kind == "using_directive") {
            unit.using_statements.push_back(util::collapse_whitespace(span(src, c)));
        } else if (c.kind == "namespace_declaration") {
            collect_classes(src, c, unit);
        } else if (c.kind == "class_declaration") {
            // nested classes are appended by build_class before their parent
            std::size_t at = unit.classes.size();
            ClassModel cls = build_class(src, c, unit, c.text);
            unit.classes.insert(unit.classes.begin() + static_cast<std::ptrdiff_t>(at), std::move(cls));
        }
    }
}

}  // namespace detail

/// Call edges m -> n where m's body invokes a name matching n by name and
/// argument count. Bare and `this.` calls resolve in the caller's class;
/// `ClassName.M(...)` resolves in ClassName.
inline void call_graph(SourceUnit& unit) {
    for (auto& c : unit.classes)
        for (auto& m : c.methods) {
            m.callees.clear();
            m.callers.clear();
        }
    std::map<std::string, ClassModel*> by_name;
    for (auto& c : unit.classes) by_name.emplace(c.name, &c);

    for (auto& cls : unit.classes) {
        for (auto& m : cls.methods) {
            const Node* body = detail::body_of(m.syntax);
            if (!body || body->kind == "unparsed_body") continue;
            csharp::walk(*body, [&](const Node& n, const Node*) {
                if (n.kind != "invocation_expression" || n.children.size() < 2) return true;
                const Node& target = n.children[0];
                std::size_t args = n.children[1].children.size();
                std::string name;
                ClassModel* scope = &cls;
                if (target.kind == "identifier" || target.kind == "generic_name") {
                    name = target.text;
                } else if (target.kind == "member_access_expression" && target.text == "." &&
                           target.children.size() == 2) {
                    const Node& lhs = target.children[0];
                    const Node& rhs = target.children[1];
                    if (lhs.kind == "this_expression") {
                        name = rhs.text;
                    } else if (lhs.kind == "identifier" && by_name.count(lhs.text)) {
                        name = rhs.text;
                        scope = by_name[lhs.text];
                    }
                }
                if (name.empty()) return true;
                for (auto& callee : scope->methods)
                    if (callee.name == name && callee.accepts(args)) m.callees.insert(callee.signature);
                return true;
            });
        }
    }
    for (auto& cls : unit.classes)
        for (auto& m : cls.methods)
            for (const auto& sig : m.callees)
                for (auto& other : unit.classes)
                    for (auto& n : other.methods)
                        if (n.signature == sig) n.callers.insert(m.signature);
}

/// Tolerant whole-file parse. Throws UnparseableFile when the text has
/// content but no using directive or class could be recovered.
inline SourceUnit parse_source(std::string_view text) {
    SourceUnit unit;
    unit.raw_text = std::string(text);
    auto res = csharp::parse_compilation_unit(unit.raw_text);
    for (const auto& d : res.diagnostics) unit.diagnostics.push_back(csharp::format_diagnostic(d));
    if (res.root.kind == "compilation_unit") detail::collect_classes(unit.raw_text, res.root, unit);
    bool has_content = !util::trim_view(csharp::strip_comments(text)).empty();
    if (has_content && unit.classes.empty() && unit.using_statements.empty() && !res.diagnostics.empty())
        throw UnparseableFile("no top-level structure recovered: " + unit.diagnostics.front());
    call_graph(unit);
    return unit;
}

/// Strict parse of patch-format text (imports, attributes and methods with
/// no enclosing class). Members land in a single class with an empty name.
inline SourceUnit parse_fragment(std::string_view text) {
    SourceUnit unit;
    unit.raw_text = std::string(text);
    auto res = csharp::parse_member_fragment(unit.raw_text);
    if (!res.ok()) throw UnparseableFile(csharp::format_diagnostic(res.diagnostics.front()));
    SourceUnit tmp;
    ClassModel loose = detail::build_class(unit.raw_text, res.root, tmp, "");
    for (const auto& c : res.root.children)
        if (c.kind == "using_directive") unit.using_statements.push_back(util::collapse_whitespace(detail::span(unit.raw_text, c)));
    unit.classes.push_back(std::move(loose));
    for (auto& c : tmp.classes) unit.classes.push_back(std::move(c));
    for (auto& d : tmp.diagnostics) unit.diagnostics.push_back(std::move(d));
    call_graph(unit);
    return unit;
}

/// Methods present in both versions (same class, same signature) whose
/// normalized bodies differ.
inline std::vector<FocalMethodPair> pair_methods(const SourceUnit& before, const SourceUnit& after) {
    std::vector<FocalMethodPair> out;
    for (const auto& cb : before.classes) {
        for (const auto& mb : cb.methods) {
            const MethodModel* ma = after.find_method(cb.name, mb.signature);
            if (!ma || ma->normalized_body == mb.normalized_body) continue;
            out.push_back(FocalMethodPair{cb.name, mb.signature, mb, *ma});
        }
    }
    return out;
}

// ---- variable abstraction ---------------------------------------------------

struct VariableOccurrence {
    std::size_t begin = 0;
    std::size_t end = 0;
    int id = 0;           // VAR_id, numbered by first encounter
    bool declaration = false;
    const Node* node = nullptr;
};

namespace detail {

class VariableCollector {
public:
    std::vector<VariableOccurrence> run(const Node& root) {
        scopes_.clear();
        scopes_.emplace_back();
        visit(root);
        return std::move(out_);
    }

private:
    void declare(const Node& id) {
        int v = next_++;
        scopes_.back()[id.text] = v;
        out_.push_back({id.begin, id.end, v, true, &id});
    }
    void reference(const Node& id) {
        for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it) {
            auto f = it->find(id.text);
            if (f != it->end()) {
                out_.push_back({id.begin, id.end, f->second, false, &id});
                return;
            }
        }
    }
    void push() { scopes_.emplace_back(); }
    void pop() { scopes_.pop_back(); }

    void visit_children(const Node& n, std::size_t from = 0) {
        for (std::size_t i = from; i < n.children.size(); ++i) visit(n.children[i]);
    }

    void visit(const Node& n) {
        const std::string& k = n.kind;
        if (k == "identifier") {
            reference(n);
            return;
        }
        if (k == "type" || k == "generic_name" || k == "argument_name" || k == "member_name" || k == "predefined_type" ||
            k == "attribute_list" || k == "modifiers" || k == "type_parameter_list" || csharp::is_literal_kind(k)) {
            if (k == "interpolated_string") visit_children(n);
            return;
        }
        if (k == "member_access_expression") {
            // the accessed name is never a variable
            if (!n.children.empty()) visit(n.children[0]);
            return;
        }
        if (k == "method_declaration" || k == "constructor_declaration" || k == "local_function" ||
            k == "lambda_expression" || k == "accessor") {
            push();
            for (const auto& c : n.children)
                if (c.kind != "identifier") visit(c);
            pop();
            return;
        }
        if (k == "class_declaration" || k == "namespace_declaration" || k == "field_declaration" ||
            k == "property_declaration" || k == "enum_declaration") {
            // fields and nested members: only bodies contain variables
            for (const auto& c : n.children)
                if (c.kind != "identifier" && c.kind != "variable_declarator") visit(c);
                else if (c.kind == "variable_declarator")
                    for (std::size_t i = 1; i < c.children.size(); ++i) visit(c.children[i]);
            return;
        }
        if (k == "parameter") {
            for (const auto& c : n.children) {
                if (c.kind == "identifier") declare(c);
                else visit(c);
            }
            return;
        }
        if (k == "variable_declarator") {
            if (!n.children.empty()) declare(n.children[0]);
            visit_children(n, 1);
            return;
        }
        if (k == "declaration_expression" || k == "declaration_pattern" || k == "catch_clause") {
            if (k == "catch_clause") push();
            for (const auto& c : n.children) {
                if (c.kind == "identifier" && (k != "declaration_pattern" || c.text != "_")) declare(c);
                else visit(c);
            }
            if (k == "catch_clause") pop();
            return;
        }
        if (k == "foreach_statement") {
            push();
            for (const auto& c : n.children) {
                if (&c == &n.children[1] && c.kind == "identifier") declare(c);
                else visit(c);
            }
            pop();
            return;
        }
        if (k == "block" || k == "for_statement" || k == "switch_section" || k == "using_statement" ||
            k == "switch_expression_arm") {
            push();
            visit_children(n);
            pop();
            return;
        }
        if (k == "labeled_statement" || k == "goto_statement") {
            visit_children(n);
            return;
        }
        visit_children(n);
    }

    std::vector<std::map<std::string, int>> scopes_;
    std::vector<VariableOccurrence> out_;
    int next_ = 0;
};

}  // namespace detail

/// Local variables and parameters in `root`, in pre-order. Identifiers that
/// do not resolve to a declaration inside `root` (fields, types, methods)
/// are not reported.
inline std::vector<VariableOccurrence> collect_variables(const Node& root) {
    return detail::VariableCollector{}.run(root);
}

/// Replace every local and parameter identifier by VAR_i, i counted from 0
/// in order of declaration during a pre-order walk. Numbering restarts for
/// every call.
inline std::string abstract_variables(std::string_view code) {
    auto res = csharp::parse_snippet(code);
    if (!res.ok())
        throw AbstractionParseError("cannot parse code for abstraction: " + csharp::format_diagnostic(res.diagnostics.front()));
    auto occ = collect_variables(res.root);
    std::sort(occ.begin(), occ.end(), [](const auto& a, const auto& b) { return a.begin < b.begin; });
    std::string out;
    out.reserve(code.size());
    std::size_t at = 0;
    for (const auto& o : occ) {
        if (o.begin < at) continue;
        out.append(code.substr(at, o.begin - at));
        out += "VAR_" + std::to_string(o.id);
        at = o.end;
    }
    out.append(code.substr(at));
    return out;
}

}  // namespace perfpatch
