#pragma once

// Concrete-ish syntax tree shared by the source model, metrics, rewrite
// rules and the fixture interpreter.
//
// Every node carries a kind label, an optional text payload and the
// [begin, end) byte span it covers in the parsed text. Punctuation is not
// stored as children; operators live in `text`.
//
// Child layouts (only the ones consumers rely on):
//   compilation_unit      using_directive* (namespace_declaration | class_declaration)*
//   using_directive       text = namespace name
//   namespace_declaration text = name; children = members
//   class_declaration     text = name, children: modifiers, member*
//   field_declaration     children: attribute_list*, modifiers, type, variable_declarator+
//   property_declaration  text = name; children: attribute_list*, modifiers, type, identifier,
//                         [parameter_list], accessor* | arrow_expression, [initializer value]
//   method_declaration    text = name; children: attribute_list*, modifiers, type, identifier,
//                         [type_parameter_list], parameter_list, [block | arrow_expression]
//   constructor_declaration text = name; children: attribute_list*, modifiers, identifier,
//                         parameter_list, [constructor_initializer], [block | arrow_expression]
//   parameter             text = modifier; children: [type], identifier, [default value]
//   variable_declarator   children: identifier, [initializer expression]
//   local_declaration     text = "using"/"const"/""; children: type, variable_declarator+
//   for_statement         children: for_initializer, condition|empty, for_update, body
//   foreach_statement     children: type, identifier, expression, body
//   member_access_expression text = "." | "?." | "::"; children: expression, identifier|generic_name
//   invocation_expression children: expression, argument_list
//   argument              text = ref/out/in; children: [argument_name], expression
//   lambda_expression     children: parameter_list, block | expression
//   assignment_expression, binary_expression, unary_expression, postfix_unary_expression:
//                         text = operator

#include <cstddef>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "perfpatch/csharp/lexer.hpp"

namespace perfpatch::csharp {

struct Node {
    std::string kind;
    std::string text;
    std::size_t begin = 0;
    std::size_t end = 0;
    std::vector<Node> children;

    bool leaf() const { return children.empty(); }

    const Node* find(std::string_view k) const {
        for (const auto& c : children)
            if (c.kind == k) return &c;
        return nullptr;
    }

    std::vector<const Node*> find_all(std::string_view k) const {
        std::vector<const Node*> out;
        for (const auto& c : children)
            if (c.kind == k) out.push_back(&c);
        return out;
    }
};

/// Pre-order traversal. The visitor returns false to skip a subtree.
inline void walk(const Node& n, const std::function<bool(const Node&, const Node* parent)>& visit,
                 const Node* parent = nullptr) {
    if (!visit(n, parent)) return;
    for (const auto& c : n.children) walk(c, visit, &n);
}

inline bool is_literal_kind(std::string_view k) {
    return k == "integer_literal" || k == "real_literal" || k == "string_literal" || k == "char_literal" ||
           k == "boolean_literal" || k == "null_literal" || k == "interpolated_string" || k == "default_literal";
}

/// S-expression over node kinds with leaf payloads dropped. Identifiers and
/// literals collapse to their kind, which is what structural similarity
/// wants: two subtrees match when only names or constants differ.
inline std::string sexp(const Node& n) {
    if (n.children.empty()) return "(" + n.kind + ")";
    std::string s = "(" + n.kind;
    if (n.kind == "binary_expression" || n.kind == "assignment_expression" || n.kind == "unary_expression" ||
        n.kind == "postfix_unary_expression")
        s += ":" + n.text;
    for (const auto& c : n.children) s += " " + sexp(c);
    s += ")";
    return s;
}

}  // namespace perfpatch::csharp
