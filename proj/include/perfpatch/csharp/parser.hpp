#pragma once

// Recursive-descent parser for the subset of C# that shows up in method
// bodies and class members: declarations, statements, expressions with
// lambdas, object/collection initializers, patterns and switch
// expressions. Query syntax, unsafe code and preprocessor-conditional code
// are not understood.
//
// Tolerant mode recovers at member granularity: a member that fails to
// parse is skipped and reported; a method whose body fails keeps its
// declaration with an `unparsed_body` node. Strict mode throws on the first
// problem.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "perfpatch/csharp/lexer.hpp"
#include "perfpatch/csharp/syntax.hpp"
#include "perfpatch/error.hpp"

namespace perfpatch::csharp {

struct ParseResult {
    Node root;
    std::vector<Diagnostic> diagnostics;
    bool ok() const { return diagnostics.empty(); }
};

namespace detail {

struct ParseFail {
    Diagnostic diag;
};

inline bool is_modifier(const Token& t) {
    static const char* kMods[] = {"public", "private", "protected", "internal", "static", "readonly", "const",
                                  "volatile", "virtual", "override", "abstract", "sealed", "extern", "unsafe",
                                  "new", "fixed"};
    if (t.kind == TokenKind::Keyword) {
        for (const char* m : kMods)
            if (t.text == m) return true;
        return false;
    }
    if (t.kind == TokenKind::Identifier)
        return t.text == "async" || t.text == "partial" || t.text == "required" || t.text == "file";
    return false;
}

class Parser {
public:
    Parser(std::string_view src, std::size_t base, bool strict) : src_(src), base_(base), strict_(strict) {
        auto lexed = lex(src, base);
        toks_ = std::move(lexed.tokens);
        diags_ = std::move(lexed.diagnostics);
        if (strict_ && !diags_.empty()) throw ParseFail{diags_.front()};
    }

    std::vector<Diagnostic>& diagnostics() { return diags_; }

    Node compilation_unit() {
        Node unit = make("compilation_unit", "", cur().begin);
        parse_namespace_body(unit, /*braced=*/false);
        if (!at_end()) fail("unexpected '" + cur().text + "' at top level");
        unit.end = base_ + src_.size();
        return unit;
    }

    /// Output-format text: using directives followed by members or types,
    /// without an enclosing class.
    Node member_fragment() {
        Node frag = make("member_fragment", "", cur().begin);
        while (!at_end()) {
            if (cur().keyword("using") && !peek(1).punct("(")) {
                frag.children.push_back(using_directive());
                continue;
            }
            if (cur().keyword("namespace")) {
                frag.children.push_back(namespace_declaration());
                continue;
            }
            frag.children.push_back(member(""));
        }
        frag.end = base_ + src_.size();
        return frag;
    }

    Node statement_list() {
        Node block = make("block", "", cur().begin);
        while (!at_end()) block.children.push_back(statement());
        block.end = base_ + src_.size();
        return block;
    }

    Node expression_only() {
        Node e = expression();
        if (!at_end()) fail("unexpected '" + cur().text + "' after expression");
        return e;
    }

    bool at_end() const { return cur().kind == TokenKind::End; }

private:
    // ---- token plumbing -------------------------------------------------

    const Token& cur() const { return toks_[pos_]; }
    const Token& peek(std::size_t k) const {
        std::size_t i = pos_ + k;
        return i < toks_.size() ? toks_[i] : toks_.back();
    }
    std::size_t prev_end() const { return pos_ == 0 ? base_ : toks_[pos_ - 1].end; }
    const Token& advance() {
        const Token& t = toks_[pos_];
        if (t.kind != TokenKind::End) ++pos_;
        return t;
    }
    bool eat(std::string_view p) {
        if (cur().punct(p)) {
            advance();
            return true;
        }
        return false;
    }
    bool eat_kw(std::string_view k) {
        if (cur().keyword(k)) {
            advance();
            return true;
        }
        return false;
    }
    void expect(std::string_view p) {
        if (!eat(p)) fail("expected '" + std::string(p) + "' but found '" + describe(cur()) + "'");
    }
    static std::string describe(const Token& t) { return t.kind == TokenKind::End ? "end of input" : t.text; }

    [[noreturn]] void fail(const std::string& msg) const {
        const Token& t = cur();
        throw ParseFail{Diagnostic{t.begin, t.line, t.column, msg}};
    }

    Node make(std::string kind, std::string text, std::size_t begin) const {
        Node n;
        n.kind = std::move(kind);
        n.text = std::move(text);
        n.begin = begin;
        n.end = begin;
        return n;
    }
    Node finish(Node n) const {
        n.end = prev_end();
        return n;
    }
    Node leaf(const std::string& kind, const Token& t) const {
        Node n;
        n.kind = kind;
        n.text = t.text;
        n.begin = t.begin;
        n.end = t.end;
        return n;
    }
    Node identifier() {
        if (cur().kind != TokenKind::Identifier) fail("expected identifier but found '" + describe(cur()) + "'");
        return leaf("identifier", advance());
    }

    bool adjacent(std::size_t k) const { return peek(k).begin == peek(k - 1).end; }

    // ---- namespaces and types -------------------------------------------

    Node using_directive() {
        std::size_t b = cur().begin;
        advance();  // using
        std::string name;
        if (cur().keyword("static")) {
            advance();
            name = "static ";
        }
        if (cur().ident("global")) {
            // `global using` is handled by the caller; `global::X` is a name
        }
        if (cur().kind == TokenKind::Identifier && peek(1).punct("=")) {
            name += advance().text + " = ";
            advance();
        }
        while (!cur().punct(";") && !at_end()) name += advance().text;
        expect(";");
        Node n = make("using_directive", name, b);
        return finish(std::move(n));
    }

    void parse_namespace_body(Node& into, bool braced) {
        while (!at_end()) {
            if (braced && cur().punct("}")) return;
            if (cur().ident("global") && peek(1).keyword("using")) advance();
            if (cur().keyword("using") && !peek(1).punct("(")) {
                recover_into(into, [&] { return using_directive(); });
                continue;
            }
            if (cur().keyword("extern")) {
                while (!cur().punct(";") && !at_end()) advance();
                eat(";");
                continue;
            }
            if (cur().keyword("namespace")) {
                recover_into(into, [&] { return namespace_declaration(); });
                continue;
            }
            if (cur().punct("[") && (peek(1).ident("assembly") || peek(1).ident("module"))) {
                skip_balanced("[", "]");
                continue;
            }
            std::size_t start = pos_;
            recover_into(into, [&] { return type_member(); });
            if (pos_ == start) advance();
        }
    }

    template <typename F>
    void recover_into(Node& into, F&& parse_one) {
        if (strict_) {
            into.children.push_back(parse_one());
            return;
        }
        std::size_t start = pos_;
        try {
            into.children.push_back(parse_one());
        } catch (const ParseFail& f) {
            diags_.push_back(f.diag);
            pos_ = start;
            skip_member();
        }
    }

    Node namespace_declaration() {
        std::size_t b = cur().begin;
        advance();  // namespace
        std::string name;
        while (!cur().punct("{") && !cur().punct(";") && !at_end()) name += advance().text;
        Node ns = make("namespace_declaration", name, b);
        if (eat(";")) {
            parse_namespace_body(ns, false);
            return finish(std::move(ns));
        }
        expect("{");
        parse_namespace_body(ns, true);
        expect("}");
        eat(";");
        return finish(std::move(ns));
    }

    // A member of a namespace: must be a type declaration.
    Node type_member() {
        std::size_t save = pos_;
        std::size_t b = cur().begin;
        std::vector<Node> attrs = attribute_lists();
        Node mods = modifiers();
        if (starts_type_declaration()) return type_declaration(b, std::move(attrs), std::move(mods));
        pos_ = save;
        fail("expected type declaration but found '" + describe(cur()) + "'");
    }

    bool starts_type_declaration() const {
        const Token& t = cur();
        return t.keyword("class") || t.keyword("struct") || t.keyword("interface") || t.keyword("enum") ||
               t.keyword("delegate") || (t.ident("record") && (peek(1).kind == TokenKind::Identifier || peek(1).keyword("class") || peek(1).keyword("struct")));
    }

    std::vector<Node> attribute_lists() {
        std::vector<Node> out;
        while (cur().punct("[")) {
            std::size_t b = cur().begin;
            std::size_t from = pos_;
            skip_balanced("[", "]");
            std::string text;
            for (std::size_t i = from; i < pos_; ++i) text += toks_[i].text;
            Node n = make("attribute_list", text, b);
            out.push_back(finish(std::move(n)));
        }
        return out;
    }

    Node modifiers() {
        Node mods = make("modifiers", "", cur().begin);
        std::string text;
        while (is_modifier(cur())) {
            // `new` starting an expression never reaches here; `partial`
            // and friends only count when another member token follows.
            if (cur().kind == TokenKind::Identifier &&
                !(peek(1).kind == TokenKind::Identifier || peek(1).kind == TokenKind::Keyword))
                break;
            if (!text.empty()) text += ' ';
            text += advance().text;
        }
        mods.text = text;
        return finish(std::move(mods));
    }

    Node type_declaration(std::size_t b, std::vector<Node> attrs, Node mods) {
        if (cur().keyword("delegate")) {
            while (!cur().punct(";") && !at_end()) advance();
            expect(";");
            Node d = make("delegate_declaration", "", b);
            return finish(std::move(d));
        }
        std::string keyword = advance().text;  // class/struct/interface/enum/record
        if (keyword == "record" && (cur().keyword("class") || cur().keyword("struct"))) advance();
        Node name = identifier();
        Node decl = make(keyword == "enum" ? "enum_declaration" : "class_declaration", name.text, b);
        for (auto& a : attrs) decl.children.push_back(std::move(a));
        decl.children.push_back(std::move(mods));
        decl.children.push_back(std::move(name));
        if (cur().punct("<")) skip_balanced("<", ">");
        if (cur().punct("(")) decl.children.push_back(parameter_list());
        // base list and constraints
        while (!cur().punct("{") && !cur().punct(";") && !at_end()) {
            if (cur().punct("(")) skip_balanced("(", ")");
            else if (cur().punct("<")) skip_balanced("<", ">");
            else advance();
        }
        if (eat(";")) return finish(std::move(decl));
        expect("{");
        if (keyword == "enum") {
            while (!cur().punct("}") && !at_end()) {
                std::size_t eb = cur().begin;
                attribute_lists();
                Node member = make("enum_member", "", eb);
                Node id = identifier();
                member.text = id.text;
                member.children.push_back(std::move(id));
                if (eat("=")) member.children.push_back(expression());
                decl.children.push_back(finish(std::move(member)));
                if (!eat(",")) break;
            }
        } else {
            while (!cur().punct("}") && !at_end()) {
                std::size_t start = pos_;
                recover_into(decl, [&] { return member(decl.text); });
                if (pos_ == start) advance();
            }
        }
        expect("}");
        eat(";");
        return finish(std::move(decl));
    }

    // Skip to the end of the member that starts at the current position.
    void skip_member() {
        int depth = 0;
        std::size_t start = pos_;
        while (!at_end()) {
            if (cur().punct("{")) ++depth;
            if (cur().punct("}")) {
                if (depth == 0) break;
                --depth;
                advance();
                if (depth == 0 && !cur().punct("=") && !cur().punct(";")) return;
                continue;
            }
            if (cur().punct(";") && depth == 0) {
                advance();
                return;
            }
            advance();
        }
        if (pos_ == start && !at_end() && !cur().punct("}")) advance();
    }

    void skip_balanced(std::string_view open, std::string_view close) {
        int depth = 0;
        do {
            if (cur().punct(open)) ++depth;
            else if (cur().punct(close)) --depth;
            else if (close == ">" && cur().punct(">=")) --depth;
            if (at_end()) fail("unbalanced '" + std::string(open) + "'");
            advance();
        } while (depth > 0);
    }

    // ---- class members ----------------------------------------------------

    Node member(const std::string& class_name) {
        std::size_t b = cur().begin;
        std::vector<Node> attrs = attribute_lists();
        Node mods = modifiers();
        if (starts_type_declaration()) return type_declaration(b, std::move(attrs), std::move(mods));

        auto start_member = [&](std::string kind, std::string name) {
            Node m = make(std::move(kind), std::move(name), b);
            for (auto& a : attrs) m.children.push_back(std::move(a));
            m.children.push_back(std::move(mods));
            return m;
        };

        if (cur().keyword("event")) {
            advance();
            Node f = start_member("field_declaration", "");
            f.children.back().text += f.children.back().text.empty() ? "event" : " event";
            f.children.push_back(type());
            if (cur().kind == TokenKind::Identifier && (peek(1).punct("{"))) {
                f.children.push_back(identifier());
                skip_balanced("{", "}");
                return finish(std::move(f));
            }
            declarators(f, /*local=*/false);
            expect(";");
            return finish(std::move(f));
        }

        // destructor
        if (cur().punct("~")) {
            advance();
            Node id = identifier();
            Node m = start_member("method_declaration", "~" + id.text);
            Node void_type = make("type", "void", id.begin);
            m.children.push_back(std::move(void_type));
            m.children.push_back(std::move(id));
            m.children.push_back(parameter_list());
            method_body(m);
            return finish(std::move(m));
        }

        // constructor: a name directly followed by '('
        if (cur().kind == TokenKind::Identifier && peek(1).punct("(") &&
            (class_name.empty() || cur().text == class_name)) {
            Node id = identifier();
            Node m = start_member("constructor_declaration", id.text);
            m.children.push_back(std::move(id));
            m.children.push_back(parameter_list());
            if (cur().punct(":")) {
                std::size_t ib = cur().begin;
                advance();
                Node init = make("constructor_initializer", "", ib);
                init.text = advance().text;  // base / this
                init.children.push_back(argument_list("(", ")", "argument_list"));
                m.children.push_back(finish(std::move(init)));
            }
            method_body(m);
            return finish(std::move(m));
        }

        // conversion operators
        if (cur().keyword("implicit") || cur().keyword("explicit")) {
            advance();
            if (!eat_kw("operator")) fail("expected 'operator'");
            Node t = type();
            Node m = start_member("method_declaration", "operator " + t.text);
            m.children.push_back(std::move(t));
            m.children.push_back(parameter_list());
            method_body(m);
            return finish(std::move(m));
        }

        Node t = type();

        if (cur().keyword("operator")) {
            advance();
            std::string op;
            while (!cur().punct("(") && !at_end()) op += advance().text;
            Node m = start_member("method_declaration", "operator" + op);
            m.children.push_back(std::move(t));
            m.children.push_back(parameter_list());
            method_body(m);
            return finish(std::move(m));
        }

        if (cur().keyword("this") && peek(1).punct("[")) {
            Node id = leaf("identifier", advance());
            Node p = start_member("property_declaration", "this[]");
            p.children.push_back(std::move(t));
            p.children.push_back(std::move(id));
            p.children.push_back(parameter_list("[", "]"));
            property_rest(p);
            return finish(std::move(p));
        }

        // member name, possibly an explicit interface qualification
        std::size_t name_begin = cur().begin;
        std::string name = identifier().text;
        while (cur().punct(".") || (cur().punct("<") && !looks_like_type_params())) {
            if (cur().punct("<")) {
                std::size_t from = pos_;
                skip_balanced("<", ">");
                for (std::size_t i = from; i < pos_; ++i) name += toks_[i].text;
                continue;
            }
            advance();
            if (cur().keyword("this")) {
                name += "." + advance().text;
                break;
            }
            name += "." + identifier().text;
        }
        Node id = make("identifier", name, name_begin);
        id = finish(std::move(id));

        if (cur().punct("(") || cur().punct("<")) {
            Node m = start_member("method_declaration", name);
            m.children.push_back(std::move(t));
            m.children.push_back(std::move(id));
            if (cur().punct("<")) m.children.push_back(type_parameter_list());
            m.children.push_back(parameter_list());
            while (cur().ident("where")) {
                while (!cur().punct("{") && !cur().punct(";") && !cur().punct("=>") && !at_end()) {
                    if (cur().punct("(")) skip_balanced("(", ")");
                    else advance();
                }
            }
            method_body(m);
            return finish(std::move(m));
        }
        if (cur().punct("{") || cur().punct("=>")) {
            Node p = start_member("property_declaration", name);
            p.children.push_back(std::move(t));
            p.children.push_back(std::move(id));
            property_rest(p);
            return finish(std::move(p));
        }

        // field: first declarator name already consumed
        Node f = start_member("field_declaration", "");
        if (f.children.back().text.find("const") != std::string::npos) f.text = "const";
        f.children.push_back(std::move(t));
        Node first = make("variable_declarator", "", id.begin);
        first.children.push_back(std::move(id));
        if (eat("=")) first.children.push_back(variable_initializer());
        f.children.push_back(finish(std::move(first)));
        if (eat(",")) declarators(f, /*local=*/false);
        expect(";");
        return finish(std::move(f));
    }

    bool looks_like_type_params() const {
        // `Name<T>(` on a method declaration: let the method branch take it
        int depth = 0;
        for (std::size_t i = pos_; i < toks_.size(); ++i) {
            const Token& t = toks_[i];
            if (t.punct("<")) ++depth;
            else if (t.punct(">")) {
                if (--depth == 0) return i + 1 < toks_.size() && toks_[i + 1].punct("(");
            } else if (t.punct(";") || t.punct("{") || t.kind == TokenKind::End) {
                return false;
            }
        }
        return false;
    }

    Node type_parameter_list() {
        std::size_t b = cur().begin;
        expect("<");
        Node list = make("type_parameter_list", "", b);
        while (!cur().punct(">") && !at_end()) {
            attribute_lists();
            if (cur().keyword("in") || cur().keyword("out")) advance();
            list.children.push_back(identifier());
            if (!eat(",")) break;
        }
        expect(">");
        return finish(std::move(list));
    }

    void property_rest(Node& p) {
        if (eat("=>")) {
            std::size_t b = prev_end();
            Node arrow = make("arrow_expression", "", b);
            arrow.children.push_back(expression());
            p.children.push_back(finish(std::move(arrow)));
            expect(";");
            return;
        }
        expect("{");
        while (!cur().punct("}") && !at_end()) {
            std::size_t ab = cur().begin;
            attribute_lists();
            while (cur().keyword("private") || cur().keyword("protected") || cur().keyword("internal") ||
                   cur().keyword("public") || cur().keyword("readonly"))
                advance();
            if (cur().kind != TokenKind::Identifier) fail("expected accessor");
            Node acc = make("accessor", advance().text, ab);
            if (cur().punct("{")) acc.children.push_back(body_block());
            else if (eat("=>")) {
                Node arrow = make("arrow_expression", "", prev_end());
                arrow.children.push_back(expression());
                acc.children.push_back(finish(std::move(arrow)));
                expect(";");
            } else {
                expect(";");
            }
            p.children.push_back(finish(std::move(acc)));
        }
        expect("}");
        if (eat("=")) {
            p.children.push_back(variable_initializer());
            expect(";");
        }
    }

    void method_body(Node& m) {
        if (eat(";")) return;
        if (cur().punct("=>")) {
            std::size_t save = pos_;
            std::size_t b = cur().begin;
            try {
                advance();
                Node arrow = make("arrow_expression", "", b);
                arrow.children.push_back(expression());
                expect(";");
                m.children.push_back(finish(std::move(arrow)));
            } catch (const ParseFail& f) {
                if (strict_) throw;
                diags_.push_back(f.diag);
                pos_ = save;
                while (!cur().punct(";") && !cur().punct("}") && !at_end()) advance();
                Node un = make("unparsed_body", "", b);
                un.end = prev_end();
                eat(";");
                m.children.push_back(std::move(un));
            }
            return;
        }
        m.children.push_back(body_block());
    }

    // A block that falls back to an opaque span in tolerant mode.
    Node body_block() {
        if (!cur().punct("{")) fail("expected '{' but found '" + describe(cur()) + "'");
        std::size_t save = pos_;
        std::size_t b = cur().begin;
        try {
            return block();
        } catch (const ParseFail& f) {
            if (strict_) throw;
            diags_.push_back(f.diag);
            pos_ = save;
            skip_balanced("{", "}");
            Node un = make("unparsed_body", "", b);
            return finish(std::move(un));
        }
    }

    Node parameter_list(std::string_view open = "(", std::string_view close = ")") {
        std::size_t b = cur().begin;
        expect(open);
        Node list = make("parameter_list", "", b);
        while (!cur().punct(close) && !at_end()) {
            std::size_t pb = cur().begin;
            attribute_lists();
            Node p = make("parameter", "", pb);
            while (cur().keyword("ref") || cur().keyword("out") || cur().keyword("in") || cur().keyword("params") ||
                   cur().keyword("this") || cur().ident("scoped")) {
                if (!p.text.empty()) p.text += ' ';
                p.text += advance().text;
            }
            p.children.push_back(type());
            p.children.push_back(identifier());
            if (eat("=")) p.children.push_back(expression());
            list.children.push_back(finish(std::move(p)));
            if (!eat(",")) break;
        }
        expect(close);
        return finish(std::move(list));
    }

    // ---- types --------------------------------------------------------------

    bool nullable_suffix_ok() const {
        const Token& n = peek(1);
        if (n.kind == TokenKind::End) return true;
        if (n.punct(">") || n.punct(",") || n.punct(")") || n.punct("]") || n.punct("[") || n.punct(";") ||
            n.punct("=") || n.punct("{") || n.punct("}") || n.punct("=>") || n.punct(">="))
            return true;
        if (n.kind == TokenKind::Identifier) {
            const Token& n2 = peek(2);
            return n2.punct("=") || n2.punct(";") || n2.punct(",") || n2.punct(")") || n2.keyword("in") ||
                   n2.punct("{") || n2.punct("=>") || n2.punct("(");
        }
        return false;
    }

    Node type(bool allow_array = true) {
        std::size_t b = cur().begin;
        std::string text;
        if (cur().punct("(")) {
            advance();
            text = "(";
            bool first = true;
            int elements = 0;
            while (!cur().punct(")") && !at_end()) {
                if (!first) text += ",";
                first = false;
                text += type().text;
                ++elements;
                if (cur().kind == TokenKind::Identifier) text += " " + advance().text;
                if (!eat(",")) break;
            }
            expect(")");
            if (elements < 2) fail("not a tuple type");
            text += ")";
        } else if (cur().kind == TokenKind::Keyword && is_predefined_type(cur().text)) {
            text = advance().text;
        } else if (cur().kind == TokenKind::Identifier) {
            text = advance().text;
            if (cur().punct("<")) text += type_argument_text();
            while ((cur().punct(".") || cur().punct("::")) && peek(1).kind == TokenKind::Identifier) {
                text += advance().text;
                text += advance().text;
                if (cur().punct("<")) text += type_argument_text();
            }
        } else {
            fail("expected type but found '" + describe(cur()) + "'");
        }
        for (;;) {
            if (cur().punct("?") && nullable_suffix_ok()) {
                text += advance().text;
                continue;
            }
            if (allow_array && cur().punct("[") && (peek(1).punct("]") || peek(1).punct(","))) {
                text += advance().text;
                while (cur().punct(",")) text += advance().text;
                if (!cur().punct("]")) fail("expected ']'");
                text += advance().text;
                continue;
            }
            if (cur().punct("*") && (peek(1).kind == TokenKind::Identifier || peek(1).punct(">"))) {
                text += advance().text;
                continue;
            }
            break;
        }
        Node t = make("type", text, b);
        return finish(std::move(t));
    }

    std::string type_argument_text() {
        std::string text;
        text += advance().text;  // <
        while (!cur().punct(">") && !at_end()) {
            if (cur().punct(",")) {
                text += advance().text;
                continue;
            }
            text += type().text;
            if (!cur().punct(",") && !cur().punct(">")) fail("bad type argument list");
        }
        if (!cur().punct(">")) fail("expected '>'");
        text += advance().text;
        return text;
    }

    std::optional<Node> try_type(bool allow_array = true) {
        std::size_t save = pos_;
        try {
            return type(allow_array);
        } catch (const ParseFail&) {
            pos_ = save;
            return std::nullopt;
        }
    }

    // ---- statements ---------------------------------------------------------

    Node block() {
        std::size_t b = cur().begin;
        expect("{");
        Node blk = make("block", "", b);
        while (!cur().punct("}")) {
            if (at_end()) fail("expected '}' but found end of input");
            blk.children.push_back(statement());
        }
        expect("}");
        return finish(std::move(blk));
    }

    Node embedded(std::string kind, std::size_t b) { return make(std::move(kind), "", b); }

    Node statement() {
        const Token& t = cur();
        std::size_t b = t.begin;
        if (t.punct("{")) return block();
        if (t.punct(";")) {
            advance();
            return finish(embedded("empty_statement", b));
        }
        if (t.kind == TokenKind::Keyword) {
            if (t.text == "if") return if_statement();
            if (t.text == "while") {
                advance();
                Node n = embedded("while_statement", b);
                expect("(");
                n.children.push_back(expression());
                expect(")");
                n.children.push_back(statement());
                return finish(std::move(n));
            }
            if (t.text == "do") {
                advance();
                Node n = embedded("do_statement", b);
                n.children.push_back(statement());
                if (!eat_kw("while")) fail("expected 'while'");
                expect("(");
                n.children.push_back(expression());
                expect(")");
                expect(";");
                return finish(std::move(n));
            }
            if (t.text == "for") return for_statement();
            if (t.text == "foreach") return foreach_statement(b);
            if (t.text == "return") {
                advance();
                Node n = embedded("return_statement", b);
                if (!cur().punct(";")) n.children.push_back(expression());
                expect(";");
                return finish(std::move(n));
            }
            if (t.text == "break" || t.text == "continue") {
                std::string kind = t.text + "_statement";
                advance();
                expect(";");
                return finish(embedded(kind, b));
            }
            if (t.text == "throw") {
                advance();
                Node n = embedded("throw_statement", b);
                if (!cur().punct(";")) n.children.push_back(expression());
                expect(";");
                return finish(std::move(n));
            }
            if (t.text == "try") return try_statement();
            if (t.text == "switch") return switch_statement();
            if (t.text == "lock") {
                advance();
                Node n = embedded("lock_statement", b);
                expect("(");
                n.children.push_back(expression());
                expect(")");
                n.children.push_back(statement());
                return finish(std::move(n));
            }
            if (t.text == "using") return using_statement(b);
            if ((t.text == "checked" || t.text == "unchecked" || t.text == "unsafe") && peek(1).punct("{")) {
                advance();
                return block();
            }
            if (t.text == "goto") {
                advance();
                Node n = embedded("goto_statement", b);
                if (eat_kw("case")) n.children.push_back(expression());
                else if (eat_kw("default")) n.text = "default";
                else n.text = identifier().text;
                expect(";");
                return finish(std::move(n));
            }
            if (t.text == "const") {
                advance();
                Node d = local_declaration_after_type(b, type());
                d.text = "const";
                expect(";");
                return finish(std::move(d));
            }
        }
        if (t.ident("yield") && (peek(1).keyword("return") || peek(1).keyword("break"))) {
            advance();
            Node n = embedded("yield_statement", b);
            n.text = advance().text;
            if (n.text == "return") n.children.push_back(expression());
            expect(";");
            return finish(std::move(n));
        }
        if (t.ident("await") && peek(1).keyword("foreach")) {
            advance();
            return foreach_statement(b);
        }
        if (t.ident("await") && peek(1).keyword("using")) {
            advance();
            return using_statement(b);
        }
        if (t.kind == TokenKind::Identifier && peek(1).punct(":") && !peek(1).punct("::")) {
            Node n = embedded("labeled_statement", b);
            n.text = advance().text;
            advance();
            n.children.push_back(statement());
            return finish(std::move(n));
        }
        if (auto decl = try_local_declaration(b)) return std::move(*decl);
        Node n = embedded("expression_statement", b);
        n.children.push_back(expression());
        expect(";");
        return finish(std::move(n));
    }

    std::optional<Node> try_local_declaration(std::size_t b) {
        std::size_t save = pos_;
        bool is_ref = false;
        if (cur().keyword("ref") || cur().ident("scoped")) {
            advance();
            is_ref = true;
            if (cur().keyword("readonly")) advance();
        }
        // local functions may carry modifiers
        bool had_modifier = false;
        while (cur().keyword("static") || cur().ident("async") || cur().keyword("unsafe")) {
            if (cur().ident("async") && !(peek(1).kind == TokenKind::Identifier || peek(1).kind == TokenKind::Keyword)) break;
            advance();
            had_modifier = true;
        }
        auto t = try_type();
        if (!t || cur().kind != TokenKind::Identifier) {
            pos_ = save;
            return std::nullopt;
        }
        const Token& after = peek(1);
        if (after.punct("(") || after.punct("<")) {
            // local function
            std::size_t fsave = pos_;
            try {
                Node id = identifier();
                Node fn = make("local_function", id.text, b);
                fn.children.push_back(make("modifiers", "", b));
                fn.children.push_back(std::move(*t));
                fn.children.push_back(std::move(id));
                if (cur().punct("<")) fn.children.push_back(type_parameter_list());
                fn.children.push_back(parameter_list());
                if (cur().punct("{") || cur().punct("=>")) {
                    if (cur().punct("{")) fn.children.push_back(block());
                    else {
                        std::size_t ab = cur().begin;
                        advance();
                        Node arrow = make("arrow_expression", "", ab);
                        arrow.children.push_back(expression());
                        fn.children.push_back(finish(std::move(arrow)));
                        expect(";");
                    }
                    return finish(std::move(fn));
                }
            } catch (const ParseFail&) {
            }
            pos_ = fsave;
            pos_ = save;
            return std::nullopt;
        }
        if (had_modifier || !(after.punct("=") || after.punct(";") || after.punct(",") || after.punct("["))) {
            pos_ = save;
            return std::nullopt;
        }
        Node d = local_declaration_after_type(b, std::move(*t));
        if (is_ref) d.text = "ref";
        expect(";");
        return finish(std::move(d));
    }

    Node local_declaration_after_type(std::size_t b, Node t) {
        Node d = make("local_declaration", "", b);
        d.children.push_back(std::move(t));
        declarators(d, /*local=*/true);
        return finish(std::move(d));
    }

    void declarators(Node& into, bool /*local*/) {
        do {
            std::size_t vb = cur().begin;
            Node v = make("variable_declarator", "", vb);
            v.children.push_back(identifier());
            if (cur().punct("[")) skip_balanced("[", "]");  // fixed buffers
            if (eat("=")) v.children.push_back(variable_initializer());
            into.children.push_back(finish(std::move(v)));
        } while (eat(","));
    }

    Node variable_initializer() {
        if (cur().punct("{")) return initializer("array");
        if (cur().keyword("ref")) advance();
        return expression();
    }

    Node if_statement() {
        std::size_t b = cur().begin;
        advance();
        Node n = embedded("if_statement", b);
        expect("(");
        n.children.push_back(expression());
        expect(")");
        n.children.push_back(statement());
        if (eat_kw("else")) n.children.push_back(statement());
        return finish(std::move(n));
    }

    Node for_statement() {
        std::size_t b = cur().begin;
        advance();
        Node n = embedded("for_statement", b);
        expect("(");
        Node init = make("for_initializer", "", cur().begin);
        if (!cur().punct(";")) {
            std::size_t save = pos_;
            auto t = try_type();
            if (t && cur().kind == TokenKind::Identifier && (peek(1).punct("=") || peek(1).punct(";") || peek(1).punct(","))) {
                init.children.push_back(local_declaration_after_type(t->begin, std::move(*t)));
            } else {
                pos_ = save;
                do {
                    init.children.push_back(expression());
                } while (eat(","));
            }
        }
        n.children.push_back(finish(std::move(init)));
        expect(";");
        if (cur().punct(";")) n.children.push_back(make("empty", "", cur().begin));
        else n.children.push_back(expression());
        expect(";");
        Node update = make("for_update", "", cur().begin);
        if (!cur().punct(")")) {
            do {
                update.children.push_back(expression());
            } while (eat(","));
        }
        n.children.push_back(finish(std::move(update)));
        expect(")");
        n.children.push_back(statement());
        return finish(std::move(n));
    }

    Node foreach_statement(std::size_t b) {
        advance();  // foreach
        Node n = embedded("foreach_statement", b);
        expect("(");
        if (cur().keyword("ref")) advance();
        n.children.push_back(type());
        n.children.push_back(identifier());
        if (!eat_kw("in")) fail("expected 'in'");
        n.children.push_back(expression());
        expect(")");
        n.children.push_back(statement());
        return finish(std::move(n));
    }

    Node try_statement() {
        std::size_t b = cur().begin;
        advance();
        Node n = embedded("try_statement", b);
        n.children.push_back(block());
        while (cur().keyword("catch")) {
            std::size_t cb = cur().begin;
            advance();
            Node c = make("catch_clause", "", cb);
            if (eat("(")) {
                c.children.push_back(type());
                if (cur().kind == TokenKind::Identifier) c.children.push_back(identifier());
                expect(")");
            }
            if (cur().ident("when")) {
                advance();
                expect("(");
                Node filter = make("catch_filter", "", cur().begin);
                filter.children.push_back(expression());
                c.children.push_back(finish(std::move(filter)));
                expect(")");
            }
            c.children.push_back(block());
            n.children.push_back(finish(std::move(c)));
        }
        if (cur().keyword("finally")) {
            std::size_t fb = cur().begin;
            advance();
            Node f = make("finally_clause", "", fb);
            f.children.push_back(block());
            n.children.push_back(finish(std::move(f)));
        }
        if (n.children.size() == 1) fail("try without catch or finally");
        return finish(std::move(n));
    }

    Node switch_statement() {
        std::size_t b = cur().begin;
        advance();
        Node n = embedded("switch_statement", b);
        expect("(");
        n.children.push_back(expression());
        expect(")");
        expect("{");
        while (!cur().punct("}") && !at_end()) {
            Node sec = make("switch_section", "", cur().begin);
            while (cur().keyword("case") || cur().keyword("default")) {
                std::size_t lb = cur().begin;
                if (eat_kw("default")) {
                    expect(":");
                    sec.children.push_back(finish(make("default_label", "", lb)));
                    continue;
                }
                advance();
                Node label = make("case_label", "", lb);
                label.children.push_back(pattern());
                if (cur().ident("when")) {
                    advance();
                    label.children.push_back(expression());
                }
                expect(":");
                sec.children.push_back(finish(std::move(label)));
            }
            if (sec.children.empty()) fail("expected 'case' or 'default'");
            while (!cur().keyword("case") && !cur().keyword("default") && !cur().punct("}") && !at_end())
                sec.children.push_back(statement());
            n.children.push_back(finish(std::move(sec)));
        }
        expect("}");
        return finish(std::move(n));
    }

    Node using_statement(std::size_t b) {
        advance();  // using
        if (eat("(")) {
            Node n = embedded("using_statement", b);
            std::size_t save = pos_;
            auto t = try_type();
            if (t && cur().kind == TokenKind::Identifier && peek(1).punct("=")) {
                n.children.push_back(local_declaration_after_type(t->begin, std::move(*t)));
            } else {
                pos_ = save;
                n.children.push_back(expression());
            }
            expect(")");
            n.children.push_back(statement());
            return finish(std::move(n));
        }
        Node d = local_declaration_after_type(b, type());
        d.text = "using";
        expect(";");
        return finish(std::move(d));
    }

    // ---- expressions --------------------------------------------------------

    bool lambda_ahead() const {
        std::size_t i = pos_;
        if (toks_[i].ident("async") && (toks_[i + 1].kind == TokenKind::Identifier || toks_[i + 1].punct("("))) ++i;
        if (toks_[i].keyword("static")) ++i;
        if (toks_[i].kind == TokenKind::Identifier && toks_[i + 1].punct("=>")) return true;
        if (toks_[i].punct("(")) {
            int depth = 0;
            for (std::size_t j = i; j < toks_.size(); ++j) {
                if (toks_[j].punct("(")) ++depth;
                else if (toks_[j].punct(")")) {
                    if (--depth == 0) return j + 1 < toks_.size() && toks_[j + 1].punct("=>");
                } else if (toks_[j].kind == TokenKind::End || toks_[j].punct(";") || toks_[j].punct("{")) {
                    return false;
                }
            }
        }
        return false;
    }

    Node lambda() {
        std::size_t b = cur().begin;
        Node lam = make("lambda_expression", "", b);
        if (cur().ident("async")) {
            advance();
            lam.text = "async";
        }
        eat_kw("static");
        Node params = make("parameter_list", "", cur().begin);
        if (cur().kind == TokenKind::Identifier) {
            Node p = make("parameter", "", cur().begin);
            p.children.push_back(identifier());
            params.children.push_back(finish(std::move(p)));
        } else {
            expect("(");
            while (!cur().punct(")") && !at_end()) {
                Node p = make("parameter", "", cur().begin);
                while (cur().keyword("ref") || cur().keyword("out") || cur().keyword("in")) p.text = advance().text;
                if (cur().kind == TokenKind::Identifier && (peek(1).punct(",") || peek(1).punct(")"))) {
                    p.children.push_back(identifier());
                } else {
                    p.children.push_back(type());
                    p.children.push_back(identifier());
                }
                params.children.push_back(finish(std::move(p)));
                if (!eat(",")) break;
            }
            expect(")");
        }
        lam.children.push_back(finish(std::move(params)));
        expect("=>");
        if (cur().punct("{")) lam.children.push_back(block());
        else lam.children.push_back(expression());
        return finish(std::move(lam));
    }

    static bool is_assignment_op(const std::string& t) {
        return t == "=" || t == "+=" || t == "-=" || t == "*=" || t == "/=" || t == "%=" || t == "&=" || t == "|=" ||
               t == "^=" || t == "<<=" || t == "?\?=";
    }

public:
    Node expression() {
        if (lambda_ahead()) return lambda();
        std::size_t b = cur().begin;
        if (cur().keyword("throw")) {
            advance();
            Node n = make("throw_expression", "", b);
            n.children.push_back(expression());
            return finish(std::move(n));
        }
        Node lhs = conditional();
        std::string op;
        if (cur().kind == TokenKind::Punct && is_assignment_op(cur().text)) {
            op = advance().text;
        } else if (cur().punct(">") && peek(1).punct(">=") && adjacent(1)) {
            advance();
            advance();
            op = ">>=";
        }
        if (!op.empty()) {
            Node n = make("assignment_expression", op, b);
            n.children.push_back(std::move(lhs));
            if (cur().punct("{") && op == "=") n.children.push_back(initializer("collection"));
            else n.children.push_back(expression());
            return finish(std::move(n));
        }
        return lhs;
    }

private:
    Node conditional() {
        std::size_t b = cur().begin;
        Node c = binary(1);
        if (cur().punct("?")) {
            advance();
            Node n = make("conditional_expression", "", b);
            n.children.push_back(std::move(c));
            n.children.push_back(expression());
            expect(":");
            n.children.push_back(expression());
            return finish(std::move(n));
        }
        return c;
    }

    // Returns precedence (0 if not a binary operator) and the operator text
    // plus the number of tokens it spans.
    int binary_op(std::string& op, int& ntoks) const {
        const Token& t = cur();
        ntoks = 1;
        if (t.kind == TokenKind::Keyword) {
            if (t.text == "is" || t.text == "as") {
                op = t.text;
                return 8;
            }
            return 0;
        }
        if (t.kind != TokenKind::Punct) return 0;
        op = t.text;
        if (op == ">" && peek(1).punct(">") && adjacent(1) && !(peek(2).punct("=") && adjacent(2))) {
            op = ">>";
            ntoks = 2;
            return 9;
        }
        if (op == ">" && peek(1).punct(">=") && adjacent(1)) return 0;  // >>=
        if (op == "??") return 1;
        if (op == "||") return 2;
        if (op == "&&") return 3;
        if (op == "|") return 4;
        if (op == "^") return 5;
        if (op == "&") return 6;
        if (op == "==" || op == "!=") return 7;
        if (op == "<" || op == ">" || op == "<=" || op == ">=") return 8;
        if (op == "<<") return 9;
        if (op == "+" || op == "-") return 10;
        if (op == "*" || op == "/" || op == "%") return 11;
        if (op == "..") return 12;
        return 0;
    }

    Node binary(int min_prec) {
        std::size_t b = cur().begin;
        Node lhs = unary();
        for (;;) {
            if (cur().keyword("switch") && peek(1).punct("{")) {
                lhs = switch_expression(std::move(lhs), b);
                continue;
            }
            std::string op;
            int ntoks = 1;
            int prec = binary_op(op, ntoks);
            if (prec == 0 || prec < min_prec) break;
            for (int i = 0; i < ntoks; ++i) advance();
            if (op == "is") {
                Node n = make("is_pattern_expression", "", b);
                n.children.push_back(std::move(lhs));
                n.children.push_back(pattern());
                lhs = finish(std::move(n));
                continue;
            }
            if (op == "as") {
                Node n = make("as_expression", "", b);
                n.children.push_back(std::move(lhs));
                n.children.push_back(type());
                lhs = finish(std::move(n));
                continue;
            }
            Node rhs = (op == "??") ? binary(prec) : binary(prec + 1);
            Node n = make("binary_expression", op, b);
            n.children.push_back(std::move(lhs));
            n.children.push_back(std::move(rhs));
            lhs = finish(std::move(n));
        }
        return lhs;
    }

    Node switch_expression(Node subject, std::size_t b) {
        advance();  // switch
        expect("{");
        Node n = make("switch_expression", "", b);
        n.children.push_back(std::move(subject));
        while (!cur().punct("}") && !at_end()) {
            Node arm = make("switch_expression_arm", "", cur().begin);
            arm.children.push_back(pattern());
            if (cur().ident("when")) {
                advance();
                arm.children.push_back(expression());
            }
            expect("=>");
            arm.children.push_back(expression());
            n.children.push_back(finish(std::move(arm)));
            if (!eat(",")) break;
        }
        expect("}");
        return finish(std::move(n));
    }

    Node pattern() {
        std::size_t b = cur().begin;
        Node left = primary_pattern();
        while (cur().ident("and") || cur().ident("or")) {
            Node n = make("binary_pattern", advance().text, b);
            n.children.push_back(std::move(left));
            n.children.push_back(primary_pattern());
            left = finish(std::move(n));
        }
        return left;
    }

    Node primary_pattern() {
        std::size_t b = cur().begin;
        if (cur().ident("not")) {
            advance();
            Node n = make("not_pattern", "", b);
            n.children.push_back(primary_pattern());
            return finish(std::move(n));
        }
        if (cur().punct("(")) {
            std::size_t save = pos_;
            try {
                advance();
                Node inner = pattern();
                expect(")");
                return inner;
            } catch (const ParseFail&) {
                pos_ = save;
            }
        }
        if (cur().punct("<") || cur().punct(">") || cur().punct("<=") || cur().punct(">=")) {
            Node n = make("relational_pattern", advance().text, b);
            n.children.push_back(binary(9));
            return finish(std::move(n));
        }
        if (cur().ident("_") ) {
            return leaf("discard_pattern", advance());
        }
        if (cur().ident("var") && peek(1).kind == TokenKind::Identifier) {
            Node n = make("declaration_pattern", "", b);
            n.children.push_back(leaf("type", advance()));
            n.children.push_back(identifier());
            return finish(std::move(n));
        }
        const Token& t = cur();
        bool constant = t.kind == TokenKind::Integer || t.kind == TokenKind::Real || t.kind == TokenKind::String ||
                        t.kind == TokenKind::Char || t.keyword("null") || t.keyword("true") || t.keyword("false") ||
                        t.punct("-") || t.kind == TokenKind::InterpolatedString;
        if (!constant) {
            if (auto ty = try_type()) {
                if (cur().kind == TokenKind::Identifier && !cur().ident("and") && !cur().ident("or") &&
                    !cur().ident("when")) {
                    Node n = make("declaration_pattern", "", b);
                    n.children.push_back(std::move(*ty));
                    n.children.push_back(identifier());
                    return finish(std::move(n));
                }
                Node n = make("type_pattern", "", b);
                n.children.push_back(std::move(*ty));
                return finish(std::move(n));
            }
        }
        Node n = make("constant_pattern", "", b);
        n.children.push_back(binary(9));
        return finish(std::move(n));
    }

    bool starts_operand(const Token& t) const {
        switch (t.kind) {
            case TokenKind::Identifier:
            case TokenKind::Integer:
            case TokenKind::Real:
            case TokenKind::String:
            case TokenKind::InterpolatedString:
            case TokenKind::Char:
                return true;
            case TokenKind::Keyword:
                return t.text != "is" && t.text != "as" && t.text != "in" && t.text != "out" && t.text != "ref";
            case TokenKind::Punct:
                return t.text == "(" || t.text == "!" || t.text == "~";
            default:
                return false;
        }
    }

    Node unary() {
        const Token& t = cur();
        std::size_t b = t.begin;
        if (t.kind == TokenKind::Punct &&
            (t.text == "+" || t.text == "-" || t.text == "!" || t.text == "~" || t.text == "++" || t.text == "--" ||
             t.text == "&" || t.text == "*" || t.text == "^")) {
            std::string op = advance().text;
            Node n = make("unary_expression", op, b);
            n.children.push_back(unary());
            return finish(std::move(n));
        }
        if (t.ident("await") && starts_operand(peek(1)) && !peek(1).punct("(") ) {
            advance();
            Node n = make("unary_expression", "await", b);
            n.children.push_back(unary());
            return finish(std::move(n));
        }
        if (t.ident("await") && peek(1).punct("(")) {
            // `await (x)` vs a call to a method named await: prefer await
            advance();
            Node n = make("unary_expression", "await", b);
            n.children.push_back(unary());
            return finish(std::move(n));
        }
        if (t.keyword("ref")) {
            advance();
            Node n = make("unary_expression", "ref", b);
            n.children.push_back(unary());
            return finish(std::move(n));
        }
        if (t.punct("(")) {
            if (auto cast = try_cast()) return std::move(*cast);
        }
        return postfix(primary());
    }

    std::optional<Node> try_cast() {
        std::size_t save = pos_;
        std::size_t b = cur().begin;
        advance();  // (
        auto ty = try_type();
        if (!ty || !cur().punct(")")) {
            pos_ = save;
            return std::nullopt;
        }
        advance();  // )
        const Token& next = cur();
        const std::string& tt = ty->text;
        bool predefined = is_predefined_type(tt) || tt.find('[') != std::string::npos || tt.back() == '?';
        bool cast = false;
        if (predefined && (starts_operand(next) || next.punct("-") || next.punct("+") || next.punct("++") || next.punct("--")))
            cast = true;
        else if (next.kind == TokenKind::Identifier || next.kind == TokenKind::Integer || next.kind == TokenKind::Real ||
                 next.kind == TokenKind::String || next.kind == TokenKind::Char || next.kind == TokenKind::InterpolatedString ||
                 next.punct("(") || next.punct("!") || next.punct("~"))
            cast = true;
        else if (next.kind == TokenKind::Keyword && next.text != "is" && next.text != "as" && next.text != "in" &&
                 next.text != "out" && next.text != "switch")
            cast = true;
        if (!cast) {
            pos_ = save;
            return std::nullopt;
        }
        Node n = make("cast_expression", "", b);
        n.children.push_back(std::move(*ty));
        n.children.push_back(unary());
        return finish(std::move(n));
    }

    bool type_args_follow_ok(const Token& t) const {
        if (t.kind == TokenKind::End) return true;
        if (t.kind != TokenKind::Punct) return false;
        static const char* kFollow[] = {"(", ")", "]", "}", ":", ";", ",", ".", "?", "==", "!=", "|", "^", "&&", "||", "&", "[", "?."};
        for (const char* f : kFollow)
            if (t.text == f) return true;
        return false;
    }

    Node name_or_generic() {
        Node id = identifier();
        if (cur().punct("<")) {
            std::size_t save = pos_;
            try {
                Node args = make("type_argument_list", "", cur().begin);
                advance();
                while (!cur().punct(">") && !at_end()) {
                    args.children.push_back(type());
                    if (!eat(",")) break;
                }
                if (!cur().punct(">")) fail("expected '>'");
                advance();
                args = finish(std::move(args));
                if (type_args_follow_ok(cur())) {
                    Node g = make("generic_name", id.text, id.begin);
                    g.children.push_back(std::move(id));
                    g.children.push_back(std::move(args));
                    return finish(std::move(g));
                }
            } catch (const ParseFail&) {
            }
            pos_ = save;
        }
        return id;
    }

    Node interpolated(const Token& t) {
        Node n = leaf("interpolated_string", t);
        for (auto [hb, he] : t.holes) {
            std::string_view hole = src_.substr(hb - base_, he - hb);
            Parser sub(hole, hb, true);
            Node e = sub.expression_only();
            n.children.push_back(std::move(e));
        }
        return n;
    }

    Node primary() {
        const Token& t = cur();
        std::size_t b = t.begin;
        switch (t.kind) {
            case TokenKind::Integer: return leaf("integer_literal", advance());
            case TokenKind::Real: return leaf("real_literal", advance());
            case TokenKind::String: return leaf("string_literal", advance());
            case TokenKind::Char: return leaf("char_literal", advance());
            case TokenKind::InterpolatedString: {
                const Token& s = advance();
                try {
                    return interpolated(s);
                } catch (const ParseFail& f) {
                    throw;
                }
            }
            case TokenKind::Identifier:
                if (t.ident("delegate")) break;
                return name_or_generic();
            case TokenKind::Keyword: {
                const std::string& k = t.text;
                if (k == "true" || k == "false") return leaf("boolean_literal", advance());
                if (k == "null") return leaf("null_literal", advance());
                if (k == "this") return leaf("this_expression", advance());
                if (k == "base") return leaf("base_expression", advance());
                if (k == "new") return creation();
                if (k == "typeof" || k == "sizeof") {
                    advance();
                    Node n = make(k + "_expression", "", b);
                    expect("(");
                    if (cur().punct(")")) fail("empty " + k);
                    // unbound generic `typeof(List<>)`
                    if (cur().kind == TokenKind::Identifier && peek(1).punct("<") && (peek(2).punct(">") || peek(2).punct(","))) {
                        std::size_t tb = cur().begin;
                        std::string text = advance().text;
                        std::size_t from = pos_;
                        skip_balanced("<", ">");
                        for (std::size_t i = from; i < pos_; ++i) text += toks_[i].text;
                        Node ty = make("type", text, tb);
                        n.children.push_back(finish(std::move(ty)));
                    } else {
                        n.children.push_back(type());
                    }
                    expect(")");
                    return finish(std::move(n));
                }
                if (k == "default") {
                    advance();
                    if (eat("(")) {
                        Node n = make("default_expression", "", b);
                        n.children.push_back(type());
                        expect(")");
                        return finish(std::move(n));
                    }
                    Node n = make("default_literal", "default", b);
                    return finish(std::move(n));
                }
                if (k == "checked" || k == "unchecked") {
                    advance();
                    expect("(");
                    Node n = make("parenthesized_expression", k, b);
                    n.children.push_back(expression());
                    expect(")");
                    return finish(std::move(n));
                }
                if (k == "delegate") {
                    advance();
                    Node lam = make("lambda_expression", "delegate", b);
                    if (cur().punct("(")) lam.children.push_back(parameter_list());
                    else lam.children.push_back(make("parameter_list", "", cur().begin));
                    lam.children.push_back(block());
                    return finish(std::move(lam));
                }
                if (is_predefined_type(k)) {
                    Node n = leaf("predefined_type", advance());
                    return n;
                }
                break;
            }
            case TokenKind::Punct:
                if (t.text == "(") return parenthesized();
                if (t.text == "[") {
                    // collection expression
                    Node n = make("collection_expression", "", b);
                    advance();
                    while (!cur().punct("]") && !at_end()) {
                        n.children.push_back(expression());
                        if (!eat(",")) break;
                    }
                    expect("]");
                    return finish(std::move(n));
                }
                break;
            default:
                break;
        }
        fail("unexpected '" + describe(t) + "' in expression");
    }

    Node parenthesized() {
        std::size_t b = cur().begin;
        advance();
        Node first = expression();
        if (eat(")")) {
            Node n = make("parenthesized_expression", "", b);
            n.children.push_back(std::move(first));
            return finish(std::move(n));
        }
        Node tuple = make("tuple_expression", "", b);
        tuple.children.push_back(std::move(first));
        while (eat(",")) tuple.children.push_back(expression());
        expect(")");
        return finish(std::move(tuple));
    }

    Node postfix(Node e) {
        for (;;) {
            const Token& t = cur();
            std::size_t b = e.begin;
            if (t.punct(".") || t.punct("?.") || t.punct("::")) {
                std::string op = advance().text;
                Node n = make("member_access_expression", op, b);
                n.children.push_back(std::move(e));
                if (cur().kind == TokenKind::Keyword && (cur().text == "new" || is_predefined_type(cur().text)))
                    n.children.push_back(leaf("identifier", advance()));
                else
                    n.children.push_back(name_or_generic());
                e = finish(std::move(n));
                continue;
            }
            if (t.punct("?") && peek(1).punct("[") && adjacent(1)) {
                advance();
                Node n = make("element_access_expression", "?[", b);
                n.children.push_back(std::move(e));
                n.children.push_back(argument_list("[", "]", "bracketed_argument_list"));
                e = finish(std::move(n));
                continue;
            }
            if (t.punct("(")) {
                Node n = make("invocation_expression", "", b);
                n.children.push_back(std::move(e));
                n.children.push_back(argument_list("(", ")", "argument_list"));
                e = finish(std::move(n));
                continue;
            }
            if (t.punct("[")) {
                Node n = make("element_access_expression", "[", b);
                n.children.push_back(std::move(e));
                n.children.push_back(argument_list("[", "]", "bracketed_argument_list"));
                e = finish(std::move(n));
                continue;
            }
            if (t.punct("++") || t.punct("--")) {
                Node n = make("postfix_unary_expression", advance().text, b);
                n.children.push_back(std::move(e));
                e = finish(std::move(n));
                continue;
            }
            if (t.punct("!") && !starts_operand(peek(1))) {
                Node n = make("postfix_unary_expression", advance().text, b);
                n.children.push_back(std::move(e));
                e = finish(std::move(n));
                continue;
            }
            if (t.punct("->")) {
                advance();
                Node n = make("member_access_expression", "->", b);
                n.children.push_back(std::move(e));
                n.children.push_back(identifier());
                e = finish(std::move(n));
                continue;
            }
            return e;
        }
    }

    Node argument_list(std::string_view open, std::string_view close, const std::string& kind) {
        std::size_t b = cur().begin;
        expect(open);
        Node list = make(kind, "", b);
        while (!cur().punct(close) && !at_end()) {
            std::size_t ab = cur().begin;
            Node arg = make("argument", "", ab);
            if (cur().kind == TokenKind::Identifier && peek(1).punct(":")) {
                arg.children.push_back(leaf("argument_name", advance()));
                advance();
            }
            if (cur().keyword("ref") || cur().keyword("out") || cur().keyword("in")) {
                arg.text = advance().text;
                if (arg.text == "out") {
                    std::size_t save = pos_;
                    std::size_t db = cur().begin;
                    auto ty = try_type();
                    if (ty && cur().kind == TokenKind::Identifier && (peek(1).punct(",") || peek(1).punct(close))) {
                        Node decl = make("declaration_expression", "", db);
                        decl.children.push_back(std::move(*ty));
                        decl.children.push_back(identifier());
                        arg.children.push_back(finish(std::move(decl)));
                        list.children.push_back(finish(std::move(arg)));
                        if (!eat(",")) break;
                        continue;
                    }
                    pos_ = save;
                }
            }
            arg.children.push_back(expression());
            list.children.push_back(finish(std::move(arg)));
            if (!eat(",")) break;
        }
        expect(close);
        return finish(std::move(list));
    }

    Node creation() {
        std::size_t b = cur().begin;
        advance();  // new
        if (cur().punct("[")) {
            advance();
            while (cur().punct(",")) advance();
            expect("]");
            Node n = make("array_creation_expression", "", b);
            n.children.push_back(make("implicit_type", "", b));
            n.children.push_back(initializer("array"));
            return finish(std::move(n));
        }
        if (cur().punct("{")) {
            Node n = make("anonymous_object_creation_expression", "", b);
            advance();
            while (!cur().punct("}") && !at_end()) {
                std::size_t mb = cur().begin;
                Node m = make("member_initializer", "", mb);
                if (cur().kind == TokenKind::Identifier && peek(1).punct("=")) {
                    m.children.push_back(leaf("member_name", advance()));
                    advance();
                }
                m.children.push_back(expression());
                n.children.push_back(finish(std::move(m)));
                if (!eat(",")) break;
            }
            expect("}");
            return finish(std::move(n));
        }
        if (cur().punct("(")) {
            Node n = make("object_creation_expression", "", b);
            n.children.push_back(make("implicit_type", "", b));
            n.children.push_back(argument_list("(", ")", "argument_list"));
            if (cur().punct("{")) n.children.push_back(initializer("object"));
            return finish(std::move(n));
        }
        Node ty = type(/*allow_array=*/false);
        if (cur().punct("[")) {
            Node n = make("array_creation_expression", "", b);
            std::vector<Node> sizes;
            advance();
            std::string rank = "[";
            while (!cur().punct("]") && !at_end()) {
                if (cur().punct(",")) {
                    rank += advance().text;
                    continue;
                }
                sizes.push_back(expression());
                if (cur().punct(",")) rank += advance().text;
            }
            expect("]");
            rank += "]";
            while (cur().punct("[") && (peek(1).punct("]") || peek(1).punct(","))) {
                rank += advance().text;
                while (cur().punct(",")) rank += advance().text;
                expect("]");
                rank += "]";
            }
            ty.text += rank;
            ty.end = prev_end();
            n.children.push_back(std::move(ty));
            for (auto& s : sizes) n.children.push_back(std::move(s));
            if (cur().punct("{")) n.children.push_back(initializer("array"));
            return finish(std::move(n));
        }
        Node n = make("object_creation_expression", "", b);
        n.children.push_back(std::move(ty));
        if (cur().punct("(")) n.children.push_back(argument_list("(", ")", "argument_list"));
        if (cur().punct("{")) n.children.push_back(initializer("object"));
        if (n.children.size() == 1) fail("expected '(' or '{' after 'new " + n.children[0].text + "'");
        return finish(std::move(n));
    }

    Node initializer(const std::string& flavor) {
        std::size_t b = cur().begin;
        expect("{");
        Node n = make("initializer_expression", flavor, b);
        while (!cur().punct("}") && !at_end()) {
            std::size_t eb = cur().begin;
            if (cur().punct("{")) {
                n.children.push_back(initializer("complex"));
            } else if (cur().punct("[")) {
                Node ix = make("indexer_initializer", "", eb);
                ix.children.push_back(argument_list("[", "]", "bracketed_argument_list"));
                expect("=");
                ix.children.push_back(cur().punct("{") ? initializer("object") : expression());
                n.children.push_back(finish(std::move(ix)));
            } else if (cur().kind == TokenKind::Identifier && peek(1).punct("=")) {
                Node m = make("member_initializer", "", eb);
                m.children.push_back(leaf("member_name", advance()));
                advance();
                m.children.push_back(cur().punct("{") ? initializer("object") : expression());
                n.children.push_back(finish(std::move(m)));
            } else {
                n.children.push_back(expression());
            }
            if (!eat(",")) break;
        }
        expect("}");
        return finish(std::move(n));
    }

    std::string_view src_;
    std::size_t base_ = 0;
    bool strict_ = false;
    std::vector<Token> toks_;
    std::vector<Diagnostic> diags_;
    std::size_t pos_ = 0;
};

template <typename F>
ParseResult run_parser(std::string_view src, bool strict, F&& entry) {
    ParseResult res;
    try {
        Parser p(src, 0, strict);
        res.root = entry(p);
        res.diagnostics = std::move(p.diagnostics());
    } catch (const ParseFail& f) {
        res.root = Node{};
        res.root.kind = "error";
        res.diagnostics.push_back(f.diag);
    }
    return res;
}

}  // namespace detail

/// Whole-file parse with member-level recovery.
inline ParseResult parse_compilation_unit(std::string_view src) {
    return detail::run_parser(src, false, [](detail::Parser& p) { return p.compilation_unit(); });
}

/// Strict parse of patch text: using directives and members without an
/// enclosing class.
inline ParseResult parse_member_fragment(std::string_view src) {
    return detail::run_parser(src, true, [](detail::Parser& p) { return p.member_fragment(); });
}

/// Strict parse of a statement sequence.
inline ParseResult parse_statements(std::string_view src) {
    return detail::run_parser(src, true, [](detail::Parser& p) { return p.statement_list(); });
}

/// Strict parse of a single expression.
inline ParseResult parse_expression(std::string_view src) {
    return detail::run_parser(src, true, [](detail::Parser& p) { return p.expression_only(); });
}

/// Best-effort strict parse of an arbitrary code snippet: member fragment,
/// then statements, then a lone expression.
inline ParseResult parse_snippet(std::string_view src) {
    auto members = parse_member_fragment(src);
    if (members.ok()) return members;
    auto stmts = parse_statements(src);
    if (stmts.ok()) return stmts;
    auto expr = parse_expression(src);
    if (expr.ok()) return expr;
    return members;
}

inline std::string format_diagnostic(const Diagnostic& d) {
    return std::to_string(d.line) + ":" + std::to_string(d.column) + ": " + d.message;
}

}  // namespace perfpatch::csharp
