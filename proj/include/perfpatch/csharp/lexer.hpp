#pragma once

// Tokenizer for C# source text. Contextual keywords (var, async, await,
// yield, where, ...) are returned as identifiers; the parser decides.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "perfpatch/error.hpp"

namespace perfpatch::csharp {

enum class TokenKind { Identifier, Keyword, Integer, Real, String, InterpolatedString, Char, Punct, Comment, Directive, End };

struct Token {
    TokenKind kind = TokenKind::End;
    std::string text;
    std::size_t begin = 0;  // absolute offset of the first byte
    std::size_t end = 0;    // one past the last byte
    int line = 1;
    int column = 1;
    /// Interpolation holes of an interpolated string: absolute [begin, end)
    /// of each embedded expression, format clause excluded.
    std::vector<std::pair<std::size_t, std::size_t>> holes;

    bool is(TokenKind k, std::string_view t) const { return kind == k && text == t; }
    bool punct(std::string_view t) const { return kind == TokenKind::Punct && text == t; }
    bool keyword(std::string_view t) const { return kind == TokenKind::Keyword && text == t; }
    bool ident(std::string_view t) const { return kind == TokenKind::Identifier && text == t; }
};

struct Diagnostic {
    std::size_t offset = 0;
    int line = 0;
    int column = 0;
    std::string message;
};

struct LexResult {
    std::vector<Token> tokens;  // always terminated by an End token
    std::vector<Diagnostic> diagnostics;
};

inline bool is_reserved_keyword(std::string_view word) {
    static constexpr std::array<std::string_view, 77> kWords = {
        "abstract", "as",       "base",      "bool",      "break",    "byte",     "case",     "catch",
        "char",     "checked",  "class",     "const",     "continue", "decimal",  "default",  "delegate",
        "do",       "double",   "else",      "enum",      "event",    "explicit", "extern",   "false",
        "finally",  "fixed",    "float",     "for",       "foreach",  "goto",     "if",       "implicit",
        "in",       "int",      "interface", "internal",  "is",       "lock",     "long",     "namespace",
        "new",      "null",     "object",    "operator",  "out",      "override", "params",   "private",
        "protected", "public",  "readonly",  "ref",       "return",   "sbyte",    "sealed",   "short",
        "sizeof",   "stackalloc", "static",  "string",    "struct",   "switch",   "this",     "throw",
        "true",     "try",      "typeof",    "uint",      "ulong",    "unchecked", "unsafe",  "ushort",
        "using",    "virtual",  "void",      "volatile",  "while"};
    return std::find(kWords.begin(), kWords.end(), word) != kWords.end();
}

inline bool is_predefined_type(std::string_view word) {
    static constexpr std::array<std::string_view, 17> kTypes = {
        "bool", "byte", "char", "decimal", "double", "float", "int", "long", "object",
        "sbyte", "short", "string", "uint", "ulong", "ushort", "void", "dynamic"};
    return std::find(kTypes.begin(), kTypes.end(), word) != kTypes.end();
}

namespace detail {

inline bool ident_start(unsigned char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c >= 0x80; }
inline bool ident_part(unsigned char c) { return ident_start(c) || (c >= '0' && c <= '9'); }
inline bool digit(unsigned char c) { return c >= '0' && c <= '9'; }

class Lexer {
public:
    Lexer(std::string_view src, std::size_t base, bool keep_comments)
        : src_(src), base_(base), keep_comments_(keep_comments) {}

    LexResult run() {
        LexResult out;
        bool line_start = true;
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '\n') {
                advance();
                line_start = true;
                continue;
            }
            if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
                advance();
                continue;
            }
            Token tok;
            tok.begin = base_ + pos_;
            tok.line = line_;
            tok.column = col_;
            std::size_t start = pos_;
            if (c == '#' && line_start) {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
                tok.kind = TokenKind::Directive;
            } else if (c == '/' && peek(1) == '/') {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
                tok.kind = TokenKind::Comment;
            } else if (c == '/' && peek(1) == '*') {
                advance(2);
                bool closed = false;
                while (pos_ < src_.size()) {
                    if (src_[pos_] == '*' && peek(1) == '/') {
                        advance(2);
                        closed = true;
                        break;
                    }
                    advance();
                }
                if (!closed) error(out, tok, "unterminated block comment");
                tok.kind = TokenKind::Comment;
            } else if (c == '"' || ((c == '@' || c == '$') && (peek(1) == '"' || ((peek(1) == '@' || peek(1) == '$') && peek(2) == '"')))) {
                lex_string(out, tok);
            } else if (c == '\'') {
                lex_char(out, tok);
            } else if (ident_start(static_cast<unsigned char>(c)) || (c == '@' && ident_start(static_cast<unsigned char>(peek(1))))) {
                if (c == '@') advance();
                while (pos_ < src_.size() && ident_part(static_cast<unsigned char>(src_[pos_]))) advance();
                std::string_view word = src_.substr(start, pos_ - start);
                tok.kind = (word.front() != '@' && is_reserved_keyword(word)) ? TokenKind::Keyword : TokenKind::Identifier;
            } else if (digit(static_cast<unsigned char>(c)) || (c == '.' && digit(static_cast<unsigned char>(peek(1))))) {
                lex_number(tok);
            } else {
                lex_punct(tok);
            }
            tok.end = base_ + pos_;
            tok.text = std::string(src_.substr(start, pos_ - start));
            line_start = false;
            if (tok.kind == TokenKind::Comment && !keep_comments_) continue;
            if (tok.kind == TokenKind::Directive && !keep_comments_) {
                line_start = true;
                continue;
            }
            out.tokens.push_back(std::move(tok));
        }
        Token end;
        end.kind = TokenKind::End;
        end.begin = end.end = base_ + src_.size();
        end.line = line_;
        end.column = col_;
        out.tokens.push_back(end);
        return out;
    }

private:
    char peek(std::size_t k) const { return pos_ + k < src_.size() ? src_[pos_ + k] : '\0'; }

    void advance(std::size_t n = 1) {
        for (std::size_t i = 0; i < n && pos_ < src_.size(); ++i) {
            if (src_[pos_] == '\n') {
                ++line_;
                col_ = 1;
            } else {
                ++col_;
            }
            ++pos_;
        }
    }

    void error(LexResult& out, const Token& tok, std::string msg) {
        out.diagnostics.push_back({tok.begin, tok.line, tok.column, std::move(msg)});
    }

    void lex_string(LexResult& out, Token& tok) {
        bool verbatim = false;
        bool interpolated = false;
        while (src_[pos_] == '@' || src_[pos_] == '$') {
            if (src_[pos_] == '@') verbatim = true;
            else interpolated = true;
            advance();
        }
        tok.kind = interpolated ? TokenKind::InterpolatedString : TokenKind::String;
        advance();  // opening quote
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (!verbatim && c == '\n') break;
            if (!verbatim && c == '\\') {
                advance(2);
                continue;
            }
            if (c == '"') {
                if (verbatim && peek(1) == '"') {
                    advance(2);
                    continue;
                }
                advance();
                return;
            }
            if (interpolated && c == '{') {
                if (peek(1) == '{') {
                    advance(2);
                    continue;
                }
                advance();
                scan_hole(tok);
                continue;
            }
            advance();
        }
        error(out, tok, "unterminated string literal");
    }

    // Positioned just after '{'. Consumes through the matching '}'.
    void scan_hole(Token& tok) {
        std::size_t hole_begin = pos_;
        std::size_t expr_end = std::string_view::npos;
        int depth = 0;
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == '"' || c == '\'') {
                char q = c;
                advance();
                while (pos_ < src_.size() && src_[pos_] != q && src_[pos_] != '\n') {
                    if (src_[pos_] == '\\') advance();
                    advance();
                }
                advance();
                continue;
            }
            if (c == '(' || c == '[' || c == '{') ++depth;
            if (c == ')' || c == ']') --depth;
            if (c == '}') {
                if (depth == 0) {
                    if (expr_end == std::string_view::npos) expr_end = pos_;
                    tok.holes.emplace_back(base_ + hole_begin, base_ + expr_end);
                    advance();
                    return;
                }
                --depth;
            }
            if (depth == 0 && expr_end == std::string_view::npos && (c == ',' || (c == ':' && peek(1) != ':'))) expr_end = pos_;
            if (c == '\n' && depth == 0) break;
            advance();
        }
    }

    void lex_char(LexResult& out, Token& tok) {
        tok.kind = TokenKind::Char;
        advance();
        while (pos_ < src_.size() && src_[pos_] != '\'' && src_[pos_] != '\n') {
            if (src_[pos_] == '\\') advance();
            advance();
        }
        if (pos_ < src_.size() && src_[pos_] == '\'') advance();
        else error(out, tok, "unterminated character literal");
    }

    void lex_number(Token& tok) {
        tok.kind = TokenKind::Integer;
        if (src_[pos_] == '0' && (peek(1) == 'x' || peek(1) == 'X' || peek(1) == 'b' || peek(1) == 'B')) {
            advance(2);
            while (pos_ < src_.size() && (std::isxdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) advance();
        } else {
            while (pos_ < src_.size() && (digit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) advance();
            if (pos_ < src_.size() && src_[pos_] == '.' && digit(static_cast<unsigned char>(peek(1)))) {
                tok.kind = TokenKind::Real;
                advance();
                while (pos_ < src_.size() && (digit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) advance();
            }
            if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
                std::size_t k = 1;
                if (peek(1) == '+' || peek(1) == '-') k = 2;
                if (digit(static_cast<unsigned char>(peek(k)))) {
                    tok.kind = TokenKind::Real;
                    advance(k);
                    while (pos_ < src_.size() && digit(static_cast<unsigned char>(src_[pos_]))) advance();
                }
            }
        }
        while (pos_ < src_.size()) {
            char s = src_[pos_];
            if (s == 'f' || s == 'F' || s == 'd' || s == 'D' || s == 'm' || s == 'M') {
                tok.kind = TokenKind::Real;
                advance();
            } else if (s == 'u' || s == 'U' || s == 'l' || s == 'L') {
                advance();
            } else {
                break;
            }
        }
    }

    void lex_punct(Token& tok) {
        // '>' is never combined with a following '>' so generic argument
        // lists close cleanly; the expression parser rebuilds '>>'.
        static constexpr std::array<std::string_view, 26> kMulti = {
            "<<=", "?\?=", "...", "=>", "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=",
            "-=",  "*=",  "/=",  "%=", "&=", "|=", "^=", "??", "?.", "::", "..", "->", "<<"};
        tok.kind = TokenKind::Punct;
        for (auto m : kMulti) {
            if (src_.substr(pos_, m.size()) == m) {
                // `?.` followed by a digit is a conditional with a real literal
                if (m == "?." && digit(static_cast<unsigned char>(peek(2)))) break;
                advance(m.size());
                return;
            }
        }
        advance();
    }

    std::string_view src_;
    std::size_t base_ = 0;
    bool keep_comments_ = false;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

}  // namespace detail

/// Tolerant tokenization: problems are reported as diagnostics, never thrown.
inline LexResult lex(std::string_view src, std::size_t base = 0, bool keep_comments = false) {
    return detail::Lexer(src, base, keep_comments).run();
}

/// Tokenization that rejects malformed literals and comments.
inline std::vector<Token> tokenize_strict(std::string_view src) {
    auto res = lex(src);
    if (!res.diagnostics.empty()) {
        const auto& d = res.diagnostics.front();
        throw TokenizationFailure(std::to_string(d.line) + ":" + std::to_string(d.column) + ": " + d.message);
    }
    return std::move(res.tokens);
}

/// Remove comments while keeping string and character literals intact. Line
/// structure is preserved: a block comment becomes one space, a line comment
/// disappears up to its newline.
inline std::string strip_comments(std::string_view src) {
    std::string out;
    out.reserve(src.size());
    std::size_t i = 0;
    const std::size_t n = src.size();
    auto at = [&](std::size_t k) { return k < n ? src[k] : '\0'; };
    while (i < n) {
        char c = src[i];
        if (c == '/' && at(i + 1) == '/') {
            while (i < n && src[i] != '\n') ++i;
            continue;
        }
        if (c == '/' && at(i + 1) == '*') {
            i += 2;
            while (i < n && !(src[i] == '*' && at(i + 1) == '/')) ++i;
            i = std::min(n, i + 2);
            out.push_back(' ');
            continue;
        }
        if (c == '"' || ((c == '@' || c == '$') && (at(i + 1) == '"' || ((at(i + 1) == '@' || at(i + 1) == '$') && at(i + 2) == '"')))) {
            bool verbatim = false;
            while (i < n && (src[i] == '@' || src[i] == '$')) {
                verbatim = verbatim || src[i] == '@';
                out.push_back(src[i++]);
            }
            out.push_back(src[i++]);  // opening quote
            while (i < n) {
                char s = src[i];
                if (!verbatim && s == '\n') break;
                if (!verbatim && s == '\\' && i + 1 < n) {
                    out.push_back(s);
                    out.push_back(src[i + 1]);
                    i += 2;
                    continue;
                }
                out.push_back(s);
                ++i;
                if (s == '"') {
                    if (verbatim && i < n && src[i] == '"') {
                        out.push_back(src[i++]);
                        continue;
                    }
                    break;
                }
            }
            continue;
        }
        if (c == '\'') {
            out.push_back(src[i++]);
            while (i < n && src[i] != '\'' && src[i] != '\n') {
                if (src[i] == '\\' && i + 1 < n) out.push_back(src[i++]);
                out.push_back(src[i++]);
            }
            if (i < n && src[i] == '\'') out.push_back(src[i++]);
            continue;
        }
        out.push_back(c);
        ++i;
    }
    return out;
}

}  // namespace perfpatch::csharp
