#pragma once

#include <cctype>
#include <cstdint>
#include <string>
#include <vector>

#include "stangen/diagnostics.hpp"

namespace stangen {

enum class Tok {
    End,
    Ident,       // possibly dotted: mlp.l1.weight
    IntLit,
    RealLit,
    StringLit,
    // structural keywords
    KwFor,
    KwIn,
    KwWhile,
    KwIf,
    KwElse,
    KwReturn,
    KwTarget,
    KwInt,
    KwReal,
    KwVector,
    KwRowVector,
    KwMatrix,
    // punctuation and operators
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBrack,
    RBrack,
    Comma,
    Semi,
    Colon,
    Wildcard,    // a lone `_`
    Assign,      // =
    PlusEq,      // +=
    Tilde,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Bang,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    NotEq,
    AndAnd,
    OrOr,
};

struct Token {
    Tok kind = Tok::End;
    std::string text;
    long long int_value = 0;
    double real_value = 0.0;
    SourceSpan span;
};

inline const char* token_name(Tok k) {
    switch (k) {
        case Tok::End: return "<eof>";
        case Tok::Ident: return "identifier";
        case Tok::IntLit: return "integer literal";
        case Tok::RealLit: return "real literal";
        case Tok::StringLit: return "string literal";
        case Tok::KwFor: return "'for'";
        case Tok::KwIn: return "'in'";
        case Tok::KwWhile: return "'while'";
        case Tok::KwIf: return "'if'";
        case Tok::KwElse: return "'else'";
        case Tok::KwReturn: return "'return'";
        case Tok::KwTarget: return "'target'";
        case Tok::KwInt: return "'int'";
        case Tok::KwReal: return "'real'";
        case Tok::KwVector: return "'vector'";
        case Tok::KwRowVector: return "'row_vector'";
        case Tok::KwMatrix: return "'matrix'";
        case Tok::LParen: return "'('";
        case Tok::RParen: return "')'";
        case Tok::LBrace: return "'{'";
        case Tok::RBrace: return "'}'";
        case Tok::LBrack: return "'['";
        case Tok::RBrack: return "']'";
        case Tok::Comma: return "','";
        case Tok::Semi: return "';'";
        case Tok::Colon: return "':'";
        case Tok::Wildcard: return "'_'";
        case Tok::Assign: return "'='";
        case Tok::PlusEq: return "'+='";
        case Tok::Tilde: return "'~'";
        case Tok::Plus: return "'+'";
        case Tok::Minus: return "'-'";
        case Tok::Star: return "'*'";
        case Tok::Slash: return "'/'";
        case Tok::Caret: return "'^'";
        case Tok::Bang: return "'!'";
        case Tok::Lt: return "'<'";
        case Tok::Le: return "'<='";
        case Tok::Gt: return "'>'";
        case Tok::Ge: return "'>='";
        case Tok::EqEq: return "'=='";
        case Tok::NotEq: return "'!='";
        case Tok::AndAnd: return "'&&'";
        case Tok::OrOr: return "'||'";
    }
    return "?";
}

// Lexer for Stan source and for the IR surface text (which shares the token
// set).  Comments `//`, `/* */` and `#` are stripped.  `a.b.c` forms a single
// dotted identifier; a dot is never an operator.
class Lexer {
public:
    Lexer(std::string_view src, Diagnostics& diags) : src_(src), diags_(diags) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        for (;;) {
            Token t = next();
            out.push_back(t);
            if (t.kind == Tok::End) break;
            if (failed_) break;
        }
        if (failed_ && (out.empty() || out.back().kind != Tok::End)) {
            Token t;
            t.kind = Tok::End;
            t.span = here();
            out.push_back(t);
        }
        return out;
    }

private:
    std::string_view src_;
    Diagnostics& diags_;
    size_t pos_ = 0;
    uint32_t line_ = 1;
    uint32_t col_ = 1;
    bool failed_ = false;

    SourceSpan here() const { return {line_, col_, line_, col_}; }

    char peek(size_t off = 0) const {
        return pos_ + off < src_.size() ? src_[pos_ + off] : '\0';
    }

    char bump() {
        char c = src_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }

    bool skip_trivia() {
        for (;;) {
            char c = peek();
            if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                bump();
            } else if (c == '/' && peek(1) == '/') {
                while (peek() && peek() != '\n') bump();
            } else if (c == '#') {
                while (peek() && peek() != '\n') bump();
            } else if (c == '/' && peek(1) == '*') {
                SourceSpan start = here();
                bump();
                bump();
                bool closed = false;
                while (peek()) {
                    if (peek() == '*' && peek(1) == '/') {
                        bump();
                        bump();
                        closed = true;
                        break;
                    }
                    bump();
                }
                if (!closed) {
                    diags_.error("lex-error", "unterminated block comment", start);
                    failed_ = true;
                    return false;
                }
            } else {
                return true;
            }
        }
    }

    static bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) != 0; }
    static bool ident_char(char c) {
        return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
    }

    Token make(Tok k, SourceSpan start, std::string text = {}) {
        Token t;
        t.kind = k;
        t.text = std::move(text);
        t.span = start;
        t.span.end_line = line_;
        t.span.end_column = col_;
        return t;
    }

    Token next() {
        if (!skip_trivia()) return make(Tok::End, here());
        SourceSpan start = here();
        char c = peek();
        if (c == '\0') return make(Tok::End, start);

        if (ident_start(c) || (c == '_' && ident_char(peek(1)))) {
            std::string s;
            while (ident_char(peek())) s += bump();
            // dotted path: continue only when a letter follows the dot
            while (peek() == '.' && ident_start(peek(1))) {
                s += bump();
                while (ident_char(peek())) s += bump();
            }
            if (s == "for") return make(Tok::KwFor, start, s);
            if (s == "in") return make(Tok::KwIn, start, s);
            if (s == "while") return make(Tok::KwWhile, start, s);
            if (s == "if") return make(Tok::KwIf, start, s);
            if (s == "else") return make(Tok::KwElse, start, s);
            if (s == "return") return make(Tok::KwReturn, start, s);
            if (s == "target") return make(Tok::KwTarget, start, s);
            if (s == "int") return make(Tok::KwInt, start, s);
            if (s == "real") return make(Tok::KwReal, start, s);
            if (s == "vector") return make(Tok::KwVector, start, s);
            if (s == "row_vector") return make(Tok::KwRowVector, start, s);
            if (s == "matrix") return make(Tok::KwMatrix, start, s);
            return make(Tok::Ident, start, s);
        }

        if (c == '_') {
            bump();
            return make(Tok::Wildcard, start, "_");
        }

        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))))) {
            std::string s;
            bool is_real = false;
            while (std::isdigit(static_cast<unsigned char>(peek()))) s += bump();
            if (peek() == '.') {
                is_real = true;
                s += bump();
                while (std::isdigit(static_cast<unsigned char>(peek()))) s += bump();
            }
            if (peek() == 'e' || peek() == 'E') {
                char sign = peek(1);
                if (std::isdigit(static_cast<unsigned char>(sign)) ||
                    ((sign == '+' || sign == '-') &&
                     std::isdigit(static_cast<unsigned char>(peek(2))))) {
                    is_real = true;
                    s += bump();
                    if (peek() == '+' || peek() == '-') s += bump();
                    while (std::isdigit(static_cast<unsigned char>(peek()))) s += bump();
                }
            }
            Token t = make(is_real ? Tok::RealLit : Tok::IntLit, start, s);
            if (is_real)
                t.real_value = std::stod(s);
            else
                t.int_value = std::stoll(s);
            return t;
        }

        if (c == '"') {
            bump();
            std::string s;
            while (peek() && peek() != '"' && peek() != '\n') s += bump();
            if (peek() != '"') {
                diags_.error("lex-error", "unterminated string literal", start);
                failed_ = true;
                return make(Tok::End, start);
            }
            bump();
            return make(Tok::StringLit, start, s);
        }

        bump();
        switch (c) {
            case '(': return make(Tok::LParen, start, "(");
            case ')': return make(Tok::RParen, start, ")");
            case '{': return make(Tok::LBrace, start, "{");
            case '}': return make(Tok::RBrace, start, "}");
            case '[': return make(Tok::LBrack, start, "[");
            case ']': return make(Tok::RBrack, start, "]");
            case ',': return make(Tok::Comma, start, ",");
            case ';': return make(Tok::Semi, start, ";");
            case ':': return make(Tok::Colon, start, ":");
            case '~': return make(Tok::Tilde, start, "~");
            case '^': return make(Tok::Caret, start, "^");
            case '+':
                if (peek() == '=') {
                    bump();
                    return make(Tok::PlusEq, start, "+=");
                }
                return make(Tok::Plus, start, "+");
            case '-': return make(Tok::Minus, start, "-");
            case '*': return make(Tok::Star, start, "*");
            case '/': return make(Tok::Slash, start, "/");
            case '!':
                if (peek() == '=') {
                    bump();
                    return make(Tok::NotEq, start, "!=");
                }
                return make(Tok::Bang, start, "!");
            case '<':
                if (peek() == '=') {
                    bump();
                    return make(Tok::Le, start, "<=");
                }
                return make(Tok::Lt, start, "<");
            case '>':
                if (peek() == '=') {
                    bump();
                    return make(Tok::Ge, start, ">=");
                }
                return make(Tok::Gt, start, ">");
            case '=':
                if (peek() == '=') {
                    bump();
                    return make(Tok::EqEq, start, "==");
                }
                return make(Tok::Assign, start, "=");
            case '&':
                if (peek() == '&') {
                    bump();
                    return make(Tok::AndAnd, start, "&&");
                }
                break;
            case '|':
                if (peek() == '|') {
                    bump();
                    return make(Tok::OrOr, start, "||");
                }
                break;
            default: break;
        }
        diags_.error("lex-error", std::string("unexpected character '") + c + "'", start);
        failed_ = true;
        return make(Tok::End, start);
    }
};

inline std::vector<Token> lex(std::string_view source, Diagnostics& diags) {
    return Lexer(source, diags).run();
}

}  // namespace stangen
