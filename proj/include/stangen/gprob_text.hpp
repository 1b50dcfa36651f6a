#pragma once

#include <optional>
#include <sstream>
#include <string>

#include "stangen/ast_printer.hpp"
#include "stangen/gprob_ast.hpp"
#include "stangen/parser.hpp"

namespace stangen {

// ---------------------------------------------------------------------------
// Canonical surface text.  Deterministic: simple let values print inline,
// loops and conditionals open an indented block; floats use the shortest
// round-trip form.

namespace detail {

inline void print_pattern(std::ostream& os, const GPattern& p) {
    switch (p.kind) {
        case GPattern::Kind::Unit: os << "()"; break;
        case GPattern::Kind::Var: os << p.name; break;
        case GPattern::Kind::IndexedVar:
            os << p.name << '[';
            for (size_t i = 0; i < p.indices.size(); ++i) {
                if (i) os << ", ";
                print_expr(os, p.indices[i]);
            }
            os << ']';
            break;
        case GPattern::Kind::Tuple:
            os << '(';
            for (size_t i = 0; i < p.tuple.size(); ++i) {
                if (i) os << ", ";
                os << p.tuple[i];
            }
            os << ')';
            break;
    }
}

inline void print_state(std::ostream& os, const std::vector<std::string>& names) {
    os << '{';
    for (size_t i = 0; i < names.size(); ++i) {
        if (i) os << ',';
        os << names[i];
    }
    os << '}';
}

inline bool inline_value(const GExpr& e) {
    return e.is<GFactor>() || e.is<GSample>() || e.is<GObserve>() || e.is<GParam>() ||
           e.is<GReturn>();
}

inline void print_gexpr(std::ostream& os, const GExpr& e, int indent) {
    std::string pad(indent, ' ');
    struct Vis {
        std::ostream& os;
        int indent;
        const std::string& pad;
        void operator()(const GLet& x) const {
            os << pad << "let ";
            print_pattern(os, x.pat);
            os << " =";
            if (inline_value(*x.value)) {
                os << ' ';
                std::ostringstream tmp;
                print_gexpr(tmp, *x.value, 0);
                std::string text = tmp.str();
                if (!text.empty() && text.back() == '\n') text.pop_back();
                os << text << " in\n";
            } else {
                os << '\n';
                print_gexpr(os, *x.value, indent + 2);
                os << pad << "in\n";
            }
            print_gexpr(os, *x.body, indent);
        }
        void operator()(const GIf& x) const {
            os << pad << "if (";
            print_expr(os, x.cond);
            os << ")\n";
            print_gexpr(os, *x.then_e, indent + 2);
            os << pad << "else\n";
            print_gexpr(os, *x.else_e, indent + 2);
        }
        void operator()(const GFor& x) const {
            os << pad << "for_";
            print_state(os, x.state);
            os << " (" << x.var << " in ";
            print_expr(os, x.lo);
            os << ':';
            print_expr(os, x.hi);
            os << ")\n";
            print_gexpr(os, *x.body, indent + 2);
        }
        void operator()(const GWhile& x) const {
            os << pad << "while_";
            print_state(os, x.state);
            os << " (";
            print_expr(os, x.cond);
            os << ")\n";
            print_gexpr(os, *x.body, indent + 2);
        }
        void operator()(const GFactor& x) const {
            os << pad << "factor(";
            print_expr(os, x.amount);
            os << ")\n";
        }
        void operator()(const GSample& x) const {
            os << pad << "sample(";
            print_expr(os, x.dist);
            os << ")\n";
        }
        void operator()(const GObserve& x) const {
            os << pad << "observe(";
            print_expr(os, x.dist);
            os << ", ";
            print_expr(os, x.value);
            os << ")\n";
        }
        void operator()(const GParam& x) const {
            os << pad << "param(" << x.name;
            if (x.shape) {
                os << ", ";
                print_expr(os, *x.shape);
            }
            os << ")\n";
        }
        void operator()(const GReturn& x) const {
            os << pad << "return(";
            if (x.values.empty()) {
                os << "()";
            } else if (x.values.size() == 1) {
                print_expr(os, x.values[0]);
            } else {
                os << '(';
                for (size_t i = 0; i < x.values.size(); ++i) {
                    if (i) os << ", ";
                    print_expr(os, x.values[i]);
                }
                os << ')';
            }
            os << ")\n";
        }
    };
    std::visit(Vis{os, indent, pad}, e.node);
}

}  // namespace detail

inline std::string emit_gprob(const GExpr& e) {
    std::ostringstream os;
    detail::print_gexpr(os, e, 0);
    return os.str();
}

// ---------------------------------------------------------------------------
// Reader for the canonical text (round-trip checks and the CLI).

class GProbReader {
public:
    GProbReader(std::vector<Token> toks, Diagnostics& diags)
        : parser_(std::move(toks), diags, /*ir_literals=*/true), diags_(diags) {}

    std::optional<GExpr> read() {
        try {
            GExpr e = parse_gexpr();
            if (!parser_.at(Tok::End)) parser_.fail("trailing input after expression");
            return e;
        } catch (const ParseError&) {
            return std::nullopt;
        }
    }

private:
    Parser parser_;
    Diagnostics& diags_;

    GPattern parse_pattern() {
        if (parser_.accept(Tok::LParen)) {
            if (parser_.accept(Tok::RParen)) return GPattern::unit();
            std::vector<std::string> names;
            names.push_back(parser_.expect(Tok::Ident, "in tuple pattern").text);
            while (parser_.accept(Tok::Comma))
                names.push_back(parser_.expect(Tok::Ident, "in tuple pattern").text);
            parser_.expect(Tok::RParen, "to close tuple pattern");
            return GPattern::of_names(names);
        }
        std::string name = parser_.expect(Tok::Ident, "as binding name").text;
        if (parser_.accept(Tok::LBrack)) {
            std::vector<Expr> ix;
            ix.push_back(parser_.parse_expression());
            while (parser_.accept(Tok::Comma)) ix.push_back(parser_.parse_expression());
            parser_.expect(Tok::RBrack, "after pattern indices");
            return GPattern::indexed(std::move(name), std::move(ix));
        }
        return GPattern::var(std::move(name));
    }

    std::vector<std::string> parse_state() {
        parser_.expect(Tok::LBrace, "to open the state set");
        std::vector<std::string> names;
        if (!parser_.at(Tok::RBrace)) {
            names.push_back(parser_.expect(Tok::Ident, "in state set").text);
            while (parser_.accept(Tok::Comma))
                names.push_back(parser_.expect(Tok::Ident, "in state set").text);
        }
        parser_.expect(Tok::RBrace, "to close the state set");
        return names;
    }

    GExpr parse_gexpr() {
        if (parser_.at_ident("let")) {
            parser_.advance();
            GPattern pat = parse_pattern();
            parser_.expect(Tok::Assign, "after let pattern");
            GExpr value = parse_gexpr();
            if (!parser_.at(Tok::KwIn)) parser_.fail("expected 'in' after let value");
            parser_.advance();
            GExpr body = parse_gexpr();
            return g_let(std::move(pat), std::move(value), std::move(body));
        }
        if (parser_.at(Tok::KwIf)) {
            parser_.advance();
            parser_.expect(Tok::LParen, "after 'if'");
            Expr cond = parser_.parse_expression();
            parser_.expect(Tok::RParen, "after condition");
            GExpr then_e = parse_gexpr();
            parser_.expect(Tok::KwElse, "in conditional");
            GExpr else_e = parse_gexpr();
            return g_expr(GIf{std::move(cond), Box<GExpr>(std::move(then_e)),
                              Box<GExpr>(std::move(else_e))});
        }
        if (parser_.at_ident("for_")) {
            parser_.advance();
            auto state = parse_state();
            parser_.expect(Tok::LParen, "after loop state");
            std::string var = parser_.expect(Tok::Ident, "as loop variable").text;
            parser_.expect(Tok::KwIn, "after loop variable");
            Expr lo = parser_.parse_expression();
            parser_.expect(Tok::Colon, "in loop range");
            Expr hi = parser_.parse_expression();
            parser_.expect(Tok::RParen, "after loop range");
            GExpr body = parse_gexpr();
            return g_expr(GFor{std::move(state), std::move(var), std::move(lo), std::move(hi),
                               Box<GExpr>(std::move(body))});
        }
        if (parser_.at_ident("while_")) {
            parser_.advance();
            auto state = parse_state();
            parser_.expect(Tok::LParen, "after loop state");
            Expr cond = parser_.parse_expression();
            parser_.expect(Tok::RParen, "after condition");
            GExpr body = parse_gexpr();
            return g_expr(
                GWhile{std::move(state), std::move(cond), Box<GExpr>(std::move(body))});
        }
        if (parser_.at_ident("factor")) {
            parser_.advance();
            parser_.expect(Tok::LParen, "after 'factor'");
            Expr e = parser_.parse_expression();
            parser_.expect(Tok::RParen, "after factor argument");
            return g_expr(GFactor{std::move(e)});
        }
        if (parser_.at_ident("sample")) {
            parser_.advance();
            parser_.expect(Tok::LParen, "after 'sample'");
            Expr e = parser_.parse_expression();
            parser_.expect(Tok::RParen, "after sample argument");
            return g_expr(GSample{std::move(e)});
        }
        if (parser_.at_ident("observe")) {
            parser_.advance();
            parser_.expect(Tok::LParen, "after 'observe'");
            Expr d = parser_.parse_expression();
            parser_.expect(Tok::Comma, "between observe arguments");
            Expr v = parser_.parse_expression();
            parser_.expect(Tok::RParen, "after observe arguments");
            return g_expr(GObserve{std::move(d), std::move(v)});
        }
        if (parser_.at_ident("param")) {
            parser_.advance();
            parser_.expect(Tok::LParen, "after 'param'");
            GParam p;
            p.name = parser_.expect(Tok::Ident, "as parameter name").text;
            if (parser_.accept(Tok::Comma)) p.shape = parser_.parse_expression();
            parser_.expect(Tok::RParen, "after param");
            return g_expr(std::move(p));
        }
        if (parser_.at(Tok::KwReturn)) {
            parser_.advance();
            parser_.expect(Tok::LParen, "after 'return'");
            GReturn r;
            if (parser_.at(Tok::LParen)) {
                parser_.advance();
                if (!parser_.accept(Tok::RParen)) {
                    r.values.push_back(parser_.parse_expression());
                    while (parser_.accept(Tok::Comma))
                        r.values.push_back(parser_.parse_expression());
                    parser_.expect(Tok::RParen, "to close tuple");
                }
                parser_.expect(Tok::RParen, "after return");
                // a one-element tuple is just a parenthesized value
                return g_expr(std::move(r));
            }
            r.values.push_back(parser_.parse_expression());
            parser_.expect(Tok::RParen, "after return value");
            return g_expr(std::move(r));
        }
        parser_.fail("expected an expression form");
    }
};

inline std::optional<GExpr> parse_gprob(std::string_view text, Diagnostics& diags) {
    auto toks = lex(text, diags);
    if (diags.has_errors()) return std::nullopt;
    return GProbReader(std::move(toks), diags).read();
}

}  // namespace stangen
