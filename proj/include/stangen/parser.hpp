#pragma once

#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "stangen/ast.hpp"
#include "stangen/token.hpp"

namespace stangen {

struct ParseError {};  // internal unwind; every throw site records a diagnostic

// Recursive-descent parser over the token stream.  The expression grammar is
// shared with the IR text reader (`ir_literals` enables `inf` literals).
class Parser {
public:
    Parser(std::vector<Token> tokens, Diagnostics& diags, bool ir_literals = false)
        : toks_(std::move(tokens)), diags_(diags), ir_literals_(ir_literals) {}

    std::optional<StanProgram> parse_program() {
        StanProgram prog;
        int last_rank = -1;
        std::set<int> seen;
        try {
            while (!at(Tok::End)) {
                int rank = -1;
                BlockKind kind = parse_block_header(rank);
                if (seen.count(rank)) {
                    diags_.error("duplicate-block",
                                 std::string("block '") + block_name(kind) + "' appears twice",
                                 peek().span);
                }
                if (rank < last_rank) {
                    diags_.error("block-order",
                                 std::string("block '") + block_name(kind) +
                                     "' is out of order",
                                 peek().span);
                }
                seen.insert(rank);
                last_rank = std::max(last_rank, rank);
                parse_block_body(prog, kind);
            }
        } catch (const ParseError&) {
            return std::nullopt;
        }
        if (!prog.model) {
            diags_.error("missing-model-block", "program has no model block");
        }
        check_unique_names(prog);
        if (diags_.has_errors()) return std::nullopt;
        IdAssigner().run(prog);
        return prog;
    }

    // --- expressions (public: reused by the IR text reader) ---

    Expr parse_expression() { return parse_or(); }

    const Token& peek(size_t off = 0) const {
        size_t i = pos_ + off;
        return i < toks_.size() ? toks_[i] : toks_.back();
    }
    bool at(Tok k) const { return peek().kind == k; }
    bool at_ident(const char* text) const {
        return peek().kind == Tok::Ident && peek().text == text;
    }
    Token advance() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
    bool accept(Tok k) {
        if (at(k)) {
            advance();
            return true;
        }
        return false;
    }
    Token expect(Tok k, const char* what) {
        if (!at(k)) fail(std::string("expected ") + token_name(k) + " " + what + ", found " +
                         describe(peek()));
        return advance();
    }
    [[noreturn]] void fail(const std::string& msg) {
        diags_.error("parse-error", msg, peek().span);
        throw ParseError{};
    }

private:
    std::vector<Token> toks_;
    Diagnostics& diags_;
    bool ir_literals_ = false;
    size_t pos_ = 0;

    static std::string describe(const Token& t) {
        if (t.kind == Tok::Ident) return "'" + t.text + "'";
        return token_name(t.kind);
    }

    // --- blocks ---

    BlockKind parse_block_header(int& rank) {
        const Token& t = peek();
        auto take = [&](BlockKind k, int r) {
            advance();
            rank = r;
            return k;
        };
        if (t.kind == Tok::Ident) {
            if (t.text == "functions") return take(BlockKind::Functions, 0);
            if (t.text == "networks") return take(BlockKind::Networks, 1);
            if (t.text == "data") return take(BlockKind::Data, 2);
            if (t.text == "transformed") {
                advance();
                if (at_ident("data")) return take(BlockKind::TransformedData, 3);
                if (at_ident("parameters")) return take(BlockKind::TransformedParameters, 5);
                fail("expected 'data' or 'parameters' after 'transformed'");
            }
            if (t.text == "parameters") return take(BlockKind::Parameters, 4);
            if (t.text == "model") return take(BlockKind::Model, 6);
            if (t.text == "generated") {
                advance();
                if (at_ident("quantities")) return take(BlockKind::GeneratedQuantities, 7);
                fail("expected 'quantities' after 'generated'");
            }
            if (t.text == "guide") {
                advance();
                if (at_ident("parameters")) {
                    rank = 8;
                    advance();
                    return BlockKind::GuideParameters;
                }
                rank = 9;
                return BlockKind::Guide;
            }
        }
        fail("expected a block keyword, found " + describe(t));
    }

    void parse_block_body(StanProgram& prog, BlockKind kind) {
        expect(Tok::LBrace, "to open block");
        switch (kind) {
            case BlockKind::Functions:
                while (!at(Tok::RBrace) && !at(Tok::End)) prog.functions.push_back(parse_fun());
                break;
            case BlockKind::Networks:
                while (!at(Tok::RBrace) && !at(Tok::End)) {
                    NetworkDecl nd;
                    nd.span = peek().span;
                    nd.class_name = expect(Tok::Ident, "as network class").text;
                    nd.name = expect(Tok::Ident, "as network name").text;
                    expect(Tok::Semi, "after network declaration");
                    prog.networks.push_back(std::move(nd));
                }
                break;
            case BlockKind::Data: prog.data = parse_decl_stmt_block(true); break;
            case BlockKind::TransformedData: prog.transformed_data = parse_decl_stmt_block(); break;
            case BlockKind::Parameters: prog.parameters = parse_decl_stmt_block(true); break;
            case BlockKind::TransformedParameters:
                prog.transformed_parameters = parse_decl_stmt_block();
                break;
            case BlockKind::Model: prog.model = parse_decl_stmt_block(); break;
            case BlockKind::GeneratedQuantities:
                prog.generated_quantities = parse_decl_stmt_block();
                break;
            case BlockKind::GuideParameters:
                prog.guide_parameters = parse_decl_stmt_block(true);
                break;
            case BlockKind::Guide: prog.guide = parse_decl_stmt_block(); break;
        }
        expect(Tok::RBrace, "to close block");
    }

    static bool starts_decl(Tok k) {
        return k == Tok::KwInt || k == Tok::KwReal || k == Tok::KwVector ||
               k == Tok::KwRowVector || k == Tok::KwMatrix;
    }

    // Declarations must precede statements; an initializer desugars into a
    // leading assignment so evaluation order is preserved.
    Block parse_decl_stmt_block(bool decls_only = false) {
        Block b;
        bool saw_stmt = false;
        while (!at(Tok::RBrace) && !at(Tok::End)) {
            if (starts_decl(peek().kind)) {
                if (saw_stmt)
                    fail("declarations must precede statements in a block");
                std::optional<Stmt> init;
                b.decls.push_back(parse_decl(init));
                if (init) {
                    if (decls_only)
                        fail("initializers are not allowed in this block");
                    b.stmts.push_back(std::move(*init));
                }
            } else {
                if (decls_only) fail("only declarations are allowed in this block");
                saw_stmt = true;
                b.stmts.push_back(parse_stmt());
            }
        }
        return b;
    }

    SizeSpec parse_size() {
        SizeSpec s;
        if (accept(Tok::Wildcard)) {
            s.wildcard = true;
        } else {
            s.expr = parse_expression();
        }
        return s;
    }

    Decl parse_decl(std::optional<Stmt>& init) {
        Decl d;
        d.span = peek().span;
        switch (advance().kind) {
            case Tok::KwInt: d.type.kind = BaseTypeKind::Int; break;
            case Tok::KwReal: d.type.kind = BaseTypeKind::Real; break;
            case Tok::KwVector: d.type.kind = BaseTypeKind::Vector; break;
            case Tok::KwRowVector: d.type.kind = BaseTypeKind::RowVector; break;
            case Tok::KwMatrix: d.type.kind = BaseTypeKind::Matrix; break;
            default: fail("expected a type keyword");
        }
        if (at(Tok::Lt)) parse_constraint(d.constraint);
        if (d.type.kind == BaseTypeKind::Vector || d.type.kind == BaseTypeKind::RowVector) {
            expect(Tok::LBrack, "for the vector size");
            d.type.rows = parse_size();
            expect(Tok::RBrack, "after the vector size");
        } else if (d.type.kind == BaseTypeKind::Matrix) {
            expect(Tok::LBrack, "for the matrix sizes");
            d.type.rows = parse_size();
            expect(Tok::Comma, "between matrix sizes");
            d.type.cols = parse_size();
            expect(Tok::RBrack, "after the matrix sizes");
        }
        d.name = expect(Tok::Ident, "as declared name").text;
        if (accept(Tok::LBrack)) {
            if (at(Tok::Star)) {
                advance();
                d.shape.kind = ArrayShape::Kind::AnyDims;
            } else {
                d.shape.kind = ArrayShape::Kind::Sizes;
                d.shape.sizes.push_back(parse_size());
                while (accept(Tok::Comma)) d.shape.sizes.push_back(parse_size());
            }
            expect(Tok::RBrack, "after array shape");
        }
        if (accept(Tok::Assign)) {
            Expr value = parse_expression();
            AssignStmt a;
            a.lhs = LValue{d.name, {}, d.span};
            a.value = std::move(value);
            init = make_stmt(std::move(a), d.span);
        }
        expect(Tok::Semi, "after declaration");
        return d;
    }

    void parse_constraint(DeclConstraint& c) {
        expect(Tok::Lt, "to open constraint");
        for (;;) {
            Token key = expect(Tok::Ident, "as constraint keyword");
            expect(Tok::Assign, "after constraint keyword");
            // stop below the relational level so the closing '>' stays free;
            // comparisons in a bound need parentheses
            Expr bound = parse_additive();
            if (key.text == "lower") {
                c.lower = std::move(bound);
            } else if (key.text == "upper") {
                c.upper = std::move(bound);
            } else {
                fail("unknown constraint '" + key.text + "' (expected lower/upper)");
            }
            if (!accept(Tok::Comma)) break;
        }
        expect(Tok::Gt, "to close constraint");
    }

    // --- functions ---

    static int parse_rank_of_base(Tok k) { return starts_decl(k) ? 1 : 0; }

    BaseTypeKind parse_base_kw() {
        switch (advance().kind) {
            case Tok::KwInt: return BaseTypeKind::Int;
            case Tok::KwReal: return BaseTypeKind::Real;
            case Tok::KwVector: return BaseTypeKind::Vector;
            case Tok::KwRowVector: return BaseTypeKind::RowVector;
            case Tok::KwMatrix: return BaseTypeKind::Matrix;
            default: fail("expected a type keyword");
        }
    }

    int parse_unsized_dims() {
        int dims = 0;
        if (accept(Tok::LBrack)) {
            dims = 1;
            while (accept(Tok::Comma)) ++dims;
            expect(Tok::RBrack, "after array dims");
        }
        return dims;
    }

    FunDecl parse_fun() {
        FunDecl f;
        f.span = peek().span;
        if (at_ident("void"))
            fail("void functions are unsupported");
        f.return_base = parse_base_kw();
        f.return_array_dims = parse_unsized_dims();
        f.name = expect(Tok::Ident, "as function name").text;
        expect(Tok::LParen, "to open parameter list");
        if (!at(Tok::RParen)) {
            for (;;) {
                FunParam p;
                p.base = parse_base_kw();
                p.array_dims = parse_unsized_dims();
                p.name = expect(Tok::Ident, "as parameter name").text;
                f.params.push_back(std::move(p));
                if (!accept(Tok::Comma)) break;
            }
        }
        expect(Tok::RParen, "to close parameter list");
        expect(Tok::LBrace, "to open function body");
        f.body = parse_decl_stmt_block();
        expect(Tok::RBrace, "to close function body");
        return f;
    }

    // --- statements ---

    std::vector<Stmt> parse_stmt_or_block() {
        std::vector<Stmt> out;
        if (accept(Tok::LBrace)) {
            while (!at(Tok::RBrace) && !at(Tok::End)) out.push_back(parse_stmt());
            expect(Tok::RBrace, "to close statement block");
        } else {
            out.push_back(parse_stmt());
        }
        return out;
    }

    Stmt parse_stmt() {
        SourceSpan span = peek().span;
        if (accept(Tok::Semi)) return make_stmt(SkipStmt{}, span);
        if (at(Tok::KwTarget)) {
            advance();
            expect(Tok::PlusEq, "after 'target'");
            TargetPlusStmt t;
            t.amount = parse_expression();
            expect(Tok::Semi, "after target update");
            return make_stmt(std::move(t), span);
        }
        if (at(Tok::KwFor)) {
            advance();
            expect(Tok::LParen, "after 'for'");
            std::string var = expect(Tok::Ident, "as loop variable").text;
            expect(Tok::KwIn, "after loop variable");
            Expr first = parse_expression();
            if (accept(Tok::Colon)) {
                ForRangeStmt f;
                f.var = std::move(var);
                f.lo = std::move(first);
                f.hi = parse_expression();
                expect(Tok::RParen, "after loop range");
                f.body = parse_stmt_or_block();
                return make_stmt(std::move(f), span);
            }
            ForEachStmt f;
            f.var = std::move(var);
            f.container = std::move(first);
            expect(Tok::RParen, "after loop container");
            f.body = parse_stmt_or_block();
            return make_stmt(std::move(f), span);
        }
        if (at(Tok::KwWhile)) {
            advance();
            expect(Tok::LParen, "after 'while'");
            WhileStmt w;
            w.cond = parse_expression();
            expect(Tok::RParen, "after while condition");
            w.body = parse_stmt_or_block();
            return make_stmt(std::move(w), span);
        }
        if (at(Tok::KwIf)) {
            advance();
            expect(Tok::LParen, "after 'if'");
            IfStmt i;
            i.cond = parse_expression();
            expect(Tok::RParen, "after if condition");
            i.then_body = parse_stmt_or_block();
            if (accept(Tok::KwElse)) i.else_body = parse_stmt_or_block();
            return make_stmt(std::move(i), span);
        }
        if (at(Tok::KwReturn)) {
            advance();
            ReturnStmt r;
            if (!at(Tok::Semi)) r.value = parse_expression();
            expect(Tok::Semi, "after return");
            return make_stmt(std::move(r), span);
        }
        if (at_ident("print") || at_ident("reject")) {
            diags_.error("unsupported-feature",
                         "'" + peek().text + "' statements are unsupported", span);
            throw ParseError{};
        }

        // expression-first statements: assignment or tilde
        Expr e = parse_expression();
        if (accept(Tok::Tilde)) {
            TildeStmt t;
            t.observed = std::move(e);
            t.dist = expect(Tok::Ident, "as distribution name").text;
            expect(Tok::LParen, "after distribution name");
            if (!at(Tok::RParen)) {
                t.args.push_back(parse_expression());
                while (accept(Tok::Comma)) t.args.push_back(parse_expression());
            }
            expect(Tok::RParen, "after distribution arguments");
            if (at_ident("T") && peek(1).kind == Tok::LBrack) {
                diags_.error("unsupported-feature", "truncation syntax is unsupported", span);
                throw ParseError{};
            }
            expect(Tok::Semi, "after sampling statement");
            return make_stmt(std::move(t), span);
        }
        if (accept(Tok::Assign)) {
            AssignStmt a;
            a.lhs = to_lvalue(e);
            a.value = parse_expression();
            expect(Tok::Semi, "after assignment");
            return make_stmt(std::move(a), span);
        }
        fail("expected '~' or '=' after expression statement");
    }

    LValue to_lvalue(Expr& e) {
        if (auto* v = e.as<VarRef>()) return LValue{v->name, {}, e.span};
        if (e.is<IndexExpr>()) {
            // flatten x[i][j] and x[i, j] into one index list
            std::vector<std::vector<Expr>> idx_groups;
            Expr* cur = &e;
            while (auto* in = cur->as<IndexExpr>()) {
                idx_groups.push_back(std::move(in->indices));
                cur = &*in->target;
            }
            auto* v = cur->as<VarRef>();
            if (!v) fail("assignment target must be a variable or indexed variable");
            LValue lv{v->name, {}, e.span};
            for (auto it = idx_groups.rbegin(); it != idx_groups.rend(); ++it)
                for (auto& ix2 : *it) lv.indices.push_back(std::move(ix2));
            return lv;
        }
        fail("assignment target must be a variable or indexed variable");
    }

    // --- expression grammar ---

    Expr parse_or() {
        Expr e = parse_and();
        while (at(Tok::OrOr)) {
            SourceSpan sp = advance().span;
            Expr rhs = parse_and();
            e = make_expr(CallExpr{"||", {std::move(e), std::move(rhs)}}, sp);
        }
        return e;
    }

    Expr parse_and() {
        Expr e = parse_equality();
        while (at(Tok::AndAnd)) {
            SourceSpan sp = advance().span;
            Expr rhs = parse_equality();
            e = make_expr(CallExpr{"&&", {std::move(e), std::move(rhs)}}, sp);
        }
        return e;
    }

    Expr parse_equality() {
        Expr e = parse_relational();
        while (at(Tok::EqEq) || at(Tok::NotEq)) {
            std::string op = at(Tok::EqEq) ? "==" : "!=";
            SourceSpan sp = advance().span;
            Expr rhs = parse_relational();
            e = make_expr(CallExpr{op, {std::move(e), std::move(rhs)}}, sp);
        }
        return e;
    }

    Expr parse_relational() {
        Expr e = parse_additive();
        while (at(Tok::Lt) || at(Tok::Le) || at(Tok::Gt) || at(Tok::Ge)) {
            std::string op = peek().text;
            SourceSpan sp = advance().span;
            Expr rhs = parse_additive();
            e = make_expr(CallExpr{op, {std::move(e), std::move(rhs)}}, sp);
        }
        return e;
    }

    Expr parse_additive() {
        Expr e = parse_multiplicative();
        while (at(Tok::Plus) || at(Tok::Minus)) {
            std::string op = at(Tok::Plus) ? "+" : "-";
            SourceSpan sp = advance().span;
            Expr rhs = parse_multiplicative();
            e = make_expr(CallExpr{op, {std::move(e), std::move(rhs)}}, sp);
        }
        return e;
    }

    Expr parse_multiplicative() {
        Expr e = parse_unary();
        while (at(Tok::Star) || at(Tok::Slash)) {
            std::string op = at(Tok::Star) ? "*" : "/";
            SourceSpan sp = advance().span;
            Expr rhs = parse_unary();
            e = make_expr(CallExpr{op, {std::move(e), std::move(rhs)}}, sp);
        }
        return e;
    }

    Expr parse_unary() {
        if (at(Tok::Minus)) {
            SourceSpan sp = advance().span;
            Expr inner = parse_unary();
            // fold a negated literal so `-0.5` round-trips as one node
            if (auto* i = inner.as<IntLit>()) return make_expr(IntLit{-i->value}, sp);
            if (auto* r = inner.as<RealLit>()) return make_expr(RealLit{-r->value}, sp);
            return make_expr(CallExpr{"-", {std::move(inner)}}, sp);
        }
        if (at(Tok::Plus)) {
            advance();
            return parse_unary();
        }
        if (at(Tok::Bang)) {
            SourceSpan sp = advance().span;
            Expr inner = parse_unary();
            return make_expr(CallExpr{"!", {std::move(inner)}}, sp);
        }
        return parse_power();
    }

    Expr parse_power() {
        Expr e = parse_postfix();
        if (at(Tok::Caret)) {
            SourceSpan sp = advance().span;
            Expr rhs = parse_unary();  // right-assoc, binds tighter than unary minus
            return make_expr(CallExpr{"^", {std::move(e), std::move(rhs)}}, sp);
        }
        return e;
    }

    Expr parse_postfix() {
        Expr e = parse_primary();
        while (at(Tok::LBrack)) {
            SourceSpan sp = advance().span;
            std::vector<Expr> idx;
            idx.push_back(parse_expression());
            while (accept(Tok::Comma)) idx.push_back(parse_expression());
            expect(Tok::RBrack, "after index");
            e = make_expr(IndexExpr{Box<Expr>(std::move(e)), std::move(idx)}, sp);
        }
        return e;
    }

    Expr parse_primary() {
        SourceSpan sp = peek().span;
        if (at(Tok::IntLit)) return make_expr(IntLit{advance().int_value}, sp);
        if (at(Tok::RealLit)) return make_expr(RealLit{advance().real_value}, sp);
        if (at(Tok::Ident)) {
            std::string name = advance().text;
            if (ir_literals_ && name == "inf")
                return make_expr(RealLit{std::numeric_limits<double>::infinity()}, sp);
            if (accept(Tok::LParen)) {
                std::vector<Expr> args;
                if (!at(Tok::RParen)) {
                    args.push_back(parse_expression());
                    while (accept(Tok::Comma)) args.push_back(parse_expression());
                }
                expect(Tok::RParen, "after call arguments");
                return make_expr(CallExpr{std::move(name), std::move(args)}, sp);
            }
            return make_expr(VarRef{std::move(name)}, sp);
        }
        if (accept(Tok::LParen)) {
            Expr e = parse_expression();
            expect(Tok::RParen, "after parenthesized expression");
            return e;
        }
        if (accept(Tok::LBrace)) {
            ArrayLit a;
            if (!at(Tok::RBrace)) {
                a.elems.push_back(parse_expression());
                while (accept(Tok::Comma)) a.elems.push_back(parse_expression());
            }
            expect(Tok::RBrace, "after array literal");
            return make_expr(std::move(a), sp);
        }
        if (accept(Tok::LBrack)) {
            if (at(Tok::LBrack)) {
                MatrixLit m;
                for (;;) {
                    expect(Tok::LBrack, "to open matrix row");
                    std::vector<Expr> row;
                    row.push_back(parse_expression());
                    while (accept(Tok::Comma)) row.push_back(parse_expression());
                    expect(Tok::RBrack, "after matrix row");
                    m.rows.push_back(std::move(row));
                    if (!accept(Tok::Comma)) break;
                }
                expect(Tok::RBrack, "after matrix literal");
                return make_expr(std::move(m), sp);
            }
            VectorLit v;
            if (!at(Tok::RBrack)) {
                v.elems.push_back(parse_expression());
                while (accept(Tok::Comma)) v.elems.push_back(parse_expression());
            }
            expect(Tok::RBrack, "after vector literal");
            return make_expr(std::move(v), sp);
        }
        fail("expected an expression, found " + describe(peek()));
    }

    // --- program-wide checks ---

    void collect_decl_names(const Block& b, std::vector<std::pair<std::string, SourceSpan>>& out) {
        for (const auto& d : b.decls) out.emplace_back(d.name, d.span);
    }

    void check_unique_names(const StanProgram& prog) {
        std::vector<std::pair<std::string, SourceSpan>> names;
        for (const auto& f : prog.functions) names.emplace_back(f.name, f.span);
        for (const auto& n : prog.networks) names.emplace_back(n.name, n.span);
        for (const auto* b :
             {&prog.data, &prog.transformed_data, &prog.parameters,
              &prog.transformed_parameters, &prog.model, &prog.generated_quantities,
              &prog.guide_parameters, &prog.guide})
            if (*b) collect_decl_names(**b, names);
        std::set<std::string> seen;
        for (const auto& [name, span] : names) {
            if (!seen.insert(name).second)
                diags_.error("duplicate-variable",
                             "name '" + name + "' is declared more than once", span);
        }
    }
};

inline std::optional<StanProgram> parse_program(std::string_view source, Diagnostics& diags) {
    auto tokens = lex(source, diags);
    if (diags.has_errors()) return std::nullopt;
    return Parser(std::move(tokens), diags).parse_program();
}

}  // namespace stangen
