#pragma once

#include <limits>
#include <string>
#include <vector>

#include "stangen/ast.hpp"
#include "stangen/gprob_ast.hpp"
#include "stangen/typecheck.hpp"

namespace stangen {

struct TranslateError : std::runtime_error {
    explicit TranslateError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {

inline Expr inf_lit() { return real_lit(std::numeric_limits<double>::infinity()); }
inline Expr neg_inf_lit() { return real_lit(-std::numeric_limits<double>::infinity()); }

// Shape argument for a broadcast of the given resolved type: a size list for
// arrays, a runtime shape(...) for network tensors; nullopt when the type is
// scalar or its shape is not materializable.
inline std::optional<Expr> shape_argument(const IType& t) {
    using K = IType::Kind;
    switch (t.kind) {
        case K::Int:
        case K::Real: return std::nullopt;
        case K::Vector:
        case K::RowVector:
        case K::Matrix: return std::nullopt;  // handled by the kinded broadcasts
        case K::Array: {
            std::vector<Expr> dims;
            const IType* cur = &t;
            while (cur->kind == K::Array) {
                if (cur->sizes[0].is_var()) return std::nullopt;
                dims.push_back(cur->sizes[0].expr);
                cur = cur->elem.get();
            }
            if (!cur->scalar()) return std::nullopt;
            return make_expr(ArrayLit{std::move(dims)});
        }
        case K::ArrayDim: {
            if (!t.elem->scalar()) return std::nullopt;
            if (t.dim->kind == Dim::Kind::ShapeOf)
                return call("shape", {*t.dim->shape_of});
            if (t.dim->kind == Dim::Kind::List) {
                std::vector<Expr> dims;
                for (const auto& s : t.dim->list) {
                    if (s.is_var()) return std::nullopt;
                    dims.push_back(s.expr);
                }
                return make_expr(ArrayLit{std::move(dims)});
            }
            return std::nullopt;
        }
    }
    return std::nullopt;
}

// Wraps `arg` in an explicit broadcast to the shape of `t`; identity when the
// shape is scalar or unavailable.
inline Expr broadcast_to(const IType& t, Expr arg) {
    using K = IType::Kind;
    switch (t.kind) {
        case K::Vector:
        case K::RowVector: {
            if (t.sizes[0].is_var()) return arg;
            const char* fn =
                t.kind == K::Vector ? "broadcast_vector" : "broadcast_row_vector";
            return call(fn, {std::move(arg), t.sizes[0].expr});
        }
        case K::Matrix: {
            if (t.sizes[0].is_var() || t.sizes[1].is_var()) return arg;
            return call("broadcast_matrix", {std::move(arg), t.sizes[0].expr, t.sizes[1].expr});
        }
        default: {
            auto shape = shape_argument(t);
            if (!shape) return arg;
            return call("broadcast", {std::move(arg), std::move(*shape)});
        }
    }
}

}  // namespace detail

// Compiles kernel-form programs into the generative IR: parameters become a
// prefix of sample bindings from constant-density priors, every sampling
// statement becomes an observation, and target updates become factors.
class Translator {
public:
    Translator(const TypeInfo& types, bool generative_tildes = false)
        : types_(&types), generative_(generative_tildes) {}

    GExpr compile_stmts(const std::vector<Stmt>& stmts, GExpr k) const {
        for (auto it = stmts.rbegin(); it != stmts.rend(); ++it)
            k = compile_stmt(*it, std::move(k));
        return k;
    }

    GExpr compile_stmt(const Stmt& s, GExpr k) const {
        struct Vis {
            const Translator& tr;
            const Stmt& s;
            GExpr k;
            GExpr operator()(const AssignStmt& x) {
                GPattern pat = x.lhs.indices.empty()
                                   ? GPattern::var(x.lhs.name)
                                   : GPattern::indexed(x.lhs.name, x.lhs.indices);
                return g_let(std::move(pat), g_return(x.value), std::move(k));
            }
            GExpr operator()(const ForRangeStmt& x) {
                return tr.compile_loop(lhs_vars(x.body), x.var, x.lo, x.hi, x.body,
                                       std::move(k));
            }
            GExpr operator()(const ForEachStmt& x) { return tr.compile_foreach(s, x, std::move(k)); }
            GExpr operator()(const WhileStmt& x) {
                auto state = lhs_vars(x.body);
                std::vector<std::string> names(state.begin(), state.end());
                GExpr body = tr.compile_stmts(x.body, g_return_names(names));
                GExpr loop = g_expr(GWhile{names, x.cond, Box<GExpr>(std::move(body))});
                return g_let(GPattern::of_names(names), std::move(loop), std::move(k));
            }
            GExpr operator()(const IfStmt& x) {
                GExpr then_e = tr.compile_stmts(x.then_body, k);
                GExpr else_e = tr.compile_stmts(x.else_body, std::move(k));
                return g_expr(GIf{x.cond, Box<GExpr>(std::move(then_e)),
                                  Box<GExpr>(std::move(else_e))});
            }
            GExpr operator()(const SkipStmt&) { return std::move(k); }
            GExpr operator()(const TargetPlusStmt& x) {
                return g_let(GPattern::unit(), g_expr(GFactor{x.amount}), std::move(k));
            }
            GExpr operator()(const TildeStmt& x) { return tr.compile_tilde(s, x, std::move(k)); }
            GExpr operator()(const ReturnStmt&) {
                throw TranslateError("return statements cannot be compiled");
            }
        };
        return std::visit(Vis{*this, s, std::move(k)}, s.node);
    }

    GExpr compile_params(const std::vector<Decl>& decls, GExpr k) const {
        for (auto it = decls.rbegin(); it != decls.rend(); ++it)
            k = g_let(GPattern::var(it->name), g_expr(GSample{prior_dist(*it)}), std::move(k));
        return k;
    }

private:
    const TypeInfo* types_;
    bool generative_;

    // Uniform over a bounded domain, otherwise a flat prior over the
    // (half-)line, broadcast to the parameter's resolved shape.
    Expr prior_dist(const Decl& d) const {
        Expr lo = d.constraint.lower ? *d.constraint.lower : detail::neg_inf_lit();
        Expr hi = d.constraint.upper ? *d.constraint.upper : detail::inf_lit();
        std::string dist = (d.constraint.lower && d.constraint.upper) ? "uniform"
                                                                      : "improper_uniform";
        IType t = types_->decl_types.at(d.name);
        if (!t.scalar()) {
            Expr lo_b = detail::broadcast_to(t, lo);
            Expr hi_b = detail::broadcast_to(t, hi);
            if (structural_equal(lo_b, lo) && structural_equal(hi_b, hi))
                throw TranslateError("parameter shape unresolved: '" + d.name +
                                     "' needs a concrete shape");
            return call(dist, {std::move(lo_b), std::move(hi_b)});
        }
        return call(dist, {std::move(lo), std::move(hi)});
    }

    GExpr compile_loop(const std::set<std::string>& state, const std::string& var,
                       const Expr& lo, const Expr& hi, const std::vector<Stmt>& body,
                       GExpr k) const {
        std::vector<std::string> names(state.begin(), state.end());
        GExpr body_e = compile_stmts(body, g_return_names(names));
        GExpr loop = g_expr(GFor{names, var, lo, hi, Box<GExpr>(std::move(body_e))});
        return g_let(GPattern::of_names(names), std::move(loop), std::move(k));
    }

    // Element loops reduce to index loops over the container (expressions
    // are pure, so re-evaluating the container is sound); matrices iterate
    // both dimensions.  The element variable is an ordinary assignment in
    // the body, so it joins the loop state.
    GExpr compile_foreach(const Stmt& s, const ForEachStmt& x, GExpr k) const {
        bool matrix = false;
        auto it = types_->expr_types.find(x.container.id);
        if (it != types_->expr_types.end() && it->second.kind == IType::Kind::Matrix)
            matrix = true;
        std::string tag = "__fe" + std::to_string(s.id);

        auto assign_elem = [&](Expr value) {
            AssignStmt a;
            a.lhs = LValue{x.var, {}, s.span};
            a.value = std::move(value);
            return make_stmt(std::move(a), s.span);
        };

        ForRangeStmt outer;
        outer.var = tag + "_i";
        outer.lo = int_lit(1);
        outer.hi = call("length", {x.container});
        if (!matrix) {
            outer.body.push_back(assign_elem(index_expr(x.container, {var_ref(outer.var)})));
            for (const auto& st : x.body) outer.body.push_back(st);
        } else {
            ForRangeStmt cols;
            cols.var = tag + "_j";
            cols.lo = int_lit(1);
            cols.hi = call("length", {index_expr(x.container, {var_ref(outer.var)})});
            cols.body.push_back(assign_elem(
                index_expr(x.container, {var_ref(outer.var), var_ref(cols.var)})));
            for (const auto& st : x.body) cols.body.push_back(st);
            outer.body.push_back(make_stmt(std::move(cols), s.span));
        }
        return compile_stmt(make_stmt(std::move(outer), s.span), std::move(k));
    }

    GExpr compile_tilde(const Stmt& s, const TildeStmt& x, GExpr k) const {
        std::vector<Expr> args = x.args;
        auto it = types_->tildes.find(s.id);
        if (it != types_->tildes.end()) {
            const TildeAnn& ann = it->second;
            for (size_t i = 0; i < args.size() && i < ann.args.size(); ++i) {
                bool arg_scalar = true;
                auto et = types_->expr_types.find(x.args[i].id);
                if (et != types_->expr_types.end()) arg_scalar = et->second.scalar();
                if (arg_scalar && !ann.args[i].scalar())
                    args[i] = detail::broadcast_to(ann.args[i], std::move(args[i]));
            }
        }
        Expr dist = call(x.dist, std::move(args));
        if (generative_) {
            const auto* v = x.observed.as<VarRef>();
            if (!v)
                throw TranslateError(
                    "generative translation needs a parameter on the left of '~'");
            return g_let(GPattern::var(v->name), g_expr(GSample{std::move(dist)}),
                         std::move(k));
        }
        return g_let(GPattern::unit(), g_expr(GObserve{std::move(dist), x.observed}),
                     std::move(k));
    }
};

// Whole-program translation: sample every parameter up front, then run the
// model as observations and factors, returning the parameter tuple.
inline GExpr compile_program(const StanProgram& kernel, const TypeInfo& types) {
    std::vector<std::string> param_names;
    std::vector<Decl> param_decls;
    if (kernel.parameters) {
        param_decls = kernel.parameters->decls;
        for (const auto& d : param_decls) param_names.push_back(d.name);
    }
    Translator tr(types);
    GExpr body = tr.compile_stmts(kernel.model ? kernel.model->stmts : std::vector<Stmt>{},
                                  g_return_names(param_names));

    // locals written through an index need a whole-value binding first; the
    // declarations themselves do not survive the translation
    if (kernel.model) {
        std::set<std::string> indexed;
        detail::walk_stmts(kernel.model->stmts, [&](const Stmt& s) {
            if (const auto* a = s.as<AssignStmt>())
                if (!a->lhs.indices.empty()) indexed.insert(a->lhs.name);
        });
        for (auto it = kernel.model->decls.rbegin(); it != kernel.model->decls.rend(); ++it) {
            if (!indexed.count(it->name)) continue;
            IType t = types.decl_types.at(it->name);
            if (t.scalar()) continue;
            Expr init = detail::broadcast_to(t, real_lit(0.0));
            body = g_let(GPattern::var(it->name), g_return(std::move(init)), std::move(body));
        }
    }
    return tr.compile_params(param_decls, std::move(body));
}

// Guide translation: learnable parameters first, then the generative reading
// of the guide body, returning the model parameter tuple.
inline std::optional<GExpr> compile_guide(const StanProgram& prog, const TypeInfo& types) {
    if (!prog.guide) return std::nullopt;
    std::vector<std::string> param_names;
    if (prog.parameters)
        for (const auto& d : prog.parameters->decls) param_names.push_back(d.name);

    Translator tr(types, /*generative_tildes=*/true);
    GExpr body = tr.compile_stmts(prog.guide->stmts, g_return_names(param_names));

    if (prog.guide_parameters) {
        const auto& decls = prog.guide_parameters->decls;
        for (auto it = decls.rbegin(); it != decls.rend(); ++it) {
            GParam p;
            p.name = it->name;
            IType t = types.decl_types.at(it->name);
            if (!t.scalar()) p.shape = detail::shape_argument(t);
            body = g_let(GPattern::var(it->name), g_expr(std::move(p)), std::move(body));
        }
    }
    return body;
}

}  // namespace stangen
