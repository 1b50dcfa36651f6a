#pragma once

#include <set>
#include <string>
#include <variant>
#include <vector>

#include "stangen/ast.hpp"
#include "stangen/ast_walk.hpp"

namespace stangen {

struct GExpr;

// Binding pattern of a let: unit, a variable, an indexed cell, or a tuple of
// variables (the state of a loop).
struct GPattern {
    enum class Kind { Unit, Var, IndexedVar, Tuple };
    Kind kind = Kind::Unit;
    std::string name;
    std::vector<Expr> indices;
    std::vector<std::string> tuple;

    static GPattern unit() { return {}; }
    static GPattern var(std::string n) {
        GPattern p;
        p.kind = Kind::Var;
        p.name = std::move(n);
        return p;
    }
    static GPattern indexed(std::string n, std::vector<Expr> ix) {
        GPattern p;
        p.kind = Kind::IndexedVar;
        p.name = std::move(n);
        p.indices = std::move(ix);
        return p;
    }
    static GPattern of_names(const std::vector<std::string>& names) {
        if (names.empty()) return unit();
        if (names.size() == 1) return var(names[0]);
        GPattern p;
        p.kind = Kind::Tuple;
        p.tuple = names;
        return p;
    }
};

struct GLet {
    GPattern pat;
    Box<GExpr> value;
    Box<GExpr> body;
};
struct GIf {
    Expr cond;
    Box<GExpr> then_e;
    Box<GExpr> else_e;
};
// Loops carry the set of variables their body updates; the body returns the
// updated values, which rebind for the next iteration.
struct GFor {
    std::vector<std::string> state;
    std::string var;
    Expr lo;
    Expr hi;
    Box<GExpr> body;
};
struct GWhile {
    std::vector<std::string> state;
    Expr cond;
    Box<GExpr> body;
};
struct GFactor {
    Expr amount;
};
struct GSample {
    Expr dist;
};
struct GObserve {
    Expr dist;
    Expr value;
};
// Learnable-parameter introduction emitted from a guide parameters block.
struct GParam {
    std::string name;
    std::optional<Expr> shape;
};
// 0 values = unit, 1 = plain value, n = tuple.
struct GReturn {
    std::vector<Expr> values;
};

struct GExpr {
    std::variant<GLet, GIf, GFor, GWhile, GFactor, GSample, GObserve, GParam, GReturn> node;

    GExpr() : node(GReturn{}) {}
    template <class T,
              std::enable_if_t<std::is_constructible_v<
                                   std::variant<GLet, GIf, GFor, GWhile, GFactor, GSample,
                                                GObserve, GParam, GReturn>,
                                   T&&>,
                               int> = 0>
    GExpr(T&& n) : node(std::forward<T>(n)) {}

    template <class T>
    const T* as() const {
        return std::get_if<T>(&node);
    }
    template <class T>
    T* as() {
        return std::get_if<T>(&node);
    }
    template <class T>
    bool is() const {
        return std::holds_alternative<T>(node);
    }
};

inline GExpr g_expr(auto node) { return GExpr(std::move(node)); }

inline GExpr g_let(GPattern pat, GExpr value, GExpr body) {
    return g_expr(GLet{std::move(pat), Box<GExpr>(std::move(value)),
                       Box<GExpr>(std::move(body))});
}

inline GExpr g_return_unit() { return g_expr(GReturn{}); }
inline GExpr g_return(Expr e) { return g_expr(GReturn{{std::move(e)}}); }
inline GExpr g_return_names(const std::vector<std::string>& names) {
    GReturn r;
    for (const auto& n : names) r.values.push_back(var_ref(n));
    return g_expr(std::move(r));
}

// ---------------------------------------------------------------------------
// Structural equality

inline bool equal(const GPattern& a, const GPattern& b) {
    if (a.kind != b.kind || a.name != b.name || a.tuple != b.tuple) return false;
    return structural_equal(a.indices, b.indices);
}

inline bool equal(const GExpr& a, const GExpr& b) {
    if (a.node.index() != b.node.index()) return false;
    struct Vis {
        const GExpr& rhs;
        bool operator()(const GLet& x) const {
            const auto& y = *rhs.as<GLet>();
            return equal(x.pat, y.pat) && equal(*x.value, *y.value) && equal(*x.body, *y.body);
        }
        bool operator()(const GIf& x) const {
            const auto& y = *rhs.as<GIf>();
            return structural_equal(x.cond, y.cond) && equal(*x.then_e, *y.then_e) &&
                   equal(*x.else_e, *y.else_e);
        }
        bool operator()(const GFor& x) const {
            const auto& y = *rhs.as<GFor>();
            return x.state == y.state && x.var == y.var && structural_equal(x.lo, y.lo) &&
                   structural_equal(x.hi, y.hi) && equal(*x.body, *y.body);
        }
        bool operator()(const GWhile& x) const {
            const auto& y = *rhs.as<GWhile>();
            return x.state == y.state && structural_equal(x.cond, y.cond) &&
                   equal(*x.body, *y.body);
        }
        bool operator()(const GFactor& x) const {
            return structural_equal(x.amount, rhs.as<GFactor>()->amount);
        }
        bool operator()(const GSample& x) const {
            return structural_equal(x.dist, rhs.as<GSample>()->dist);
        }
        bool operator()(const GObserve& x) const {
            const auto& y = *rhs.as<GObserve>();
            return structural_equal(x.dist, y.dist) && structural_equal(x.value, y.value);
        }
        bool operator()(const GParam& x) const {
            const auto& y = *rhs.as<GParam>();
            if (x.name != y.name) return false;
            if (x.shape.has_value() != y.shape.has_value()) return false;
            return !x.shape || structural_equal(*x.shape, *y.shape);
        }
        bool operator()(const GReturn& x) const {
            return structural_equal(x.values, rhs.as<GReturn>()->values);
        }
    };
    return std::visit(Vis{b}, a.node);
}

// ---------------------------------------------------------------------------
// lhs(stmt): the variables a statement assigns, which become loop state.
// Loop indices are binders, not assignments; the iteration variable of a
// foreach is updated each round and therefore included.

inline void collect_lhs_vars(const Stmt& s, std::set<std::string>& out) {
    detail::walk_stmts(s, [&](const Stmt& x) {
        if (const auto* a = x.as<AssignStmt>()) out.insert(a->lhs.name);
        if (const auto* fe = x.as<ForEachStmt>()) out.insert(fe->var);
    });
}

inline std::set<std::string> lhs_vars(const Stmt& s) {
    std::set<std::string> out;
    collect_lhs_vars(s, out);
    return out;
}

inline std::set<std::string> lhs_vars(const std::vector<Stmt>& stmts) {
    std::set<std::string> out;
    for (const auto& s : stmts) collect_lhs_vars(s, out);
    return out;
}

// ---------------------------------------------------------------------------
// IR rewrites and structural queries

// Rewrites every observation into the equivalent factor over the log
// density.
inline GExpr observe_to_factor(const GExpr& e) {
    struct Vis {
        GExpr operator()(const GLet& x) const {
            return g_let(x.pat, observe_to_factor(*x.value), observe_to_factor(*x.body));
        }
        GExpr operator()(const GIf& x) const {
            return g_expr(GIf{x.cond, Box<GExpr>(observe_to_factor(*x.then_e)),
                              Box<GExpr>(observe_to_factor(*x.else_e))});
        }
        GExpr operator()(const GFor& x) const {
            return g_expr(
                GFor{x.state, x.var, x.lo, x.hi, Box<GExpr>(observe_to_factor(*x.body))});
        }
        GExpr operator()(const GWhile& x) const {
            return g_expr(GWhile{x.state, x.cond, Box<GExpr>(observe_to_factor(*x.body))});
        }
        GExpr operator()(const GFactor& x) const { return g_expr(x); }
        GExpr operator()(const GSample& x) const { return g_expr(x); }
        GExpr operator()(const GObserve& x) const {
            return g_expr(GFactor{call("lpdf", {x.dist, x.value})});
        }
        GExpr operator()(const GParam& x) const { return g_expr(x); }
        GExpr operator()(const GReturn& x) const { return g_expr(x); }
    };
    return std::visit(Vis{}, e.node);
}

// Structural property of compiled programs: a prefix of sample bindings for
// the parameters, then a sample-free body whose every leaf returns the
// parameter tuple.
inline bool has_sample_prefix_shape(const GExpr& program,
                                    const std::vector<std::string>& params) {
    const GExpr* cur = &program;
    size_t prefix = 0;
    while (prefix < params.size()) {
        const auto* let = cur->as<GLet>();
        if (!let || !let->value->is<GSample>()) return false;
        if (let->pat.kind != GPattern::Kind::Var || let->pat.name != params[prefix])
            return false;
        ++prefix;
        cur = &*let->body;
    }
    // body: no samples anywhere, and every tail is return(params)
    bool ok = true;
    std::function<void(const GExpr&, bool)> walk = [&](const GExpr& e, bool tail) {
        std::visit(
            [&](const auto& node) {
                using T = std::decay_t<decltype(node)>;
                if constexpr (std::is_same_v<T, GLet>) {
                    walk(*node.value, false);
                    walk(*node.body, tail);
                } else if constexpr (std::is_same_v<T, GIf>) {
                    walk(*node.then_e, tail);
                    walk(*node.else_e, tail);
                } else if constexpr (std::is_same_v<T, GFor> || std::is_same_v<T, GWhile>) {
                    walk(*node.body, false);
                } else if constexpr (std::is_same_v<T, GSample>) {
                    ok = false;
                } else if constexpr (std::is_same_v<T, GReturn>) {
                    if (tail) {
                        if (node.values.size() != params.size()) {
                            ok = false;
                            return;
                        }
                        for (size_t i = 0; i < params.size(); ++i) {
                            const auto* v = node.values[i].template as<VarRef>();
                            if (!v || v->name != params[i]) ok = false;
                        }
                    }
                }
            },
            e.node);
    };
    walk(*cur, true);
    return ok;
}

}  // namespace stangen
