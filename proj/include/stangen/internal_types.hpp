#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "stangen/ast.hpp"
#include "stangen/ast_printer.hpp"

namespace stangen {

// ---------------------------------------------------------------------------
// Size expression canonicalization: flatten +/* chains, fold integer
// literals, and sort commutative operands, so `N+1` and `1+N` compare equal
// while `2*N` and `N+N` stay distinct (those defer to a runtime assertion).

namespace sizes {

inline Expr canonicalize(const Expr& e);

inline void flatten(const Expr& e, const std::string& op, std::vector<Expr>& out) {
    if (const auto* c = e.as<CallExpr>(); c && c->fn == op && c->args.size() == 2) {
        flatten(c->args[0], op, out);
        flatten(c->args[1], op, out);
    } else {
        out.push_back(canonicalize(e));
    }
}

inline Expr canonicalize(const Expr& e) {
    const auto* c = e.as<CallExpr>();
    if (!c) {
        Expr copy = e;
        std::visit(
            [&](auto& node) {
                using T = std::decay_t<decltype(node)>;
                if constexpr (std::is_same_v<T, IndexExpr>) {
                    *node.target = canonicalize(*node.target);
                    for (auto& ix : node.indices) ix = canonicalize(ix);
                }
            },
            copy.node);
        return copy;
    }
    if ((c->fn == "+" || c->fn == "*") && c->args.size() == 2) {
        std::vector<Expr> ops;
        flatten(e, c->fn, ops);
        long long lit = c->fn == "+" ? 0 : 1;
        std::vector<Expr> rest;
        for (auto& x : ops) {
            if (const auto* i = x.as<IntLit>()) {
                lit = c->fn == "+" ? lit + i->value : lit * i->value;
            } else {
                rest.push_back(std::move(x));
            }
        }
        std::sort(rest.begin(), rest.end(), [](const Expr& a, const Expr& b) {
            return expr_to_string(a) < expr_to_string(b);
        });
        std::vector<Expr> all;
        bool identity = (c->fn == "+" && lit == 0) || (c->fn == "*" && lit == 1);
        if (!identity || rest.empty()) all.push_back(int_lit(lit));
        for (auto& x : rest) all.push_back(std::move(x));
        Expr acc = std::move(all[0]);
        for (size_t i = 1; i < all.size(); ++i)
            acc = call(c->fn, {std::move(acc), std::move(all[i])});
        return acc;
    }
    std::vector<Expr> args;
    for (const auto& a : c->args) args.push_back(canonicalize(a));
    return call(c->fn, std::move(args));
}

inline bool equal(const Expr& a, const Expr& b) {
    return structural_equal(canonicalize(a), canonicalize(b));
}

}  // namespace sizes

// ---------------------------------------------------------------------------
// Internal type language

struct Size {
    enum class Kind { Expr, Var };
    Kind kind = Kind::Expr;
    Expr expr = int_lit(0);  // canonical form
    int var = 0;

    static Size of_expr(Expr e) { return Size{Kind::Expr, sizes::canonicalize(e), 0}; }
    static Size of_int(long long n) { return Size{Kind::Expr, int_lit(n), 0}; }
    static Size of_var(int id) { return Size{Kind::Var, int_lit(0), id}; }
    bool is_var() const { return kind == Kind::Var; }
};

struct Dim {
    enum class Kind { List, Var, ShapeOf };
    Kind kind = Kind::Var;
    std::vector<Size> list;
    int var = 0;
    std::optional<Expr> shape_of;

    static Dim of_list(std::vector<Size> l) { return Dim{Kind::List, std::move(l), 0, {}}; }
    static Dim of_var(int id) { return Dim{Kind::Var, {}, id, {}}; }
    static Dim of_shape(Expr e) { return Dim{Kind::ShapeOf, {}, 0, std::move(e)}; }
    bool is_var() const { return kind == Kind::Var; }
};

struct IType {
    enum class Kind { Int, Real, Vector, RowVector, Matrix, Array, ArrayDim };
    Kind kind = Kind::Real;
    std::vector<Size> sizes;               // Vector/RowVector: 1, Matrix: 2, Array: 1
    std::shared_ptr<const IType> elem;     // Array / ArrayDim
    std::optional<Dim> dim;                // ArrayDim

    bool scalar() const { return kind == Kind::Int || kind == Kind::Real; }
};

inline IType t_int() { return IType{IType::Kind::Int, {}, nullptr, {}}; }
inline IType t_real() { return IType{IType::Kind::Real, {}, nullptr, {}}; }
inline IType t_vector(Size n) { return IType{IType::Kind::Vector, {std::move(n)}, nullptr, {}}; }
inline IType t_row_vector(Size n) {
    return IType{IType::Kind::RowVector, {std::move(n)}, nullptr, {}};
}
inline IType t_matrix(Size r, Size c) {
    return IType{IType::Kind::Matrix, {std::move(r), std::move(c)}, nullptr, {}};
}
inline IType t_array(IType elem, Size n) {
    return IType{IType::Kind::Array, {std::move(n)},
                 std::make_shared<const IType>(std::move(elem)), {}};
}
inline IType t_array_dim(IType elem, Dim d) {
    return IType{IType::Kind::ArrayDim, {}, std::make_shared<const IType>(std::move(elem)),
                 std::move(d)};
}

// ---------------------------------------------------------------------------
// Substitution

struct Subst {
    std::map<int, Size> size_map;
    std::map<int, Dim> dim_map;

    Size resolve(Size s) const {
        while (s.is_var()) {
            auto it = size_map.find(s.var);
            if (it == size_map.end()) break;
            s = it->second;
        }
        return s;
    }

    Dim resolve(Dim d) const {
        while (d.is_var()) {
            auto it = dim_map.find(d.var);
            if (it == dim_map.end()) break;
            d = it->second;
        }
        if (d.kind == Dim::Kind::List)
            for (auto& s : d.list) s = resolve(s);
        return d;
    }

    IType apply(const IType& t) const {
        IType out = t;
        for (auto& s : out.sizes) s = resolve(s);
        if (out.dim) out.dim = resolve(*out.dim);
        if (out.elem) out.elem = std::make_shared<const IType>(apply(*out.elem));
        // a dim array whose shape resolved to a concrete list grounds into
        // nested sized arrays
        if (out.kind == IType::Kind::ArrayDim && out.dim->kind == Dim::Kind::List) {
            IType inner = *out.elem;
            const auto& l = out.dim->list;
            for (size_t i = l.size(); i > 0; --i) inner = t_array(std::move(inner), l[i - 1]);
            return inner;
        }
        return out;
    }

    bool has_unresolved(const IType& t) const {
        IType r = apply(t);
        for (const auto& s : r.sizes)
            if (s.is_var()) return true;
        if (r.dim && r.dim->is_var()) return true;
        if (r.dim && r.dim->kind == Dim::Kind::List)
            for (const auto& s : r.dim->list)
                if (s.is_var()) return true;
        if (r.elem) return has_unresolved(*r.elem);
        return false;
    }
};

// A size equality between two concrete expressions that cannot be decided
// syntactically; emitted code must assert it at run time.
struct DeferredEq {
    Expr left;
    Expr right;
};

inline std::string size_to_string(const Size& s) {
    if (s.is_var()) return "_";
    return expr_to_string(s.expr);
}

inline std::string dim_to_string(const Dim& d) {
    switch (d.kind) {
        case Dim::Kind::Var: return "*";
        case Dim::Kind::ShapeOf: return "shape(" + expr_to_string(*d.shape_of) + ")";
        case Dim::Kind::List: {
            std::string out;
            for (size_t i = 0; i < d.list.size(); ++i) {
                if (i) out += ",";
                out += size_to_string(d.list[i]);
            }
            return out;
        }
    }
    return "?";
}

inline std::string type_to_string(const IType& t) {
    switch (t.kind) {
        case IType::Kind::Int: return "int";
        case IType::Kind::Real: return "real";
        case IType::Kind::Vector: return "vector[" + size_to_string(t.sizes[0]) + "]";
        case IType::Kind::RowVector: return "row_vector[" + size_to_string(t.sizes[0]) + "]";
        case IType::Kind::Matrix:
            return "matrix[" + size_to_string(t.sizes[0]) + "," + size_to_string(t.sizes[1]) +
                   "]";
        case IType::Kind::Array: {
            // collect nested array sizes into one bracket group
            std::vector<std::string> dims;
            const IType* cur = &t;
            while (cur->kind == IType::Kind::Array) {
                dims.push_back(size_to_string(cur->sizes[0]));
                cur = cur->elem.get();
            }
            std::string out = type_to_string(*cur) + "[";
            for (size_t i = 0; i < dims.size(); ++i) {
                if (i) out += ",";
                out += dims[i];
            }
            return out + "]";
        }
        case IType::Kind::ArrayDim:
            return type_to_string(*t.elem) + "[" + dim_to_string(*t.dim) + "]";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Unification state. Clones are cheap, which the schema instantiation search
// uses to try alternatives speculatively.

struct Solver {
    Subst subst;
    std::vector<DeferredEq> deferred;
    int next_size_var = 1;
    int next_dim_var = 1;

    Size fresh_size() { return Size::of_var(next_size_var++); }
    Dim fresh_dim() { return Dim::of_var(next_dim_var++); }
};

// Returns an error message on failure, std::nullopt on success.  `promote`
// allows int-to-real subsumption from `actual` into `expected`.
inline std::optional<std::string> unify_type(Solver& sv, const IType& expected,
                                             const IType& actual, bool promote);

inline std::optional<std::string> unify_size(Solver& sv, const Size& a, const Size& b) {
    Size ra = sv.subst.resolve(a);
    Size rb = sv.subst.resolve(b);
    if (ra.is_var() && rb.is_var()) {
        if (ra.var != rb.var) sv.subst.size_map[ra.var] = rb;
        return std::nullopt;
    }
    if (ra.is_var()) {
        sv.subst.size_map[ra.var] = rb;
        return std::nullopt;
    }
    if (rb.is_var()) {
        sv.subst.size_map[rb.var] = ra;
        return std::nullopt;
    }
    if (structural_equal(ra.expr, rb.expr)) return std::nullopt;
    const auto* la = ra.expr.as<IntLit>();
    const auto* lb = rb.expr.as<IntLit>();
    if (la && lb && la->value != lb->value)
        return "size mismatch: " + std::to_string(la->value) + " vs " +
               std::to_string(lb->value);
    // concrete expressions that differ syntactically become a runtime check
    sv.deferred.push_back({ra.expr, rb.expr});
    return std::nullopt;
}

inline std::optional<std::string> unify_dim(Solver& sv, const Dim& a, const Dim& b) {
    Dim ra = sv.subst.resolve(a);
    Dim rb = sv.subst.resolve(b);
    if (ra.is_var() && rb.is_var()) {
        if (ra.var != rb.var) sv.subst.dim_map[ra.var] = rb;
        return std::nullopt;
    }
    if (ra.is_var()) {
        sv.subst.dim_map[ra.var] = rb;
        return std::nullopt;
    }
    if (rb.is_var()) {
        sv.subst.dim_map[rb.var] = ra;
        return std::nullopt;
    }
    if (ra.kind == Dim::Kind::List && rb.kind == Dim::Kind::List) {
        if (ra.list.size() != rb.list.size())
            return "dimension count mismatch: " + std::to_string(ra.list.size()) + " vs " +
                   std::to_string(rb.list.size());
        for (size_t i = 0; i < ra.list.size(); ++i)
            if (auto err = unify_size(sv, ra.list[i], rb.list[i])) return err;
        return std::nullopt;
    }
    if (ra.kind == Dim::Kind::ShapeOf && rb.kind == Dim::Kind::ShapeOf) {
        if (sizes::equal(*ra.shape_of, *rb.shape_of)) return std::nullopt;
        sv.deferred.push_back({call("shape", {*ra.shape_of}), call("shape", {*rb.shape_of})});
        return std::nullopt;
    }
    // shape(e) against a concrete list: only checkable at run time
    const Dim& sh = ra.kind == Dim::Kind::ShapeOf ? ra : rb;
    const Dim& ls = ra.kind == Dim::Kind::ShapeOf ? rb : ra;
    std::vector<Expr> elems;
    for (const auto& s : ls.list) {
        if (s.is_var()) return "cannot relate an unresolved size to shape(...)";
        elems.push_back(s.expr);
    }
    sv.deferred.push_back({call("shape", {*sh.shape_of}), make_expr(ArrayLit{elems})});
    return std::nullopt;
}

namespace detail {

// Peels every Array layer, returning the outermost-first size list and core.
inline const IType* flatten_arrays(const IType& t, std::vector<Size>& out) {
    const IType* cur = &t;
    while (cur->kind == IType::Kind::Array) {
        out.push_back(cur->sizes[0]);
        cur = cur->elem.get();
    }
    return cur;
}

}  // namespace detail

inline std::optional<std::string> unify_type(Solver& sv, const IType& expected,
                                             const IType& actual, bool promote) {
    using K = IType::Kind;
    auto mismatch = [&]() -> std::optional<std::string> {
        return "cannot unify " + type_to_string(expected) + " with " + type_to_string(actual);
    };

    if (expected.kind == K::ArrayDim || actual.kind == K::ArrayDim) {
        if (expected.kind == K::ArrayDim && actual.kind == K::ArrayDim) {
            if (auto err = unify_type(sv, *expected.elem, *actual.elem, promote)) return err;
            return unify_dim(sv, *expected.dim, *actual.dim);
        }
        const IType& da = expected.kind == K::ArrayDim ? expected : actual;
        const IType& other = expected.kind == K::ArrayDim ? actual : expected;
        if (other.kind != K::Array) return mismatch();
        std::vector<Size> shape;
        const IType* core = detail::flatten_arrays(other, shape);
        if (core->kind == K::ArrayDim) {
            Dim cd = sv.subst.resolve(*core->dim);
            if (cd.kind != Dim::Kind::List)
                return "cannot unify a dim array nested under sized arrays";
            for (const auto& s : cd.list) shape.push_back(s);
            core = core->elem.get();
        }
        bool exp_is_dim = expected.kind == K::ArrayDim;
        if (auto err = exp_is_dim ? unify_type(sv, *da.elem, *core, promote)
                                  : unify_type(sv, *core, *da.elem, promote))
            return err;
        return unify_dim(sv, *da.dim, Dim::of_list(std::move(shape)));
    }

    switch (expected.kind) {
        case K::Int:
            if (actual.kind == K::Int) return std::nullopt;
            return mismatch();
        case K::Real:
            if (actual.kind == K::Real) return std::nullopt;
            if (actual.kind == K::Int && promote) return std::nullopt;
            return mismatch();
        case K::Vector:
            if (actual.kind != K::Vector) return mismatch();
            return unify_size(sv, expected.sizes[0], actual.sizes[0]);
        case K::RowVector:
            if (actual.kind != K::RowVector) return mismatch();
            return unify_size(sv, expected.sizes[0], actual.sizes[0]);
        case K::Matrix:
            if (actual.kind != K::Matrix) return mismatch();
            if (auto err = unify_size(sv, expected.sizes[0], actual.sizes[0])) return err;
            return unify_size(sv, expected.sizes[1], actual.sizes[1]);
        case K::Array:
            if (actual.kind != K::Array) return mismatch();
            if (auto err = unify_size(sv, expected.sizes[0], actual.sizes[0])) return err;
            return unify_type(sv, *expected.elem, *actual.elem, promote);
        default: return mismatch();
    }
}

// ---------------------------------------------------------------------------
// Ground vectorization relation. `t` is a lifted form of `scalar_t` when the
// flag permits broadcasting; without the flag only equal types relate.

inline bool type_equal(const IType& a, const IType& b) {
    if (a.kind != b.kind) return false;
    if (a.sizes.size() != b.sizes.size()) return false;
    for (size_t i = 0; i < a.sizes.size(); ++i) {
        if (a.sizes[i].is_var() || b.sizes[i].is_var()) {
            if (!(a.sizes[i].is_var() && b.sizes[i].is_var() &&
                  a.sizes[i].var == b.sizes[i].var))
                return false;
        } else if (!structural_equal(a.sizes[i].expr, b.sizes[i].expr)) {
            return false;
        }
    }
    if (a.kind == IType::Kind::ArrayDim) {
        const Dim& da = *a.dim;
        const Dim& db = *b.dim;
        if (da.kind != db.kind) return false;
        if (da.kind == Dim::Kind::Var && da.var != db.var) return false;
        if (da.kind == Dim::Kind::ShapeOf && !sizes::equal(*da.shape_of, *db.shape_of))
            return false;
        if (da.kind == Dim::Kind::List) {
            if (da.list.size() != db.list.size()) return false;
            for (size_t i = 0; i < da.list.size(); ++i) {
                IType wa = t_vector(da.list[i]);
                IType wb = t_vector(db.list[i]);
                if (!type_equal(wa, wb)) return false;
            }
        }
    }
    if (a.elem) return type_equal(*a.elem, *b.elem);
    return true;
}

inline bool vectorize(bool flag, const IType& t, const IType& from) {
    using K = IType::Kind;
    if (type_equal(t, from)) return true;
    if (!flag) return false;
    if (t.kind == K::Array || t.kind == K::ArrayDim) {
        const IType& u = *t.elem;
        if (type_equal(u, from)) return true;
        bool cross = (u.kind == K::Vector && from.kind == K::RowVector) ||
                     (u.kind == K::RowVector && from.kind == K::Vector);
        if (cross) {
            IType wa = t_vector(u.sizes[0]);
            IType wb = t_vector(from.sizes[0]);
            return type_equal(wa, wb);
        }
        return false;
    }
    if ((t.kind == K::Vector || t.kind == K::RowVector) && from.kind == K::Real) return true;
    return false;
}

}  // namespace stangen
