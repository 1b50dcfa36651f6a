#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "stangen/ast.hpp"
#include "stangen/diagnostics.hpp"
#include "stangen/internal_types.hpp"
#include "stangen/registry.hpp"

namespace stangen {

struct TildeAnn {
    IType observed;
    std::vector<IType> args;
};

struct TypeInfo {
    std::vector<std::pair<std::string, IType>> decl_order;  // resolved, declaration order
    std::map<std::string, IType> decl_types;
    std::map<uint32_t, TildeAnn> tildes;      // keyed by TildeStmt id
    std::map<uint32_t, IType> expr_types;     // keyed by Expr id, resolved
    std::vector<DeferredEq> assertions;
    std::vector<Diagnostic> warnings;
};

namespace detail {

enum class LiftPat {
    Exact,
    Array,
    ArrayDim,
    Vector,
    RowVector,
    CrossArray,    // array of the transposed (row)vector
    CrossArrayDim,
};

inline std::vector<LiftPat> lift_patterns(const IType& actual, bool vect) {
    std::vector<LiftPat> out{LiftPat::Exact};
    if (!vect) return out;
    // dim-open lifts first: they leave the dimension count free instead of
    // pinning the slot to a one-dimensional array
    out.push_back(LiftPat::ArrayDim);
    out.push_back(LiftPat::Array);
    if (actual.kind == IType::Kind::Real || actual.kind == IType::Kind::Int) {
        out.push_back(LiftPat::Vector);
        out.push_back(LiftPat::RowVector);
    }
    if (actual.kind == IType::Kind::Vector || actual.kind == IType::Kind::RowVector) {
        out.push_back(LiftPat::CrossArrayDim);
        out.push_back(LiftPat::CrossArray);
    }
    return out;
}

inline IType materialize(LiftPat pat, const IType& actual, Solver& sv) {
    switch (pat) {
        case LiftPat::Exact: return actual;
        case LiftPat::Array: return t_array(actual, sv.fresh_size());
        case LiftPat::ArrayDim: return t_array_dim(actual, sv.fresh_dim());
        case LiftPat::Vector: return t_vector(sv.fresh_size());
        case LiftPat::RowVector: return t_row_vector(sv.fresh_size());
        case LiftPat::CrossArray: {
            IType crossed = actual.kind == IType::Kind::Vector
                                ? t_row_vector(actual.sizes[0])
                                : t_vector(actual.sizes[0]);
            return t_array(std::move(crossed), sv.fresh_size());
        }
        case LiftPat::CrossArrayDim: {
            IType crossed = actual.kind == IType::Kind::Vector
                                ? t_row_vector(actual.sizes[0])
                                : t_vector(actual.sizes[0]);
            return t_array_dim(std::move(crossed), sv.fresh_dim());
        }
    }
    return actual;
}

struct InstVars {
    std::map<int, Size> size_map;
    std::map<int, Dim> dim_map;
};

inline Size inst_size(const Size& s, Solver& sv, InstVars& iv) {
    if (s.is_var() && s.var < 0) {
        auto it = iv.size_map.find(s.var);
        if (it == iv.size_map.end()) it = iv.size_map.emplace(s.var, sv.fresh_size()).first;
        return it->second;
    }
    return s;
}

inline Dim inst_dim(const Dim& d, Solver& sv, InstVars& iv) {
    if (d.is_var() && d.var < 0) {
        auto it = iv.dim_map.find(d.var);
        if (it == iv.dim_map.end()) it = iv.dim_map.emplace(d.var, sv.fresh_dim()).first;
        return it->second;
    }
    if (d.kind == Dim::Kind::List) {
        Dim out = d;
        for (auto& s : out.list) s = inst_size(s, sv, iv);
        return out;
    }
    return d;
}

inline IType instantiate(const IType& t, Solver& sv, InstVars& iv) {
    IType out = t;
    for (auto& s : out.sizes) s = inst_size(s, sv, iv);
    if (out.dim) out.dim = inst_dim(*out.dim, sv, iv);
    if (out.elem) out.elem = std::make_shared<const IType>(instantiate(*out.elem, sv, iv));
    return out;
}

}  // namespace detail

struct CallMatch {
    Solver solver;
    IType result;
    std::vector<IType> arg_slots;
    std::optional<IType> observed_slot;
    int lifts = 0;
};

// Selects the schema instantiation with the fewest broadcast lifts (registry
// order breaks ties).  `observed` is set for sampling statements, where the
// observed side must fit the schema tail exactly.
inline std::optional<CallMatch> match_call(const Registry& reg, const Solver& base,
                                           const std::string& fn,
                                           const std::vector<IType>& arg_types,
                                           const IType* observed, bool dist_only,
                                           std::string& err_detail) {
    const auto* schemas = reg.lookup(fn);
    if (!schemas) {
        err_detail = "unknown function '" + fn + "'";
        return std::nullopt;
    }
    std::optional<CallMatch> best;
    std::vector<std::string> attempts;
    for (const auto& schema : *schemas) {
        if (dist_only && !schema.observed) continue;
        if (observed && !schema.observed) continue;
        if (schema.args.size() != arg_types.size()) {
            attempts.push_back(fn + ": arity " + std::to_string(schema.args.size()));
            continue;
        }
        std::vector<std::vector<detail::LiftPat>> pats;
        for (size_t i = 0; i < arg_types.size(); ++i)
            pats.push_back(detail::lift_patterns(arg_types[i], schema.args[i].vect));

        std::vector<size_t> idx(arg_types.size(), 0);
        for (;;) {
            Solver sv = base;
            detail::InstVars iv;
            int lifts = 0;
            bool ok = true;
            std::string local_err;

            std::optional<IType> obs_slot;
            if (schema.observed) {
                obs_slot = detail::instantiate(schema.observed->type, sv, iv);
                if (observed) {
                    if (auto err = unify_type(sv, *obs_slot, *observed, true)) {
                        ok = false;
                        local_err = *err;
                    }
                }
            }
            std::vector<IType> slots;
            if (ok) {
                for (size_t i = 0; i < arg_types.size() && ok; ++i) {
                    IType slot = detail::instantiate(schema.args[i].type, sv, iv);
                    detail::LiftPat pat = pats[i][idx[i]];
                    if (pat != detail::LiftPat::Exact) ++lifts;
                    IType pattern = detail::materialize(pat, arg_types[i], sv);
                    if (auto err = unify_type(sv, slot, pattern, true)) {
                        ok = false;
                        local_err = *err;
                    }
                    slots.push_back(std::move(slot));
                }
            }
            if (ok && (!best || lifts < best->lifts)) {
                CallMatch m;
                m.result = detail::instantiate(schema.result, sv, iv);
                m.solver = std::move(sv);
                m.arg_slots = std::move(slots);
                m.observed_slot = std::move(obs_slot);
                m.lifts = lifts;
                best = std::move(m);
            } else if (!ok && attempts.size() < 8) {
                attempts.push_back(local_err);
            }
            // next combination
            size_t k = 0;
            while (k < idx.size() && ++idx[k] == pats[k].size()) idx[k++] = 0;
            if (k == idx.size() || idx.empty()) break;
        }
    }
    if (!best) {
        err_detail = "no signature of '" + fn + "' matches";
        for (const auto& a : attempts) err_detail += "\n  tried: " + a;
    }
    return best;
}

// ---------------------------------------------------------------------------
// Program-level checking (declarations, expressions, statements, resolution)

class TypeChecker {
public:
    TypeChecker(const Registry& reg, Diagnostics& diags) : reg_(reg), diags_(diags) {}

    Solver& solver() { return solver_; }
    std::map<std::string, IType>& env() { return env_; }

    // Declaration typing: `_` becomes a fresh size variable, `[*]` a fresh
    // dim variable; size expressions must be int-typed.
    IType check_decl(const Decl& d) {
        auto size_of = [&](const SizeSpec& s) -> Size {
            if (s.wildcard) return solver_.fresh_size();
            IType t = infer_expr(*s.expr);
            Solver probe = solver_;
            if (unify_type(probe, t_int(), t, false))
                diags_.error("type-mismatch",
                             "size expression must be int, got " + type_to_string(t),
                             s.expr->span);
            return Size::of_expr(*s.expr);
        };
        IType base;
        switch (d.type.kind) {
            case BaseTypeKind::Int: base = t_int(); break;
            case BaseTypeKind::Real: base = t_real(); break;
            case BaseTypeKind::Vector: base = t_vector(size_of(*d.type.rows)); break;
            case BaseTypeKind::RowVector: base = t_row_vector(size_of(*d.type.rows)); break;
            case BaseTypeKind::Matrix:
                base = t_matrix(size_of(*d.type.rows), size_of(*d.type.cols));
                break;
        }
        IType result = base;
        if (d.shape.kind == ArrayShape::Kind::AnyDims) {
            result = t_array_dim(base, solver_.fresh_dim());
        } else if (d.shape.kind == ArrayShape::Kind::Sizes) {
            std::vector<Size> ss;
            for (const auto& s : d.shape.sizes) ss.push_back(size_of(s));
            for (size_t i = ss.size(); i > 0; --i) result = t_array(result, ss[i - 1]);
        }
        if (d.constraint.lower) check_condition(*d.constraint.lower, "constraint bound");
        if (d.constraint.upper) check_condition(*d.constraint.upper, "constraint bound");
        env_[d.name] = result;
        return result;
    }

    IType infer_expr(const Expr& e) {
        IType t = infer_expr_node(e);
        expr_types_[e.id] = t;
        return t;
    }

    IType infer_expr_node(const Expr& e) {
        struct Vis {
            TypeChecker& tc;
            const Expr& e;
            IType operator()(const IntLit&) const { return t_int(); }
            IType operator()(const RealLit&) const { return t_real(); }
            IType operator()(const VarRef& v) const {
                auto it = tc.env_.find(v.name);
                if (it == tc.env_.end()) {
                    tc.diags_.error("unknown-identifier", "unknown variable '" + v.name + "'",
                                    e.span);
                    return t_real();
                }
                return it->second;
            }
            IType operator()(const ArrayLit& a) const {
                if (a.elems.empty()) {
                    tc.diags_.error("type-mismatch", "empty array literal", e.span);
                    return t_array(t_real(), Size::of_int(0));
                }
                IType acc = tc.infer_expr(a.elems[0]);
                for (size_t i = 1; i < a.elems.size(); ++i) {
                    IType ti = tc.infer_expr(a.elems[i]);
                    Solver probe = tc.solver_;
                    if (!unify_type(probe, acc, ti, true)) {
                        tc.solver_ = std::move(probe);
                        continue;
                    }
                    probe = tc.solver_;
                    if (!unify_type(probe, ti, acc, true)) {
                        tc.solver_ = std::move(probe);
                        acc = ti;
                        continue;
                    }
                    tc.diags_.error("type-mismatch",
                                    "array literal elements have incompatible types", e.span);
                }
                return t_array(acc, Size::of_int((long long)a.elems.size()));
            }
            IType operator()(const VectorLit& v) const {
                for (const auto& x : v.elems) {
                    IType t = tc.infer_expr(x);
                    if (auto err = unify_type(tc.solver_, t_real(), t, true))
                        tc.diags_.error("type-mismatch",
                                        "vector literal elements must be real: " + *err,
                                        e.span);
                }
                return t_vector(Size::of_int((long long)v.elems.size()));
            }
            IType operator()(const MatrixLit& m) const {
                size_t cols = m.rows.empty() ? 0 : m.rows[0].size();
                for (const auto& row : m.rows) {
                    if (row.size() != cols)
                        tc.diags_.error("type-mismatch", "matrix literal rows differ in length",
                                        e.span);
                    for (const auto& x : row) {
                        IType t = tc.infer_expr(x);
                        if (auto err = unify_type(tc.solver_, t_real(), t, true))
                            tc.diags_.error("type-mismatch",
                                            "matrix literal elements must be real: " + *err,
                                            e.span);
                    }
                }
                return t_matrix(Size::of_int((long long)m.rows.size()),
                                Size::of_int((long long)cols));
            }
            IType operator()(const IndexExpr& ix) const {
                IType t = tc.infer_expr(*ix.target);
                for (const auto& i : ix.indices) {
                    IType it = tc.infer_expr(i);
                    if (auto err = unify_type(tc.solver_, t_int(), it, false))
                        tc.diags_.error("type-mismatch", "index must be int: " + *err, e.span);
                    auto peeled = tc.peel_index(t);
                    if (!peeled) {
                        tc.diags_.error("type-mismatch",
                                        "cannot index a value of type " + type_to_string(t),
                                        e.span);
                        return t_real();
                    }
                    t = *peeled;
                }
                return t;
            }
            IType operator()(const CallExpr& c) const { return tc.infer_call(c, e, nullptr); }
        };
        return std::visit(Vis{*this, e}, e.node);
    }

    void check_stmt(const Stmt& s) {
        std::visit(
            [&](const auto& node) {
                using T = std::decay_t<decltype(node)>;
                if constexpr (std::is_same_v<T, AssignStmt>) {
                    check_assign(node, s);
                } else if constexpr (std::is_same_v<T, ForRangeStmt>) {
                    check_int_exact(node.lo, "loop bound");
                    check_int_exact(node.hi, "loop bound");
                    with_binding(node.var, t_int(), [&] { check_stmts(node.body); });
                } else if constexpr (std::is_same_v<T, ForEachStmt>) {
                    IType ct = solver_.subst.apply(infer_expr(node.container));
                    std::optional<IType> elem = element_type(ct);
                    if (!elem) {
                        diags_.error("type-mismatch",
                                     "cannot iterate over a value of type " +
                                         type_to_string(ct),
                                     s.span);
                        elem = t_real();
                    }
                    with_binding(node.var, *elem, [&] { check_stmts(node.body); });
                } else if constexpr (std::is_same_v<T, WhileStmt>) {
                    check_condition(node.cond, "while condition");
                    check_stmts(node.body);
                } else if constexpr (std::is_same_v<T, IfStmt>) {
                    check_condition(node.cond, "if condition");
                    check_stmts(node.then_body);
                    check_stmts(node.else_body);
                } else if constexpr (std::is_same_v<T, TargetPlusStmt>) {
                    IType t = infer_expr(node.amount);
                    if (auto err = unify_type(solver_, t_real(), t, true))
                        diags_.error("type-mismatch", "target increment must be real: " + *err,
                                     s.span);
                } else if constexpr (std::is_same_v<T, TildeStmt>) {
                    check_tilde(node, s);
                } else if constexpr (std::is_same_v<T, SkipStmt>) {
                } else if constexpr (std::is_same_v<T, ReturnStmt>) {
                    if (node.value) infer_expr(*node.value);
                }
            },
            s.node);
    }

    void check_stmts(const std::vector<Stmt>& stmts) {
        for (const auto& s : stmts) check_stmt(s);
    }

    void register_network(const NetworkDecl& n) {
        network_io_[n.name] = {solver_.fresh_dim(), solver_.fresh_dim()};
    }

    bool is_network(const std::string& name) const { return network_io_.count(name) > 0; }

    const std::map<uint32_t, TildeAnn>& raw_tildes() const { return tildes_; }

    // Finalize: ground network-parameter shapes to their runtime shapes, then
    // resolve every recorded annotation through the substitution.
    TypeInfo finalize(const std::vector<std::pair<std::string, const Decl*>>& decl_order) {
        // residual dims of dotted (network) parameters resolve to the shape
        // of the lifted tensor, known when the network is loaded
        for (const auto& [name, d] : decl_order) {
            if (name.find('.') == std::string::npos) continue;
            IType t = solver_.subst.apply(env_[name]);
            bind_residual_dims_to_shape(t, name);
        }
        TypeInfo info;
        for (const auto& [name, d] : decl_order) {
            IType t = solver_.subst.apply(env_[name]);
            info.decl_order.emplace_back(name, t);
            info.decl_types[name] = t;
            if (solver_.subst.has_unresolved(t)) {
                Diagnostic w;
                w.severity = Severity::Warning;
                w.code = "ambiguous-shape";
                w.message = "shape of '" + name + "' cannot be deduced";
                w.span = d ? d->span : SourceSpan{};
                info.warnings.push_back(std::move(w));
            }
        }
        for (auto& [id, ann] : tildes_) {
            TildeAnn resolved;
            resolved.observed = solver_.subst.apply(ann.observed);
            for (auto& a : ann.args) resolved.args.push_back(solver_.subst.apply(a));
            info.tildes[id] = std::move(resolved);
        }
        for (auto& [id, t] : expr_types_) info.expr_types[id] = solver_.subst.apply(t);
        for (auto& d : solver_.deferred) info.assertions.push_back(d);
        return info;
    }

private:
    const Registry& reg_;
    Diagnostics& diags_;
    Solver solver_;
    std::map<std::string, IType> env_;
    std::map<std::string, std::pair<Dim, Dim>> network_io_;  // name -> (in, out)
    std::map<uint32_t, TildeAnn> tildes_;
    std::map<uint32_t, IType> expr_types_;

    void bind_residual_dims_to_shape(const IType& t, const std::string& name) {
        if (t.dim && t.dim->is_var())
            solver_.subst.dim_map[t.dim->var] = Dim::of_shape(var_ref(name));
        if (t.elem) bind_residual_dims_to_shape(*t.elem, name);
    }

    std::optional<IType> peel_index(const IType& t0) {
        IType t = solver_.subst.apply(t0);
        switch (t.kind) {
            case IType::Kind::Array: return *t.elem;
            case IType::Kind::Vector:
            case IType::Kind::RowVector: return t_real();
            case IType::Kind::Matrix: return t_row_vector(t.sizes[1]);
            case IType::Kind::ArrayDim: {
                Dim d = solver_.subst.resolve(*t.dim);
                if (d.kind != Dim::Kind::List) return std::nullopt;
                if (d.list.size() == 1) return *t.elem;
                return t_array_dim(*t.elem,
                                   Dim::of_list({d.list.begin() + 1, d.list.end()}));
            }
            default: return std::nullopt;
        }
    }

    std::optional<IType> element_type(const IType& t) {
        switch (t.kind) {
            case IType::Kind::Array: return *t.elem;
            case IType::Kind::Vector:
            case IType::Kind::RowVector: return t_real();
            case IType::Kind::Matrix: return t_real();  // elementwise 2-d iteration
            case IType::Kind::ArrayDim: return std::nullopt;
            default: return std::nullopt;
        }
    }

    void with_binding(const std::string& name, IType t, const std::function<void()>& body) {
        auto it = env_.find(name);
        std::optional<IType> saved;
        if (it != env_.end()) saved = it->second;
        env_[name] = std::move(t);
        body();
        if (saved)
            env_[name] = *saved;
        else
            env_.erase(name);
    }

    void check_condition(const Expr& e, const char* what) {
        IType t = infer_expr(e);
        if (auto err = unify_type(solver_, t_real(), t, true))
            diags_.error("type-mismatch", std::string(what) + " must be real or int: " + *err,
                         e.span);
    }

    void check_int_exact(const Expr& e, const char* what) {
        IType t = infer_expr(e);
        if (auto err = unify_type(solver_, t_int(), t, false))
            diags_.error("type-mismatch", std::string(what) + " must be int: " + *err, e.span);
    }

    IType infer_call(const CallExpr& c, const Expr& e, const IType* /*unused*/) {
        // network application is shape-opaque: in -> out over dim arrays
        auto nit = network_io_.find(c.fn);
        if (nit != network_io_.end()) {
            if (c.args.size() != 1) {
                diags_.error("arity-mismatch", "network '" + c.fn + "' takes one argument",
                             e.span);
                return t_real();
            }
            IType at = infer_expr(c.args[0]);
            IType in_slot = t_array_dim(t_real(), nit->second.first);
            if (auto err = unify_type(solver_, in_slot, at, true))
                diags_.error("type-mismatch", "network input: " + *err, e.span);
            return t_array_dim(t_real(), nit->second.second);
        }
        std::vector<IType> arg_types;
        for (const auto& a : c.args) arg_types.push_back(infer_expr(a));
        std::string err;
        auto m = match_call(reg_, solver_, c.fn, arg_types, nullptr, false, err);
        if (!m) {
            auto code = err.rfind("unknown function", 0) == 0 ? "unknown-identifier"
                                                              : "type-mismatch";
            diags_.error(code, err, e.span);
            return t_real();
        }
        solver_ = std::move(m->solver);
        return m->result;
    }

    void check_assign(const AssignStmt& a, const Stmt& s) {
        auto it = env_.find(a.lhs.name);
        if (it == env_.end()) {
            diags_.error("unknown-identifier", "unknown variable '" + a.lhs.name + "'", s.span);
            return;
        }
        IType t = it->second;
        size_t i = 0;
        while (i < a.lhs.indices.size()) {
            check_int_exact(a.lhs.indices[i], "index");
            IType rt = solver_.subst.apply(t);
            if (rt.kind == IType::Kind::Matrix) {
                if (a.lhs.indices.size() - i != 2) {
                    diags_.error("type-mismatch",
                                 "matrix cell assignment needs exactly two indices", s.span);
                    return;
                }
                check_int_exact(a.lhs.indices[i + 1], "index");
                t = t_real();
                i += 2;
                continue;
            }
            if (rt.kind == IType::Kind::Vector || rt.kind == IType::Kind::RowVector) {
                t = t_real();
                ++i;
                continue;
            }
            auto peeled = peel_index(rt);
            if (!peeled) {
                diags_.error("type-mismatch",
                             "cannot index assignment target of type " + type_to_string(rt),
                             s.span);
                return;
            }
            t = *peeled;
            ++i;
        }
        IType vt = infer_expr(a.value);
        if (auto err = unify_type(solver_, t, vt, true))
            diags_.error("type-mismatch", "assignment: " + *err, s.span);
    }

    void check_tilde(const TildeStmt& t, const Stmt& s) {
        IType obs = infer_expr(t.observed);
        std::vector<IType> args;
        for (const auto& a : t.args) args.push_back(infer_expr(a));
        if (!reg_.is_distribution(t.dist)) {
            diags_.error(reg_.lookup(t.dist) ? "type-mismatch" : "unknown-identifier",
                         "'" + t.dist + "' is not a known distribution", s.span);
            return;
        }
        std::string err;
        auto m = match_call(reg_, solver_, t.dist, args, &obs, true, err);
        if (!m) {
            diags_.error("type-mismatch", err, s.span);
            return;
        }
        solver_ = std::move(m->solver);
        TildeAnn ann;
        ann.observed = *m->observed_slot;
        ann.args = m->arg_slots;
        tildes_[s.id] = std::move(ann);
    }
};

// One `name : resolved-type` line per declaration, in declaration order.
inline std::string types_listing(const TypeInfo& info) {
    std::string out;
    for (const auto& [name, t] : info.decl_order)
        out += name + " : " + type_to_string(t) + "\n";
    return out;
}

// Runs the four-step analysis over a kernelized program (plus guide blocks):
// constraint gathering, unification, ambiguity warnings, and concrete-size
// annotations for code generation.
inline std::optional<TypeInfo> resolve_program(const StanProgram& prog, Diagnostics& diags,
                                               const Registry& reg = builtin_registry()) {
    TypeChecker tc(reg, diags);
    for (const auto& n : prog.networks) tc.register_network(n);

    std::vector<std::pair<std::string, const Decl*>> order;
    auto declare = [&](const std::optional<Block>& b) {
        if (!b) return;
        for (const auto& d : b->decls) {
            tc.check_decl(d);
            order.emplace_back(d.name, &d);
        }
    };
    auto check_block = [&](const std::optional<Block>& b) {
        if (!b) return;
        tc.check_stmts(b->stmts);
    };

    declare(prog.data);
    declare(prog.transformed_data);
    check_block(prog.transformed_data);
    declare(prog.parameters);
    declare(prog.transformed_parameters);
    check_block(prog.transformed_parameters);
    declare(prog.model);
    check_block(prog.model);
    declare(prog.generated_quantities);
    check_block(prog.generated_quantities);
    declare(prog.guide_parameters);
    declare(prog.guide);
    check_block(prog.guide);

    if (diags.has_errors()) return std::nullopt;
    return tc.finalize(order);
}

}  // namespace stangen
