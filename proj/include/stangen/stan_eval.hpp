#pragma once

#include <map>
#include <string>
#include <vector>

#include "stangen/ast.hpp"
#include "stangen/builtins.hpp"
#include "stangen/distributions.hpp"
#include "stangen/value.hpp"

namespace stangen {

// Deterministic evaluation of expressions over an environment.
inline Value eval_expr(const Env& env, const Expr& e) {
    struct Vis {
        const Env& env;
        const Expr& e;
        Value operator()(const IntLit& x) const { return int_v(x.value); }
        Value operator()(const RealLit& x) const { return real_v(x.value); }
        Value operator()(const VarRef& x) const {
            const Value* v = env.find(x.name);
            if (!v) throw EvalError("use of undefined variable '" + x.name + "'");
            return *v;
        }
        Value operator()(const ArrayLit& x) const {
            ArrayV out;
            out.elems.reserve(x.elems.size());
            for (const auto& el : x.elems) out.elems.push_back(eval_expr(env, el));
            return Value(std::move(out));
        }
        Value operator()(const VectorLit& x) const {
            VecV out;
            out.v.reserve(x.elems.size());
            for (const auto& el : x.elems) out.v.push_back(as_real(eval_expr(env, el)));
            return Value(std::move(out));
        }
        Value operator()(const MatrixLit& x) const {
            MatV out;
            for (const auto& row : x.rows) {
                std::vector<double> r;
                r.reserve(row.size());
                for (const auto& el : row) r.push_back(as_real(eval_expr(env, el)));
                out.rows.push_back(std::move(r));
            }
            return Value(std::move(out));
        }
        Value operator()(const IndexExpr& x) const {
            Value v = eval_expr(env, *x.target);
            for (const auto& ix : x.indices) v = element_at(v, as_int(eval_expr(env, ix)));
            return v;
        }
        Value operator()(const CallExpr& x) const {
            std::vector<Value> args;
            args.reserve(x.args.size());
            for (const auto& a : x.args) args.push_back(eval_expr(env, a));
            if (is_runtime_distribution(x.fn)) return Value(DistV{x.fn, std::move(args)});
            return call_builtin(x.fn, args);
        }
    };
    return std::visit(Vis{env, e}, e.node);
}

// Builds an uninitialized value of the declared shape; reals poison with NaN
// so that a read-before-write surfaces in results rather than passing
// silently.
inline Value default_value(const Env& env, const Decl& d) {
    auto size_of = [&](const SizeSpec& s) -> long long {
        if (s.wildcard)
            throw EvalError("cannot materialize '" + d.name + "': size is not concrete");
        return as_int(eval_expr(env, *s.expr));
    };
    Value base;
    switch (d.type.kind) {
        case BaseTypeKind::Int: base = int_v(0); break;
        case BaseTypeKind::Real: base = real_v(std::nan("")); break;
        case BaseTypeKind::Vector:
            base = Value(VecV{std::vector<double>((size_t)size_of(*d.type.rows),
                                                  std::nan(""))});
            break;
        case BaseTypeKind::RowVector:
            base = Value(RowVecV{std::vector<double>((size_t)size_of(*d.type.rows),
                                                     std::nan(""))});
            break;
        case BaseTypeKind::Matrix: {
            size_t r = (size_t)size_of(*d.type.rows), c = (size_t)size_of(*d.type.cols);
            base = Value(MatV{std::vector<std::vector<double>>(
                r, std::vector<double>(c, std::nan("")))});
            break;
        }
    }
    if (d.shape.kind == ArrayShape::Kind::AnyDims)
        throw EvalError("cannot materialize '" + d.name + "': shape is not concrete");
    if (d.shape.kind == ArrayShape::Kind::Sizes) {
        std::vector<long long> dims;
        for (const auto& s : d.shape.sizes) dims.push_back(size_of(s));
        for (size_t i = dims.size(); i > 0; --i) {
            ArrayV level;
            level.elems.assign((size_t)dims[i - 1], base);
            base = Value(std::move(level));
        }
    }
    return base;
}

// Executes statements of the kernel model block, updating the environment
// and the reserved target accumulator.
class StanInterp {
public:
    explicit StanInterp(const StanProgram& kernel, long long while_cap = 1'000'000)
        : program_(&kernel), while_cap_(while_cap) {
        if (kernel.model)
            for (const auto& d : kernel.model->decls) locals_[d.name] = &d;
    }

    void exec_stmts(Env& env, const std::vector<Stmt>& stmts) const {
        for (const auto& s : stmts) exec_stmt(env, s);
    }

    void exec_stmt(Env& env, const Stmt& s) const {
        std::visit(
            [&](const auto& node) {
                using T = std::decay_t<decltype(node)>;
                if constexpr (std::is_same_v<T, AssignStmt>) {
                    Value v = eval_expr(env, node.value);
                    if (node.lhs.indices.empty()) {
                        env.set(node.lhs.name, std::move(v));
                        return;
                    }
                    std::vector<long long> path;
                    for (const auto& ix : node.lhs.indices)
                        path.push_back(as_int(eval_expr(env, ix)));
                    const Value* cur = env.find(node.lhs.name);
                    if (!cur) {
                        auto it = locals_.find(node.lhs.name);
                        if (it == locals_.end())
                            throw EvalError("assignment to undeclared variable '" +
                                            node.lhs.name + "'");
                        env.set(node.lhs.name, default_value(env, *it->second));
                        cur = env.find(node.lhs.name);
                    }
                    env.set(node.lhs.name, with_element(*cur, path, 0, v));
                } else if constexpr (std::is_same_v<T, ForRangeStmt>) {
                    long long lo = as_int(eval_expr(env, node.lo));
                    long long hi = as_int(eval_expr(env, node.hi));
                    for (long long i = lo; i <= hi; ++i) {
                        env.set(node.var, int_v(i));
                        exec_stmts(env, node.body);
                    }
                } else if constexpr (std::is_same_v<T, ForEachStmt>) {
                    Value c = eval_expr(env, node.container);
                    if (c.is<MatV>()) {
                        const auto& m = *c.as<MatV>();
                        for (const auto& row : m.rows)
                            for (double x : row) {
                                env.set(node.var, real_v(x));
                                exec_stmts(env, node.body);
                            }
                    } else {
                        size_t n = outer_size(c);
                        for (size_t i = 1; i <= n; ++i) {
                            env.set(node.var, element_at(c, (long long)i));
                            exec_stmts(env, node.body);
                        }
                    }
                } else if constexpr (std::is_same_v<T, WhileStmt>) {
                    long long iters = 0;
                    // condition compares exactly against zero
                    while (as_real(eval_expr(env, node.cond)) != 0.0) {
                        if (++iters > while_cap_)
                            throw EvalError("while loop exceeded the iteration cap");
                        exec_stmts(env, node.body);
                    }
                } else if constexpr (std::is_same_v<T, IfStmt>) {
                    if (as_real(eval_expr(env, node.cond)) != 0.0)
                        exec_stmts(env, node.then_body);
                    else
                        exec_stmts(env, node.else_body);
                } else if constexpr (std::is_same_v<T, SkipStmt>) {
                } else if constexpr (std::is_same_v<T, TargetPlusStmt>) {
                    env.target += as_real(eval_expr(env, node.amount));
                } else if constexpr (std::is_same_v<T, TildeStmt>) {
                    std::vector<Value> params;
                    params.reserve(node.args.size());
                    for (const auto& a : node.args) params.push_back(eval_expr(env, a));
                    DistV d{node.dist, std::move(params)};
                    env.target += dist_lpdf(d, eval_expr(env, node.observed));
                } else if constexpr (std::is_same_v<T, ReturnStmt>) {
                    throw EvalError("return outside a function body");
                }
            },
            s.node);
    }

    // Runs the model block over data and fixed parameter values; the final
    // environment's target is the un-normalized log density.
    Env run(const Env& data, const Env& params) const {
        Env env;
        env.target = 0.0;
        auto bind_all = [&](const std::optional<Block>& b, const Env& src, const char* what) {
            if (!b) return;
            for (const auto& d : b->decls) {
                const Value* v = src.find(d.name);
                if (!v)
                    throw EvalError(std::string("missing ") + what + " binding for '" +
                                    d.name + "'");
                env.set(d.name, *v);
            }
        };
        bind_all(program_->data, data, "data");
        bind_all(program_->parameters, params, "parameter");
        if (program_->model) exec_stmts(env, program_->model->stmts);
        return env;
    }

private:
    const StanProgram* program_;
    std::map<std::string, const Decl*> locals_;
    long long while_cap_;
};

inline Env run_model(const StanProgram& kernel, const Env& data, const Env& params) {
    return StanInterp(kernel).run(data, params);
}

}  // namespace stangen
