#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "stangen/ast.hpp"
#include "stangen/ast_walk.hpp"
#include "stangen/diagnostics.hpp"

namespace stangen {

namespace detail {

inline void rename_in_expr(Expr& e, const std::map<std::string, std::string>& names) {
    std::visit(
        [&](auto& node) {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, VarRef>) {
                auto it = names.find(node.name);
                if (it != names.end()) node.name = it->second;
            } else if constexpr (std::is_same_v<T, ArrayLit> || std::is_same_v<T, VectorLit>) {
                for (auto& x : node.elems) rename_in_expr(x, names);
            } else if constexpr (std::is_same_v<T, MatrixLit>) {
                for (auto& row : node.rows)
                    for (auto& x : row) rename_in_expr(x, names);
            } else if constexpr (std::is_same_v<T, IndexExpr>) {
                rename_in_expr(*node.target, names);
                for (auto& x : node.indices) rename_in_expr(x, names);
            } else if constexpr (std::is_same_v<T, CallExpr>) {
                for (auto& x : node.args) rename_in_expr(x, names);
            }
        },
        e.node);
}

inline void rename_in_stmts(std::vector<Stmt>& stmts,
                            const std::map<std::string, std::string>& names) {
    for (auto& s : stmts) {
        std::visit(
            [&](auto& node) {
                using T = std::decay_t<decltype(node)>;
                if constexpr (std::is_same_v<T, AssignStmt>) {
                    auto it = names.find(node.lhs.name);
                    if (it != names.end()) node.lhs.name = it->second;
                    for (auto& e : node.lhs.indices) rename_in_expr(e, names);
                    rename_in_expr(node.value, names);
                } else if constexpr (std::is_same_v<T, ForRangeStmt>) {
                    rename_in_expr(node.lo, names);
                    rename_in_expr(node.hi, names);
                    auto it = names.find(node.var);
                    if (it != names.end()) node.var = it->second;
                    rename_in_stmts(node.body, names);
                } else if constexpr (std::is_same_v<T, ForEachStmt>) {
                    rename_in_expr(node.container, names);
                    auto it = names.find(node.var);
                    if (it != names.end()) node.var = it->second;
                    rename_in_stmts(node.body, names);
                } else if constexpr (std::is_same_v<T, WhileStmt>) {
                    rename_in_expr(node.cond, names);
                    rename_in_stmts(node.body, names);
                } else if constexpr (std::is_same_v<T, IfStmt>) {
                    rename_in_expr(node.cond, names);
                    rename_in_stmts(node.then_body, names);
                    rename_in_stmts(node.else_body, names);
                } else if constexpr (std::is_same_v<T, TargetPlusStmt>) {
                    rename_in_expr(node.amount, names);
                } else if constexpr (std::is_same_v<T, TildeStmt>) {
                    rename_in_expr(node.observed, names);
                    for (auto& e : node.args) rename_in_expr(e, names);
                } else if constexpr (std::is_same_v<T, ReturnStmt>) {
                    if (node.value) rename_in_expr(*node.value, names);
                }
            },
            s.node);
    }
}

inline bool expr_calls_any(const Expr& e, const std::set<std::string>& fns) {
    bool found = false;
    walk_exprs(e, [&](const Expr& x) {
        if (const auto* c = x.as<CallExpr>())
            if (fns.count(c->fn)) found = true;
    });
    return found;
}

}  // namespace detail

// Replaces every call to a user-declared function by its body, with locals
// renamed `<fn>__<n>__<orig>` using a deterministic counter.  Sampling
// statements inside function bodies stay inline at the call site.
class FunctionInliner {
public:
    FunctionInliner(Diagnostics& diags) : diags_(diags) {}

    bool run(StanProgram& prog) {
        for (const auto& f : prog.functions) fns_[f.name] = &f;
        if (!check_recursion()) return false;

        // expand function bodies bottom-up so call sites inline flat bodies
        std::map<std::string, Block> expanded;
        for (const auto& name : topo_order_) {
            Block body = fns_[name]->body;
            expand_block(body, expanded);
            expanded[name] = std::move(body);
        }
        expanded_ = std::move(expanded);

        for (auto* b : {&prog.transformed_data, &prog.transformed_parameters, &prog.model,
                        &prog.generated_quantities, &prog.guide})
            if (*b) expand_block(**b, expanded_);
        prog.functions.clear();
        if (!diags_.has_errors()) IdAssigner().run(prog);
        return !diags_.has_errors();
    }

private:
    Diagnostics& diags_;
    std::map<std::string, const FunDecl*> fns_;
    std::map<std::string, Block> expanded_;
    std::vector<std::string> topo_order_;
    int counter_ = 0;

    bool check_recursion() {
        // DFS over the user-function call graph; cycles are unsupported
        std::map<std::string, int> state;  // 0 new, 1 active, 2 done
        bool ok = true;
        std::function<void(const std::string&)> visit = [&](const std::string& name) {
            auto it = fns_.find(name);
            if (it == fns_.end()) return;
            int& st = state[name];
            if (st == 1) {
                diags_.error("unsupported-recursion",
                             "recursive function '" + name + "' is unsupported",
                             it->second->span);
                ok = false;
                return;
            }
            if (st == 2) return;
            st = 1;
            detail::walk_stmt_exprs(it->second->body.stmts, [&](const Expr& e) {
                if (const auto* c = e.as<CallExpr>())
                    if (fns_.count(c->fn)) visit(c->fn);
            });
            st = 2;
            topo_order_.push_back(name);
        };
        for (const auto& [name, f] : fns_) visit(name);
        return ok;
    }

    static Decl decl_from(BaseTypeKind base, int array_dims, std::string name) {
        Decl d;
        d.type.kind = base;
        if (base == BaseTypeKind::Vector || base == BaseTypeKind::RowVector) {
            d.type.rows = SizeSpec{true, std::nullopt};
        } else if (base == BaseTypeKind::Matrix) {
            d.type.rows = SizeSpec{true, std::nullopt};
            d.type.cols = SizeSpec{true, std::nullopt};
        }
        if (array_dims > 0) {
            d.shape.kind = ArrayShape::Kind::Sizes;
            for (int i = 0; i < array_dims; ++i)
                d.shape.sizes.push_back(SizeSpec{true, std::nullopt});
        }
        d.name = std::move(name);
        return d;
    }

    void expand_block(Block& block, const std::map<std::string, Block>& bodies) {
        std::vector<Stmt> out;
        for (auto& s : block.stmts) expand_stmt(std::move(s), out, block.decls, bodies);
        block.stmts = std::move(out);
    }

    void expand_stmt(Stmt s, std::vector<Stmt>& out, std::vector<Decl>& decls,
                     const std::map<std::string, Block>& bodies) {
        std::visit(
            [&](auto& node) {
                using T = std::decay_t<decltype(node)>;
                if constexpr (std::is_same_v<T, AssignStmt>) {
                    for (auto& e : node.lhs.indices) hoist_calls(e, out, decls, bodies);
                    hoist_calls(node.value, out, decls, bodies);
                } else if constexpr (std::is_same_v<T, ForRangeStmt>) {
                    hoist_calls(node.lo, out, decls, bodies);
                    hoist_calls(node.hi, out, decls, bodies);
                    std::vector<Stmt> body;
                    for (auto& st : node.body) expand_stmt(std::move(st), body, decls, bodies);
                    node.body = std::move(body);
                } else if constexpr (std::is_same_v<T, ForEachStmt>) {
                    hoist_calls(node.container, out, decls, bodies);
                    std::vector<Stmt> body;
                    for (auto& st : node.body) expand_stmt(std::move(st), body, decls, bodies);
                    node.body = std::move(body);
                } else if constexpr (std::is_same_v<T, WhileStmt>) {
                    std::set<std::string> user;
                    for (const auto& [n, f] : fns_) user.insert(n);
                    if (detail::expr_calls_any(node.cond, user))
                        diags_.error("unsupported-feature",
                                     "user function calls in while conditions are unsupported",
                                     s.span);
                    std::vector<Stmt> body;
                    for (auto& st : node.body) expand_stmt(std::move(st), body, decls, bodies);
                    node.body = std::move(body);
                } else if constexpr (std::is_same_v<T, IfStmt>) {
                    hoist_calls(node.cond, out, decls, bodies);
                    std::vector<Stmt> tb, eb;
                    for (auto& st : node.then_body) expand_stmt(std::move(st), tb, decls, bodies);
                    for (auto& st : node.else_body) expand_stmt(std::move(st), eb, decls, bodies);
                    node.then_body = std::move(tb);
                    node.else_body = std::move(eb);
                } else if constexpr (std::is_same_v<T, TargetPlusStmt>) {
                    hoist_calls(node.amount, out, decls, bodies);
                } else if constexpr (std::is_same_v<T, TildeStmt>) {
                    hoist_calls(node.observed, out, decls, bodies);
                    for (auto& e : node.args) hoist_calls(e, out, decls, bodies);
                } else if constexpr (std::is_same_v<T, ReturnStmt>) {
                    if (node.value) hoist_calls(*node.value, out, decls, bodies);
                }
            },
            s.node);
        out.push_back(std::move(s));
    }

    // Rewrites user calls in `e` bottom-up: the call body is appended to
    // `out` and the call is replaced by its result temporary.
    void hoist_calls(Expr& e, std::vector<Stmt>& out, std::vector<Decl>& decls,
                     const std::map<std::string, Block>& bodies) {
        std::visit(
            [&](auto& node) {
                using T = std::decay_t<decltype(node)>;
                if constexpr (std::is_same_v<T, ArrayLit> || std::is_same_v<T, VectorLit>) {
                    for (auto& x : node.elems) hoist_calls(x, out, decls, bodies);
                } else if constexpr (std::is_same_v<T, MatrixLit>) {
                    for (auto& row : node.rows)
                        for (auto& x : row) hoist_calls(x, out, decls, bodies);
                } else if constexpr (std::is_same_v<T, IndexExpr>) {
                    hoist_calls(*node.target, out, decls, bodies);
                    for (auto& x : node.indices) hoist_calls(x, out, decls, bodies);
                } else if constexpr (std::is_same_v<T, CallExpr>) {
                    for (auto& x : node.args) hoist_calls(x, out, decls, bodies);
                }
            },
            e.node);

        const auto* c = e.as<CallExpr>();
        if (!c || !fns_.count(c->fn)) return;
        const FunDecl& f = *fns_.at(c->fn);
        if (c->args.size() != f.params.size()) {
            diags_.error("arity-mismatch",
                         "function '" + f.name + "' expects " +
                             std::to_string(f.params.size()) + " arguments, got " +
                             std::to_string(c->args.size()),
                         e.span);
            return;
        }
        const Block& body = bodies.count(f.name) ? bodies.at(f.name) : f.body;
        ++counter_;
        std::string prefix = f.name + "__" + std::to_string(counter_) + "__";

        std::map<std::string, std::string> rename;
        for (const auto& p : f.params) rename[p.name] = prefix + p.name;
        for (const auto& d : body.decls) rename[d.name] = prefix + d.name;
        collect_loop_indices(body.stmts, prefix, rename);

        // parameter declarations and bindings
        for (size_t i = 0; i < f.params.size(); ++i) {
            decls.push_back(decl_from(f.params[i].base, f.params[i].array_dims,
                                      rename[f.params[i].name]));
            AssignStmt bind;
            bind.lhs = LValue{rename[f.params[i].name], {}, e.span};
            bind.value = c->args[i];
            out.push_back(make_stmt(std::move(bind), e.span));
        }
        // local declarations
        for (const auto& d : body.decls) {
            Decl copy = d;
            copy.name = rename[d.name];
            detail_rename_decl_sizes(copy, rename);
            decls.push_back(std::move(copy));
        }
        // body with the trailing return turned into a result assignment
        std::string ret_name = prefix + "ret";
        decls.push_back(decl_from(f.return_base, f.return_array_dims, ret_name));
        std::vector<Stmt> stmts = body.stmts;
        detail::rename_in_stmts(stmts, rename);
        if (stmts.empty() || !stmts.back().is<ReturnStmt>() ||
            !stmts.back().as<ReturnStmt>()->value) {
            diags_.error("unsupported-feature",
                         "function '" + f.name + "' must end with a single return",
                         f.span);
            return;
        }
        for (size_t i = 0; i + 1 < stmts.size(); ++i) {
            if (contains_return(stmts[i])) {
                diags_.error("unsupported-feature",
                             "function '" + f.name +
                                 "' has an early return, which is unsupported",
                             f.span);
                return;
            }
            out.push_back(std::move(stmts[i]));
        }
        AssignStmt ret_assign;
        ret_assign.lhs = LValue{ret_name, {}, e.span};
        ret_assign.value = std::move(*stmts.back().as<ReturnStmt>()->value);
        out.push_back(make_stmt(std::move(ret_assign), e.span));

        e = make_expr(VarRef{ret_name}, e.span);
    }

    static void detail_rename_decl_sizes(Decl& d, const std::map<std::string, std::string>& m) {
        auto fix = [&](std::optional<SizeSpec>& s) {
            if (s && s->expr) detail::rename_in_expr(*s->expr, m);
        };
        fix(d.type.rows);
        fix(d.type.cols);
        for (auto& s : d.shape.sizes)
            if (s.expr) detail::rename_in_expr(*s.expr, m);
        if (d.constraint.lower) detail::rename_in_expr(*d.constraint.lower, m);
        if (d.constraint.upper) detail::rename_in_expr(*d.constraint.upper, m);
    }

    static void collect_loop_indices(const std::vector<Stmt>& stmts, const std::string& prefix,
                                     std::map<std::string, std::string>& rename) {
        detail::walk_stmts(stmts, [&](const Stmt& s) {
            if (const auto* f = s.as<ForRangeStmt>()) {
                if (!rename.count(f->var)) rename[f->var] = prefix + f->var;
            } else if (const auto* fe = s.as<ForEachStmt>()) {
                if (!rename.count(fe->var)) rename[fe->var] = prefix + fe->var;
            }
        });
    }

    static bool contains_return(const Stmt& s) {
        bool found = false;
        detail::walk_stmts({s}, [&](const Stmt& x) {
            if (x.is<ReturnStmt>()) found = true;
        });
        return found;
    }
};

inline bool inline_functions(StanProgram& prog, Diagnostics& diags) {
    if (prog.functions.empty()) return true;
    return FunctionInliner(diags).run(prog);
}

// Folds the pre/post-processing blocks into a three-block kernel: model
// declarations and statements are the concatenation td, tp, model, gq in
// that order. Networks and guide blocks ride along untouched.
inline StanProgram kernelize(const StanProgram& prog) {
    StanProgram out;
    out.networks = prog.networks;
    out.data = prog.data;
    out.parameters = prog.parameters;
    out.guide_parameters = prog.guide_parameters;
    out.guide = prog.guide;
    Block model;
    auto append = [&](const std::optional<Block>& b) {
        if (!b) return;
        model.decls.insert(model.decls.end(), b->decls.begin(), b->decls.end());
        model.stmts.insert(model.stmts.end(), b->stmts.begin(), b->stmts.end());
    };
    append(prog.transformed_data);
    append(prog.transformed_parameters);
    append(prog.model);
    append(prog.generated_quantities);
    out.model = std::move(model);
    IdAssigner().run(out);
    return out;
}

// A deterministic function extracted from a pre/post-processing block.
struct PhaseFn {
    std::vector<Decl> inputs;
    Block body;
    std::vector<std::string> outputs;
};

struct PhaseSplit {
    std::optional<PhaseFn> transformed_data;  // data -> new inputs
    StanProgram kernel;                       // data (+ td outputs) / params / model+tp
    std::optional<PhaseFn> generated_quantities;  // data + td + params -> outputs
};

inline PhaseSplit split_phases(const StanProgram& prog) {
    PhaseSplit out;
    std::vector<Decl> data_decls = prog.data ? prog.data->decls : std::vector<Decl>{};

    if (prog.transformed_data && (!prog.transformed_data->decls.empty() ||
                                  !prog.transformed_data->stmts.empty())) {
        PhaseFn td;
        td.inputs = data_decls;
        td.body = *prog.transformed_data;
        for (const auto& d : prog.transformed_data->decls) td.outputs.push_back(d.name);
        out.transformed_data = std::move(td);
    }

    StanProgram kernel;
    kernel.networks = prog.networks;
    kernel.guide_parameters = prog.guide_parameters;
    kernel.guide = prog.guide;
    Block data;
    data.decls = data_decls;
    if (prog.transformed_data)
        data.decls.insert(data.decls.end(), prog.transformed_data->decls.begin(),
                          prog.transformed_data->decls.end());
    kernel.data = std::move(data);
    kernel.parameters = prog.parameters;
    Block model;
    auto append = [&](const std::optional<Block>& b) {
        if (!b) return;
        model.decls.insert(model.decls.end(), b->decls.begin(), b->decls.end());
        model.stmts.insert(model.stmts.end(), b->stmts.begin(), b->stmts.end());
    };
    append(prog.transformed_parameters);
    append(prog.model);
    kernel.model = std::move(model);
    IdAssigner().run(kernel);
    out.kernel = std::move(kernel);

    if (prog.generated_quantities && (!prog.generated_quantities->decls.empty() ||
                                      !prog.generated_quantities->stmts.empty())) {
        PhaseFn gq;
        gq.inputs = data_decls;
        if (prog.transformed_data)
            gq.inputs.insert(gq.inputs.end(), prog.transformed_data->decls.begin(),
                             prog.transformed_data->decls.end());
        if (prog.parameters)
            gq.inputs.insert(gq.inputs.end(), prog.parameters->decls.begin(),
                             prog.parameters->decls.end());
        // transformed parameters are re-run inside the post-processing step
        if (prog.transformed_parameters) {
            gq.body.decls = prog.transformed_parameters->decls;
            gq.body.stmts = prog.transformed_parameters->stmts;
        }
        gq.body.decls.insert(gq.body.decls.end(), prog.generated_quantities->decls.begin(),
                             prog.generated_quantities->decls.end());
        gq.body.stmts.insert(gq.body.stmts.end(), prog.generated_quantities->stmts.begin(),
                             prog.generated_quantities->stmts.end());
        for (const auto& d : prog.generated_quantities->decls) gq.outputs.push_back(d.name);
        out.generated_quantities = std::move(gq);
    }
    return out;
}

}  // namespace stangen
