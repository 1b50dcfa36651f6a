#pragma once

#include <functional>

#include "stangen/ast.hpp"

namespace stangen::detail {

inline void walk_exprs(const Expr& e, const std::function<void(const Expr&)>& fn) {
    fn(e);
    std::visit(
        [&](const auto& node) {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, ArrayLit> || std::is_same_v<T, VectorLit>) {
                for (const auto& x : node.elems) walk_exprs(x, fn);
            } else if constexpr (std::is_same_v<T, MatrixLit>) {
                for (const auto& row : node.rows)
                    for (const auto& x : row) walk_exprs(x, fn);
            } else if constexpr (std::is_same_v<T, IndexExpr>) {
                walk_exprs(*node.target, fn);
                for (const auto& x : node.indices) walk_exprs(x, fn);
            } else if constexpr (std::is_same_v<T, CallExpr>) {
                for (const auto& x : node.args) walk_exprs(x, fn);
            }
        },
        e.node);
}

inline void walk_stmts(const std::vector<Stmt>& stmts,
                       const std::function<void(const Stmt&)>& fn) {
    for (const auto& s : stmts) {
        fn(s);
        std::visit(
            [&](const auto& node) {
                using T = std::decay_t<decltype(node)>;
                if constexpr (std::is_same_v<T, ForRangeStmt> || std::is_same_v<T, ForEachStmt> ||
                              std::is_same_v<T, WhileStmt>) {
                    walk_stmts(node.body, fn);
                } else if constexpr (std::is_same_v<T, IfStmt>) {
                    walk_stmts(node.then_body, fn);
                    walk_stmts(node.else_body, fn);
                }
            },
            s.node);
    }
}

inline void walk_stmts(const Stmt& s, const std::function<void(const Stmt&)>& fn) {
    std::vector<Stmt> one;
    one.push_back(s);
    walk_stmts(one, fn);
}

inline void walk_stmt_exprs(const std::vector<Stmt>& stmts,
                            const std::function<void(const Expr&)>& fn) {
    walk_stmts(stmts, [&](const Stmt& s) {
        std::visit(
            [&](const auto& node) {
                using T = std::decay_t<decltype(node)>;
                if constexpr (std::is_same_v<T, AssignStmt>) {
                    for (const auto& e : node.lhs.indices) walk_exprs(e, fn);
                    walk_exprs(node.value, fn);
                } else if constexpr (std::is_same_v<T, ForRangeStmt>) {
                    walk_exprs(node.lo, fn);
                    walk_exprs(node.hi, fn);
                } else if constexpr (std::is_same_v<T, ForEachStmt>) {
                    walk_exprs(node.container, fn);
                } else if constexpr (std::is_same_v<T, WhileStmt>) {
                    walk_exprs(node.cond, fn);
                } else if constexpr (std::is_same_v<T, IfStmt>) {
                    walk_exprs(node.cond, fn);
                } else if constexpr (std::is_same_v<T, TargetPlusStmt>) {
                    walk_exprs(node.amount, fn);
                } else if constexpr (std::is_same_v<T, TildeStmt>) {
                    walk_exprs(node.observed, fn);
                    for (const auto& e : node.args) walk_exprs(e, fn);
                } else if constexpr (std::is_same_v<T, ReturnStmt>) {
                    if (node.value) walk_exprs(*node.value, fn);
                }
            },
            s.node);
    });
}

}  // namespace stangen::detail
