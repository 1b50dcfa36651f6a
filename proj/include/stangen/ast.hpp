#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "stangen/diagnostics.hpp"

namespace stangen {

// Heap-allocated box with value semantics, for recursive variant nodes.
template <class T>
class Box {
public:
    Box(T value) : ptr_(std::make_unique<T>(std::move(value))) {}
    Box(const Box& o) : ptr_(std::make_unique<T>(*o.ptr_)) {}
    Box(Box&&) noexcept = default;
    Box& operator=(const Box& o) {
        ptr_ = std::make_unique<T>(*o.ptr_);
        return *this;
    }
    Box& operator=(Box&&) noexcept = default;

    T& operator*() { return *ptr_; }
    const T& operator*() const { return *ptr_; }
    T* operator->() { return ptr_.get(); }
    const T* operator->() const { return ptr_.get(); }

private:
    std::unique_ptr<T> ptr_;
};

// ---------------------------------------------------------------------------
// Expressions

struct Expr;

struct IntLit {
    long long value = 0;
};
struct RealLit {
    double value = 0.0;
};
struct VarRef {
    std::string name;
};
struct ArrayLit {
    std::vector<Expr> elems;
};
struct VectorLit {
    std::vector<Expr> elems;
};
struct MatrixLit {
    std::vector<std::vector<Expr>> rows;
};
struct IndexExpr {
    Box<Expr> target;
    std::vector<Expr> indices;
};
// Function application; infix operators are desugared to calls whose name is
// the operator spelling ("+", "==", ...).
struct CallExpr {
    std::string fn;
    std::vector<Expr> args;
};

struct Expr {
    std::variant<IntLit, RealLit, VarRef, ArrayLit, VectorLit, MatrixLit, IndexExpr, CallExpr>
        node;
    uint32_t id = 0;
    SourceSpan span;

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

inline Expr make_expr(auto node, SourceSpan span = {}) {
    Expr e{std::move(node), 0, span};
    return e;
}

inline Expr int_lit(long long v) { return make_expr(IntLit{v}); }
inline Expr real_lit(double v) { return make_expr(RealLit{v}); }
inline Expr var_ref(std::string name) { return make_expr(VarRef{std::move(name)}); }
inline Expr call(std::string fn, std::vector<Expr> args) {
    return make_expr(CallExpr{std::move(fn), std::move(args)});
}
inline Expr index_expr(Expr target, std::vector<Expr> indices) {
    return make_expr(IndexExpr{Box<Expr>(std::move(target)), std::move(indices)});
}

// ---------------------------------------------------------------------------
// Statements

struct Stmt;

struct LValue {
    std::string name;
    std::vector<Expr> indices;  // empty for a plain variable
    SourceSpan span;
};

struct AssignStmt {
    LValue lhs;
    Expr value;
};
struct ForRangeStmt {
    std::string var;
    Expr lo;
    Expr hi;
    std::vector<Stmt> body;
};
struct ForEachStmt {
    std::string var;
    Expr container;
    std::vector<Stmt> body;
};
struct WhileStmt {
    Expr cond;
    std::vector<Stmt> body;
};
struct IfStmt {
    Expr cond;
    std::vector<Stmt> then_body;
    std::vector<Stmt> else_body;
};
struct SkipStmt {};
struct TargetPlusStmt {
    Expr amount;
};
// `e ~ dist(args)`; the left side is an arbitrary expression.
struct TildeStmt {
    Expr observed;
    std::string dist;
    std::vector<Expr> args;
};
// Only valid inside function bodies.
struct ReturnStmt {
    std::optional<Expr> value;
};

struct Stmt {
    std::variant<AssignStmt, ForRangeStmt, ForEachStmt, WhileStmt, IfStmt, SkipStmt,
                 TargetPlusStmt, TildeStmt, ReturnStmt>
        node;
    uint32_t id = 0;
    SourceSpan span;

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

inline Stmt make_stmt(auto node, SourceSpan span = {}) {
    Stmt s{std::move(node), 0, span};
    return s;
}

// ---------------------------------------------------------------------------
// Declarations and blocks

enum class BaseTypeKind { Int, Real, Vector, RowVector, Matrix };

struct SizeSpec {
    bool wildcard = false;        // `_`
    std::optional<Expr> expr;     // set when !wildcard
};

struct BaseType {
    BaseTypeKind kind = BaseTypeKind::Real;
    std::optional<SizeSpec> rows;  // vector/row_vector/matrix
    std::optional<SizeSpec> cols;  // matrix
};

struct ArrayShape {
    enum class Kind { None, Sizes, AnyDims };  // AnyDims is the `*` form
    Kind kind = Kind::None;
    std::vector<SizeSpec> sizes;  // for Kind::Sizes
};

struct DeclConstraint {
    std::optional<Expr> lower;
    std::optional<Expr> upper;
    bool any() const { return lower.has_value() || upper.has_value(); }
};

struct Decl {
    BaseType type;
    DeclConstraint constraint;
    std::string name;  // may be dotted for network parameters
    ArrayShape shape;
    uint32_t id = 0;
    SourceSpan span;
};

struct Block {
    std::vector<Decl> decls;
    std::vector<Stmt> stmts;
};

struct NetworkDecl {
    std::string class_name;
    std::string name;
    SourceSpan span;
};

struct FunParam {
    BaseTypeKind base = BaseTypeKind::Real;
    int array_dims = 0;  // `real[]` style unsized dims
    std::string name;
};

struct FunDecl {
    BaseTypeKind return_base = BaseTypeKind::Real;
    int return_array_dims = 0;
    std::string name;
    std::vector<FunParam> params;
    Block body;
    SourceSpan span;
};

enum class BlockKind {
    Functions,
    Networks,
    Data,
    TransformedData,
    Parameters,
    TransformedParameters,
    Model,
    GeneratedQuantities,
    GuideParameters,
    Guide,
};

inline const char* block_name(BlockKind k) {
    switch (k) {
        case BlockKind::Functions: return "functions";
        case BlockKind::Networks: return "networks";
        case BlockKind::Data: return "data";
        case BlockKind::TransformedData: return "transformed data";
        case BlockKind::Parameters: return "parameters";
        case BlockKind::TransformedParameters: return "transformed parameters";
        case BlockKind::Model: return "model";
        case BlockKind::GeneratedQuantities: return "generated quantities";
        case BlockKind::GuideParameters: return "guide parameters";
        case BlockKind::Guide: return "guide";
    }
    return "?";
}

struct StanProgram {
    std::vector<FunDecl> functions;
    std::vector<NetworkDecl> networks;
    std::optional<Block> data;
    std::optional<Block> transformed_data;
    std::optional<Block> parameters;
    std::optional<Block> transformed_parameters;
    std::optional<Block> model;
    std::optional<Block> generated_quantities;
    std::optional<Block> guide_parameters;
    std::optional<Block> guide;

    bool kernel_form() const {
        return functions.empty() && !transformed_data && !transformed_parameters &&
               !generated_quantities;
    }
};

// ---------------------------------------------------------------------------
// Structural equality, ignoring node ids and source spans.

bool structural_equal(const Expr& a, const Expr& b);
bool structural_equal(const Stmt& a, const Stmt& b);

inline bool structural_equal(const std::vector<Expr>& a, const std::vector<Expr>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (!structural_equal(a[i], b[i])) return false;
    return true;
}

inline bool structural_equal(const std::vector<Stmt>& a, const std::vector<Stmt>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (!structural_equal(a[i], b[i])) return false;
    return true;
}

inline bool structural_equal(const Expr& a, const Expr& b) {
    if (a.node.index() != b.node.index()) return false;
    struct Vis {
        const Expr& rhs;
        bool operator()(const IntLit& x) const { return x.value == rhs.as<IntLit>()->value; }
        bool operator()(const RealLit& x) const { return x.value == rhs.as<RealLit>()->value; }
        bool operator()(const VarRef& x) const { return x.name == rhs.as<VarRef>()->name; }
        bool operator()(const ArrayLit& x) const {
            return structural_equal(x.elems, rhs.as<ArrayLit>()->elems);
        }
        bool operator()(const VectorLit& x) const {
            return structural_equal(x.elems, rhs.as<VectorLit>()->elems);
        }
        bool operator()(const MatrixLit& x) const {
            const auto& y = *rhs.as<MatrixLit>();
            if (x.rows.size() != y.rows.size()) return false;
            for (size_t i = 0; i < x.rows.size(); ++i)
                if (!structural_equal(x.rows[i], y.rows[i])) return false;
            return true;
        }
        bool operator()(const IndexExpr& x) const {
            const auto& y = *rhs.as<IndexExpr>();
            return structural_equal(*x.target, *y.target) &&
                   structural_equal(x.indices, y.indices);
        }
        bool operator()(const CallExpr& x) const {
            const auto& y = *rhs.as<CallExpr>();
            return x.fn == y.fn && structural_equal(x.args, y.args);
        }
    };
    return std::visit(Vis{b}, a.node);
}

inline bool structural_equal(const LValue& a, const LValue& b) {
    return a.name == b.name && structural_equal(a.indices, b.indices);
}

inline bool structural_equal(const Stmt& a, const Stmt& b) {
    if (a.node.index() != b.node.index()) return false;
    struct Vis {
        const Stmt& rhs;
        bool operator()(const AssignStmt& x) const {
            const auto& y = *rhs.as<AssignStmt>();
            return structural_equal(x.lhs, y.lhs) && structural_equal(x.value, y.value);
        }
        bool operator()(const ForRangeStmt& x) const {
            const auto& y = *rhs.as<ForRangeStmt>();
            return x.var == y.var && structural_equal(x.lo, y.lo) &&
                   structural_equal(x.hi, y.hi) && structural_equal(x.body, y.body);
        }
        bool operator()(const ForEachStmt& x) const {
            const auto& y = *rhs.as<ForEachStmt>();
            return x.var == y.var && structural_equal(x.container, y.container) &&
                   structural_equal(x.body, y.body);
        }
        bool operator()(const WhileStmt& x) const {
            const auto& y = *rhs.as<WhileStmt>();
            return structural_equal(x.cond, y.cond) && structural_equal(x.body, y.body);
        }
        bool operator()(const IfStmt& x) const {
            const auto& y = *rhs.as<IfStmt>();
            return structural_equal(x.cond, y.cond) &&
                   structural_equal(x.then_body, y.then_body) &&
                   structural_equal(x.else_body, y.else_body);
        }
        bool operator()(const SkipStmt&) const { return true; }
        bool operator()(const TargetPlusStmt& x) const {
            return structural_equal(x.amount, rhs.as<TargetPlusStmt>()->amount);
        }
        bool operator()(const TildeStmt& x) const {
            const auto& y = *rhs.as<TildeStmt>();
            return x.dist == y.dist && structural_equal(x.observed, y.observed) &&
                   structural_equal(x.args, y.args);
        }
        bool operator()(const ReturnStmt& x) const {
            const auto& y = *rhs.as<ReturnStmt>();
            if (x.value.has_value() != y.value.has_value()) return false;
            return !x.value || structural_equal(*x.value, *y.value);
        }
    };
    return std::visit(Vis{b}, a.node);
}

// Assigns fresh consecutive ids to every Expr/Stmt/Decl node in the program.
// Run after any transform that copies subtrees so ids stay unique.
class IdAssigner {
public:
    void run(StanProgram& p) {
        for (auto& f : p.functions) visit_block(f.body);
        for (auto* b : {&p.data, &p.transformed_data, &p.parameters, &p.transformed_parameters,
                        &p.model, &p.generated_quantities, &p.guide_parameters, &p.guide})
            if (*b) visit_block(**b);
    }

    uint32_t next_id() { return ++counter_; }

private:
    uint32_t counter_ = 0;

    void visit_block(Block& b) {
        for (auto& d : b.decls) visit_decl(d);
        for (auto& s : b.stmts) visit_stmt(s);
    }

    void visit_decl(Decl& d) {
        d.id = next_id();
        if (d.type.rows && d.type.rows->expr) visit_expr(*d.type.rows->expr);
        if (d.type.cols && d.type.cols->expr) visit_expr(*d.type.cols->expr);
        if (d.constraint.lower) visit_expr(*d.constraint.lower);
        if (d.constraint.upper) visit_expr(*d.constraint.upper);
        for (auto& s : d.shape.sizes)
            if (s.expr) visit_expr(*s.expr);
    }

    void visit_stmt(Stmt& s) {
        s.id = next_id();
        std::visit(
            [&](auto& node) {
                using T = std::decay_t<decltype(node)>;
                if constexpr (std::is_same_v<T, AssignStmt>) {
                    for (auto& e : node.lhs.indices) visit_expr(e);
                    visit_expr(node.value);
                } else if constexpr (std::is_same_v<T, ForRangeStmt>) {
                    visit_expr(node.lo);
                    visit_expr(node.hi);
                    for (auto& st : node.body) visit_stmt(st);
                } else if constexpr (std::is_same_v<T, ForEachStmt>) {
                    visit_expr(node.container);
                    for (auto& st : node.body) visit_stmt(st);
                } else if constexpr (std::is_same_v<T, WhileStmt>) {
                    visit_expr(node.cond);
                    for (auto& st : node.body) visit_stmt(st);
                } else if constexpr (std::is_same_v<T, IfStmt>) {
                    visit_expr(node.cond);
                    for (auto& st : node.then_body) visit_stmt(st);
                    for (auto& st : node.else_body) visit_stmt(st);
                } else if constexpr (std::is_same_v<T, TargetPlusStmt>) {
                    visit_expr(node.amount);
                } else if constexpr (std::is_same_v<T, TildeStmt>) {
                    visit_expr(node.observed);
                    for (auto& e : node.args) visit_expr(e);
                } else if constexpr (std::is_same_v<T, ReturnStmt>) {
                    if (node.value) visit_expr(*node.value);
                }
            },
            s.node);
    }

    void visit_expr(Expr& e) {
        e.id = next_id();
        std::visit(
            [&](auto& node) {
                using T = std::decay_t<decltype(node)>;
                if constexpr (std::is_same_v<T, ArrayLit> || std::is_same_v<T, VectorLit>) {
                    for (auto& x : node.elems) visit_expr(x);
                } else if constexpr (std::is_same_v<T, MatrixLit>) {
                    for (auto& row : node.rows)
                        for (auto& x : row) visit_expr(x);
                } else if constexpr (std::is_same_v<T, IndexExpr>) {
                    visit_expr(*node.target);
                    for (auto& x : node.indices) visit_expr(x);
                } else if constexpr (std::is_same_v<T, CallExpr>) {
                    for (auto& x : node.args) visit_expr(x);
                }
            },
            e.node);
    }
};

}  // namespace stangen
