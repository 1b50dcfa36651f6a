#pragma once

#include <sstream>
#include <string>

#include "stangen/ast.hpp"
#include "stangen/numfmt.hpp"

namespace stangen {

namespace detail {

inline int operator_precedence(const std::string& fn, size_t arity) {
    if (arity == 1 && (fn == "-" || fn == "!")) return 7;
    if (fn == "^") return 8;
    if (fn == "*" || fn == "/") return 6;
    if (fn == "+" || fn == "-") return 5;
    if (fn == "<" || fn == "<=" || fn == ">" || fn == ">=") return 4;
    if (fn == "==" || fn == "!=") return 3;
    if (fn == "&&") return 2;
    if (fn == "||") return 1;
    return -1;  // not an operator
}

}  // namespace detail

// Prints an expression, re-sugaring the operator calls produced by the
// parser.  Output is canonical: it reparses to a structurally identical tree.
inline void print_expr(std::ostream& os, const Expr& e, int parent_prec = 0) {
    struct Vis {
        std::ostream& os;
        int parent_prec;
        void operator()(const IntLit& x) const { os << x.value; }
        void operator()(const RealLit& x) const { os << format_double(x.value); }
        void operator()(const VarRef& x) const { os << x.name; }
        void operator()(const ArrayLit& x) const {
            os << '{';
            for (size_t i = 0; i < x.elems.size(); ++i) {
                if (i) os << ", ";
                print_expr(os, x.elems[i]);
            }
            os << '}';
        }
        void operator()(const VectorLit& x) const {
            os << '[';
            for (size_t i = 0; i < x.elems.size(); ++i) {
                if (i) os << ", ";
                print_expr(os, x.elems[i]);
            }
            os << ']';
        }
        void operator()(const MatrixLit& x) const {
            os << '[';
            for (size_t i = 0; i < x.rows.size(); ++i) {
                if (i) os << ", ";
                os << '[';
                for (size_t j = 0; j < x.rows[i].size(); ++j) {
                    if (j) os << ", ";
                    print_expr(os, x.rows[i][j]);
                }
                os << ']';
            }
            os << ']';
        }
        void operator()(const IndexExpr& x) const {
            print_expr(os, *x.target, 9);
            os << '[';
            for (size_t i = 0; i < x.indices.size(); ++i) {
                if (i) os << ", ";
                print_expr(os, x.indices[i]);
            }
            os << ']';
        }
        void operator()(const CallExpr& x) const {
            int prec = detail::operator_precedence(x.fn, x.args.size());
            if (prec < 0) {
                os << x.fn << '(';
                for (size_t i = 0; i < x.args.size(); ++i) {
                    if (i) os << ", ";
                    print_expr(os, x.args[i]);
                }
                os << ')';
                return;
            }
            bool parens = prec < parent_prec;
            if (x.args.size() == 1) {
                if (parens) os << '(';
                os << x.fn;
                // a leading '-' on the operand would fuse with a negated
                // literal on reparse
                std::ostringstream inner;
                print_expr(inner, x.args[0], prec);
                std::string text = inner.str();
                if (x.fn == "-" && !text.empty() && text[0] == '-') {
                    os << '(' << text << ')';
                } else {
                    os << text;
                }
                if (parens) os << ')';
                return;
            }
            // '^' is right-associative; the other binary operators associate
            // to the left
            bool right_assoc = prec == 8;
            if (parens) os << '(';
            print_expr(os, x.args[0], right_assoc ? prec + 1 : prec);
            os << ' ' << x.fn << ' ';
            print_expr(os, x.args[1], right_assoc ? prec : prec + 1);
            if (parens) os << ')';
        }
    };
    std::visit(Vis{os, parent_prec}, e.node);
}

inline std::string expr_to_string(const Expr& e) {
    std::ostringstream os;
    print_expr(os, e);
    return os.str();
}

inline void print_size(std::ostream& os, const SizeSpec& s) {
    if (s.wildcard) {
        os << '_';
    } else {
        print_expr(os, *s.expr);
    }
}

inline void print_decl(std::ostream& os, const Decl& d) {
    switch (d.type.kind) {
        case BaseTypeKind::Int: os << "int"; break;
        case BaseTypeKind::Real: os << "real"; break;
        case BaseTypeKind::Vector: os << "vector"; break;
        case BaseTypeKind::RowVector: os << "row_vector"; break;
        case BaseTypeKind::Matrix: os << "matrix"; break;
    }
    if (d.constraint.any()) {
        os << '<';
        if (d.constraint.lower) {
            os << "lower=";
            print_expr(os, *d.constraint.lower);
        }
        if (d.constraint.upper) {
            if (d.constraint.lower) os << ", ";
            os << "upper=";
            print_expr(os, *d.constraint.upper);
        }
        os << '>';
    }
    if (d.type.kind == BaseTypeKind::Vector || d.type.kind == BaseTypeKind::RowVector) {
        os << '[';
        print_size(os, *d.type.rows);
        os << ']';
    } else if (d.type.kind == BaseTypeKind::Matrix) {
        os << '[';
        print_size(os, *d.type.rows);
        os << ", ";
        print_size(os, *d.type.cols);
        os << ']';
    }
    os << ' ' << d.name;
    if (d.shape.kind == ArrayShape::Kind::AnyDims) {
        os << "[*]";
    } else if (d.shape.kind == ArrayShape::Kind::Sizes) {
        os << '[';
        for (size_t i = 0; i < d.shape.sizes.size(); ++i) {
            if (i) os << ", ";
            print_size(os, d.shape.sizes[i]);
        }
        os << ']';
    }
    os << ";";
}

inline void print_stmt(std::ostream& os, const Stmt& s, int indent);

inline void print_body(std::ostream& os, const std::vector<Stmt>& body, int indent) {
    os << "{\n";
    for (const auto& s : body) print_stmt(os, s, indent + 2);
    os << std::string(indent, ' ') << "}\n";
}

inline void print_stmt(std::ostream& os, const Stmt& s, int indent) {
    std::string pad(indent, ' ');
    struct Vis {
        std::ostream& os;
        int indent;
        const std::string& pad;
        void operator()(const AssignStmt& x) const {
            os << pad << x.lhs.name;
            if (!x.lhs.indices.empty()) {
                os << '[';
                for (size_t i = 0; i < x.lhs.indices.size(); ++i) {
                    if (i) os << ", ";
                    print_expr(os, x.lhs.indices[i]);
                }
                os << ']';
            }
            os << " = ";
            print_expr(os, x.value);
            os << ";\n";
        }
        void operator()(const ForRangeStmt& x) const {
            os << pad << "for (" << x.var << " in ";
            print_expr(os, x.lo);
            os << ":";
            print_expr(os, x.hi);
            os << ") ";
            print_body(os, x.body, indent);
        }
        void operator()(const ForEachStmt& x) const {
            os << pad << "for (" << x.var << " in ";
            print_expr(os, x.container);
            os << ") ";
            print_body(os, x.body, indent);
        }
        void operator()(const WhileStmt& x) const {
            os << pad << "while (";
            print_expr(os, x.cond);
            os << ") ";
            print_body(os, x.body, indent);
        }
        void operator()(const IfStmt& x) const {
            os << pad << "if (";
            print_expr(os, x.cond);
            os << ") ";
            print_body(os, x.then_body, indent);
            if (!x.else_body.empty()) {
                os << pad << "else ";
                print_body(os, x.else_body, indent);
            }
        }
        void operator()(const SkipStmt&) const { os << pad << ";\n"; }
        void operator()(const TargetPlusStmt& x) const {
            os << pad << "target += ";
            print_expr(os, x.amount);
            os << ";\n";
        }
        void operator()(const TildeStmt& x) const {
            os << pad;
            print_expr(os, x.observed);
            os << " ~ " << x.dist << '(';
            for (size_t i = 0; i < x.args.size(); ++i) {
                if (i) os << ", ";
                print_expr(os, x.args[i]);
            }
            os << ");\n";
        }
        void operator()(const ReturnStmt& x) const {
            os << pad << "return";
            if (x.value) {
                os << ' ';
                print_expr(os, *x.value);
            }
            os << ";\n";
        }
    };
    std::visit(Vis{os, indent, pad}, s.node);
}

inline void print_block(std::ostream& os, const char* name, const Block& b) {
    os << name << " {\n";
    for (const auto& d : b.decls) {
        os << "  ";
        print_decl(os, d);
        os << '\n';
    }
    for (const auto& s : b.stmts) print_stmt(os, s, 2);
    os << "}\n";
}

inline std::string program_to_string(const StanProgram& p) {
    std::ostringstream os;
    if (!p.functions.empty()) {
        os << "functions {\n";
        for (const auto& f : p.functions) {
            os << "  ";
            switch (f.return_base) {
                case BaseTypeKind::Int: os << "int"; break;
                case BaseTypeKind::Real: os << "real"; break;
                case BaseTypeKind::Vector: os << "vector"; break;
                case BaseTypeKind::RowVector: os << "row_vector"; break;
                case BaseTypeKind::Matrix: os << "matrix"; break;
            }
            if (f.return_array_dims > 0) {
                os << '[';
                for (int i = 1; i < f.return_array_dims; ++i) os << ',';
                os << ']';
            }
            os << ' ' << f.name << '(';
            for (size_t i = 0; i < f.params.size(); ++i) {
                if (i) os << ", ";
                const auto& prm = f.params[i];
                switch (prm.base) {
                    case BaseTypeKind::Int: os << "int"; break;
                    case BaseTypeKind::Real: os << "real"; break;
                    case BaseTypeKind::Vector: os << "vector"; break;
                    case BaseTypeKind::RowVector: os << "row_vector"; break;
                    case BaseTypeKind::Matrix: os << "matrix"; break;
                }
                if (prm.array_dims > 0) {
                    os << '[';
                    for (int j = 1; j < prm.array_dims; ++j) os << ',';
                    os << ']';
                }
                os << ' ' << prm.name;
            }
            os << ") {\n";
            for (const auto& d : f.body.decls) {
                os << "    ";
                print_decl(os, d);
                os << '\n';
            }
            for (const auto& s : f.body.stmts) print_stmt(os, s, 4);
            os << "  }\n";
        }
        os << "}\n";
    }
    if (!p.networks.empty()) {
        os << "networks {\n";
        for (const auto& n : p.networks) os << "  " << n.class_name << ' ' << n.name << ";\n";
        os << "}\n";
    }
    if (p.data) print_block(os, "data", *p.data);
    if (p.transformed_data) print_block(os, "transformed data", *p.transformed_data);
    if (p.parameters) print_block(os, "parameters", *p.parameters);
    if (p.transformed_parameters)
        print_block(os, "transformed parameters", *p.transformed_parameters);
    if (p.model) print_block(os, "model", *p.model);
    if (p.generated_quantities) print_block(os, "generated quantities", *p.generated_quantities);
    if (p.guide_parameters) print_block(os, "guide parameters", *p.guide_parameters);
    if (p.guide) print_block(os, "guide", *p.guide);
    return os.str();
}

}  // namespace stangen
