#pragma once

#include <set>
#include <string>

#include "stangen/ast.hpp"
#include "stangen/ast_walk.hpp"
#include "stangen/diagnostics.hpp"

namespace stangen {

// Guide restrictions: the guide must sample every model parameter, must not
// update target, and every tilde left side must be a plain parameter.
inline void validate_guide(const StanProgram& prog, Diagnostics& diags) {
    if (!prog.guide) return;
    std::set<std::string> params;
    if (prog.parameters)
        for (const auto& d : prog.parameters->decls) params.insert(d.name);

    std::set<std::string> sampled;
    detail::walk_stmts(prog.guide->stmts, [&](const Stmt& s) {
        if (s.is<TargetPlusStmt>()) {
            diags.error("guide-target-update", "the guide must not update target", s.span);
        } else if (const auto* t = s.as<TildeStmt>()) {
            const auto* v = t->observed.as<VarRef>();
            if (v && params.count(v->name)) {
                sampled.insert(v->name);
            } else {
                diags.error("guide-nongenerative",
                            "guide sampling statements must draw a model parameter",
                            s.span);
            }
        }
    });
    for (const auto& p : params) {
        if (!sampled.count(p))
            diags.error("guide-missing-parameter",
                        "guide does not sample model parameter '" + p + "'");
    }
}

// Structural checks beyond the grammar. Name resolution and typing errors are
// reported later by the type checker on the kernelized program.
inline void validate_program(const StanProgram& prog, Diagnostics& diags) {
    std::set<std::string> networks;
    for (const auto& n : prog.networks) networks.insert(n.name);

    auto check_decls = [&](const Block& b, bool star_ok, bool is_params, const char* where) {
        for (const auto& d : b.decls) {
            if (d.shape.kind == ArrayShape::Kind::AnyDims && !star_ok)
                diags.error("unsupported-feature",
                            "'[*]' shapes are only allowed for parameters and local "
                            "declarations",
                            d.span);
            bool dotted = d.name.find('.') != std::string::npos;
            if (dotted) {
                if (!is_params) {
                    diags.error("unsupported-feature",
                                "dotted names may only be declared in the parameters block",
                                d.span);
                } else {
                    std::string root = d.name.substr(0, d.name.find('.'));
                    if (!networks.count(root))
                        diags.error("unknown-identifier",
                                    "network parameter '" + d.name +
                                        "' does not match a declared network",
                                    d.span);
                }
            }
            if (is_params && d.type.kind == BaseTypeKind::Int)
                diags.error("int-parameter",
                            "parameters must be continuous (int parameter '" + d.name + "')",
                            d.span);
            (void)where;
        }
    };

    if (prog.data) check_decls(*prog.data, false, false, "data");
    if (prog.transformed_data) check_decls(*prog.transformed_data, false, false, "td");
    if (prog.parameters) check_decls(*prog.parameters, true, true, "parameters");
    if (prog.transformed_parameters)
        check_decls(*prog.transformed_parameters, false, false, "tp");
    if (prog.model) check_decls(*prog.model, true, false, "model");
    if (prog.generated_quantities)
        check_decls(*prog.generated_quantities, false, false, "gq");
    if (prog.guide_parameters) check_decls(*prog.guide_parameters, true, false, "guide params");
    if (prog.guide) check_decls(*prog.guide, true, false, "guide");

    // tilde / target are meaningful only where they contribute to the density:
    // model, guide, and function bodies (inlined into the model later).
    auto forbid_density_stmts = [&](const Block& b, const char* where) {
        detail::walk_stmts(b.stmts, [&](const Stmt& s) {
            if (s.is<TildeStmt>() || s.is<TargetPlusStmt>())
                diags.error("unsupported-feature",
                            std::string("sampling/target statements are not allowed in ") +
                                where,
                            s.span);
        });
    };
    if (prog.transformed_data) forbid_density_stmts(*prog.transformed_data, "transformed data");
    if (prog.generated_quantities)
        forbid_density_stmts(*prog.generated_quantities, "generated quantities");

    // return statements only inside function bodies
    auto forbid_return = [&](const Block& b) {
        detail::walk_stmts(b.stmts, [&](const Stmt& s) {
            if (s.is<ReturnStmt>())
                diags.error("parse-error", "return is only allowed in function bodies", s.span);
        });
    };
    for (const auto* b : {&prog.transformed_data, &prog.transformed_parameters, &prog.model,
                          &prog.generated_quantities, &prog.guide})
        if (*b) forbid_return(**b);

    // reject _rng / _lpdf suffix conventions
    auto check_calls = [&](const Block& b) {
        detail::walk_stmt_exprs(b.stmts, [&](const Expr& e) {
            if (const auto* c = e.as<CallExpr>()) {
                auto ends_with = [&](const char* suf) {
                    std::string_view s = c->fn;
                    std::string_view sv = suf;
                    return s.size() >= sv.size() && s.substr(s.size() - sv.size()) == sv;
                };
                if (ends_with("_rng") || ends_with("_lpdf") || ends_with("_lpmf"))
                    diags.error("unsupported-feature",
                                "'" + c->fn + "' style calls are unsupported", e.span);
            }
        });
    };
    for (const auto* b : {&prog.transformed_data, &prog.transformed_parameters, &prog.model,
                          &prog.generated_quantities, &prog.guide})
        if (*b) check_calls(**b);

    // constraint bounds may only mention previously declared names
    std::set<std::string> declared = networks;
    auto check_bounds = [&](const Block& b) {
        for (const auto& d : b.decls) {
            for (const auto* bound : {&d.constraint.lower, &d.constraint.upper}) {
                if (!*bound) continue;
                detail::walk_exprs(**bound, [&](const Expr& e) {
                    if (const auto* v = e.as<VarRef>()) {
                        if (!declared.count(v->name))
                            diags.error("unknown-identifier",
                                        "constraint bound references '" + v->name +
                                            "' before its declaration",
                                        e.span);
                    }
                });
            }
            declared.insert(d.name);
        }
    };
    for (const auto* b :
         {&prog.data, &prog.transformed_data, &prog.parameters, &prog.transformed_parameters,
          &prog.model, &prog.generated_quantities, &prog.guide_parameters, &prog.guide})
        if (*b) check_bounds(**b);

    validate_guide(prog, diags);
}

}  // namespace stangen
