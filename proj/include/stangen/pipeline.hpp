#pragma once

#include <optional>
#include <string>

#include "stangen/normalize.hpp"
#include "stangen/parser.hpp"
#include "stangen/translate.hpp"
#include "stangen/typecheck.hpp"
#include "stangen/validate.hpp"

namespace stangen {

struct Compiled {
    StanProgram kernel;   // data / parameters / model, plus networks and guide
    PhaseSplit phases;    // pre/post-processing split for emission
    TypeInfo types;
    GExpr model;
    std::optional<GExpr> guide;
};

// Front-to-back compilation: parse, validate, inline, kernelize, resolve
// shapes, translate.  Returns nothing if any stage reported errors.
inline std::optional<Compiled> compile_source(std::string_view source, Diagnostics& diags) {
    auto prog = parse_program(source, diags);
    if (!prog) return std::nullopt;
    validate_program(*prog, diags);
    if (diags.has_errors()) return std::nullopt;
    if (!inline_functions(*prog, diags)) return std::nullopt;

    Compiled out;
    out.phases = split_phases(*prog);
    out.kernel = kernelize(*prog);
    auto types = resolve_program(out.kernel, diags);
    if (!types) return std::nullopt;
    out.types = std::move(*types);
    try {
        out.model = compile_program(out.kernel, out.types);
        out.guide = compile_guide(out.kernel, out.types);
    } catch (const TranslateError& e) {
        diags.error("unresolved-shape", e.what());
        return std::nullopt;
    }
    return out;
}

}  // namespace stangen
