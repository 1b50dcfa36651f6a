#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "stangen/ast.hpp"
#include "stangen/diagnostics.hpp"
#include "stangen/parser.hpp"
#include "stangen/validate.hpp"

namespace testutil {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline std::string model_path(const std::string& name) {
    return std::string(STANGEN_MODELS_DIR) + "/" + name;
}

inline std::string golden_path(const std::string& name) {
    return std::string(STANGEN_GOLDEN_DIR) + "/" + name;
}

inline std::string read_model(const std::string& name) { return read_file(model_path(name)); }

// Parses and validates; throws with the diagnostics text on failure.
inline stangen::StanProgram parse_model_source(const std::string& source) {
    stangen::Diagnostics diags;
    auto prog = stangen::parse_program(source, diags);
    if (prog) stangen::validate_program(*prog, diags);
    if (!prog || diags.has_errors())
        throw std::runtime_error("parse/validate failed:\n" + diags.to_string());
    return std::move(*prog);
}

inline stangen::StanProgram parse_model_file(const std::string& name) {
    return parse_model_source(read_model(name));
}

}  // namespace testutil
