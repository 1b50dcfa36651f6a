#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "stangen/ast_printer.hpp"
#include "stangen/inference.hpp"
#include "stangen/pipeline.hpp"
#include "stangen/pyro_emit.hpp"

using namespace stangen;
using nlohmann::ordered_json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_output(const std::string& out_path, const std::string& text) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + out_path + "'");
    out << text;
}

// JSON-to-value conversion guided by the declaration: arrays nest row-major,
// matrices are arrays of row arrays.
Value json_to_value(const ordered_json& j, const Decl& d, size_t array_level) {
    size_t array_dims =
        d.shape.kind == ArrayShape::Kind::Sizes ? d.shape.sizes.size() : 0;
    if (array_level < array_dims) {
        if (!j.is_array())
            throw std::runtime_error("value for '" + d.name + "' must be a JSON array");
        ArrayV out;
        for (const auto& e : j) out.elems.push_back(json_to_value(e, d, array_level + 1));
        return Value(std::move(out));
    }
    switch (d.type.kind) {
        case BaseTypeKind::Int:
            if (!j.is_number())
                throw std::runtime_error("value for '" + d.name + "' must be a number");
            return int_v(j.get<long long>());
        case BaseTypeKind::Real:
            if (!j.is_number())
                throw std::runtime_error("value for '" + d.name + "' must be a number");
            return real_v(j.get<double>());
        case BaseTypeKind::Vector:
        case BaseTypeKind::RowVector: {
            if (!j.is_array())
                throw std::runtime_error("value for '" + d.name + "' must be a JSON array");
            std::vector<double> xs;
            for (const auto& e : j) xs.push_back(e.get<double>());
            if (d.type.kind == BaseTypeKind::Vector) return Value(VecV{std::move(xs)});
            return Value(RowVecV{std::move(xs)});
        }
        case BaseTypeKind::Matrix: {
            if (!j.is_array())
                throw std::runtime_error("value for '" + d.name + "' must be a JSON array");
            MatV m;
            for (const auto& row : j) {
                std::vector<double> xs;
                for (const auto& e : row) xs.push_back(e.get<double>());
                m.rows.push_back(std::move(xs));
            }
            return Value(std::move(m));
        }
    }
    throw std::runtime_error("unsupported declaration for '" + d.name + "'");
}

Env load_env(const std::string& path, const std::optional<Block>& decls) {
    Env env;
    if (path.empty()) return env;
    ordered_json j = ordered_json::parse(read_file(path));
    if (!j.is_object()) throw std::runtime_error("'" + path + "' must hold a JSON object");
    if (!decls) return env;
    for (const auto& d : decls->decls) {
        auto it = j.find(d.name);
        if (it == j.end()) continue;
        env.set(d.name, json_to_value(*it, d, 0));
    }
    return env;
}

int report(const Diagnostics& diags, const std::string& file) {
    diags.print(std::cerr, file);
    return diags.has_errors() ? 1 : 0;
}

std::optional<Compiled> compile_path(const std::string& path, Diagnostics& diags) {
    auto c = compile_source(read_file(path), diags);
    diags.print(std::cerr, path);
    return c;
}

ordered_json summary_json(const InferenceResult& r, const std::string& method) {
    ordered_json out;
    out["method"] = method;
    out["seed"] = r.seed;
    out["chains"] = r.chains;
    out["chain_streams"] = r.chain_streams;
    out["samples"] = r.n_samples;
    if (method == "is")
        out["ess"] = r.ess;
    else
        out["accept_rate"] = r.accept_rate;
    ordered_json params = ordered_json::object();
    for (const auto& [name, s] : r.params) {
        ordered_json p;
        p["mean"] = s.mean;
        p["sd"] = s.sd;
        p["q5"] = s.q5;
        p["q50"] = s.q50;
        p["q95"] = s.q95;
        params[name] = std::move(p);
    }
    out["params"] = std::move(params);
    if (!r.notes.empty()) out["notes"] = r.notes;
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"compiler from extended Stan to a generative probabilistic IR"};
    app.require_subcommand(1);

    std::string source_path, out_path, data_path, params_path, init_path;
    std::string method = "is";
    size_t samples = 10000;
    long long warmup = -1;
    size_t thin = 10;
    double step = 0.5;
    uint64_t seed = 1;
    int chains = 1;
    bool emit_ir_flag = false, emit_pyro_flag = false, emit_kernel_flag = false,
         emit_types_flag = false;

    auto* check = app.add_subcommand("check", "parse and type-check a model");
    check->add_option("model", source_path, "model source file")->required();

    auto* compile = app.add_subcommand("compile", "compile a model and emit an artifact");
    compile->add_option("model", source_path, "model source file")->required();
    compile->add_flag("--emit-ir", emit_ir_flag, "canonical IR text (default)");
    compile->add_flag("--emit-pyro", emit_pyro_flag, "generative Python-flavored source");
    compile->add_flag("--emit-kernel", emit_kernel_flag, "kernelized surface program");
    compile->add_flag("--emit-types", emit_types_flag, "resolved declaration types");
    compile->add_option("-o,--output", out_path, "output file (default stdout)");

    auto* eval = app.add_subcommand("eval-target", "evaluate the model's log density");
    eval->add_option("model", source_path, "model source file")->required();
    eval->add_option("--data", data_path, "data JSON file");
    eval->add_option("--params", params_path, "parameter values JSON file")->required();

    auto* infer = app.add_subcommand("infer", "run trace-based inference");
    infer->add_option("model", source_path, "model source file")->required();
    infer->add_option("--data", data_path, "data JSON file");
    infer->add_option("--method", method, "is | mh")
        ->check(CLI::IsMember({"is", "mh"}));
    infer->add_option("--samples", samples, "number of samples");
    infer->add_option("--warmup", warmup, "warmup iterations (mh; default samples/10)");
    infer->add_option("--thin", thin, "keep every n-th draw (mh)");
    infer->add_option("--step", step, "proposal scale (mh)");
    infer->add_option("--seed", seed, "random seed");
    infer->add_option("--chains", chains, "independent chains")->check(CLI::PositiveNumber);
    infer->add_option("--init", init_path, "initial parameter values JSON file (mh)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (check->parsed()) {
            Diagnostics diags;
            auto prog = parse_program(read_file(source_path), diags);
            if (prog) {
                validate_program(*prog, diags);
                if (!diags.has_errors()) {
                    inline_functions(*prog, diags);
                    if (!diags.has_errors()) {
                        StanProgram kernel = kernelize(*prog);
                        auto types = resolve_program(kernel, diags);
                        if (types)
                            for (const auto& w : types->warnings)
                                diags.warning(w.code, w.message, w.span);
                    }
                }
            }
            return report(diags, source_path);
        }

        if (compile->parsed()) {
            Diagnostics diags;
            auto c = compile_path(source_path, diags);
            if (!c) return 1;
            std::string text;
            if (emit_pyro_flag) {
                Diagnostics ediags;
                text = emit_pyro(*c, ediags);
                if (ediags.has_errors()) return report(ediags, source_path);
            } else if (emit_kernel_flag) {
                text = program_to_string(c->kernel);
            } else if (emit_types_flag) {
                text = types_listing(c->types);
            } else {
                text = emit_gprob(c->model);
            }
            write_output(out_path, text);
            return 0;
        }

        if (eval->parsed()) {
            Diagnostics diags;
            auto c = compile_path(source_path, diags);
            if (!c) return 1;
            Env data = load_env(data_path, c->kernel.data);
            Env params = load_env(params_path, c->kernel.parameters);
            Env out = run_model(c->kernel, data, params);
            std::printf("%.17g\n", out.target);
            return 0;
        }

        if (infer->parsed()) {
            Diagnostics diags;
            auto c = compile_path(source_path, diags);
            if (!c) return 1;
            Env data = load_env(data_path, c->kernel.data);
            auto specs = materialize_params(c->kernel, c->types, data);
            InferenceResult result;
            if (method == "is") {
                IsOptions opts;
                opts.samples = samples;
                opts.seed = seed;
                opts.chains = chains;
                result = importance_sample(c->model, data, specs, opts);
            } else {
                MhOptions opts;
                opts.samples = samples;
                opts.warmup = warmup >= 0 ? (size_t)warmup : samples / 10;
                opts.thin = thin;
                opts.step = step;
                opts.seed = seed;
                opts.chains = chains;
                if (!init_path.empty()) opts.init = load_env(init_path, c->kernel.parameters);
                result = metropolis(c->model, data, specs, opts);
            }
            std::cout << summary_json(result, method).dump(2) << '\n';
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
