#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "stangen/ast_printer.hpp"
#include "stangen/normalize.hpp"
#include "stangen/stan_eval.hpp"
#include "testutil.hpp"

using namespace stangen;
using testutil::parse_model_file;
using testutil::parse_model_source;

static Expr parse_expr(const std::string& src) {
    Diagnostics diags;
    auto toks = lex(src, diags);
    Parser p(std::move(toks), diags);
    Expr e = p.parse_expression();
    REQUIRE(!diags.has_errors());
    return e;
}

static StanProgram kernel_of(const std::string& file) {
    auto prog = parse_model_file(file);
    Diagnostics diags;
    REQUIRE(inline_functions(prog, diags));
    return kernelize(prog);
}

static StanProgram kernel_of_source(const std::string& src) {
    auto prog = parse_model_source(src);
    Diagnostics diags;
    REQUIRE(inline_functions(prog, diags));
    return kernelize(prog);
}

// Runs an extracted pre/post-processing function over bound inputs and
// returns its outputs.
static Env run_phase(const PhaseFn& fn, const Env& inputs) {
    StanProgram prog;
    Block data;
    data.decls = fn.inputs;
    prog.data = std::move(data);
    prog.model = fn.body;
    Env result = run_model(prog, inputs, Env{});
    Env out;
    for (const auto& name : fn.outputs) {
        const Value* v = result.find(name);
        REQUIRE(v != nullptr);
        out.set(name, *v);
    }
    return out;
}

TEST_CASE("expression evaluation basics") {
    Env env;
    env.set("x", Value(ArrayV{{int_v(2), int_v(3), int_v(5)}}));
    CHECK(as_int(eval_expr(env, parse_expr("x[2]"))) == 3);
    CHECK_THROWS_AS(eval_expr(env, parse_expr("x[4]")), EvalError);
    CHECK_THROWS_AS(eval_expr(env, parse_expr("x[0]")), EvalError);

    Value d = eval_expr(env, parse_expr("normal(0, 1)"));
    REQUIRE(d.is<DistV>());
    CHECK(d.as<DistV>()->name == "normal");
    REQUIRE(d.as<DistV>()->params.size() == 2);

    CHECK(as_int(eval_expr(env, parse_expr("{1, 2}[1] + 4"))) == 5);
    CHECK(as_real(eval_expr(env, parse_expr("[1.0, 2.5][2]"))) == 2.5);
    CHECK(as_int(eval_expr(env, parse_expr("7 / 2"))) == 3);
    CHECK(as_int(eval_expr(env, parse_expr("-7 / 2"))) == -3);  // truncation toward zero
    CHECK(as_real(eval_expr(env, parse_expr("7.0 / 2"))) == 3.5);
    CHECK_THROWS_AS(eval_expr(env, parse_expr("mystery(1)")), EvalError);
    CHECK_THROWS_AS(eval_expr(env, parse_expr("missing_var")), EvalError);
}

TEST_CASE("statement execution follows the reference semantics") {
    StanProgram empty = kernel_of_source("model { }");
    StanInterp interp(empty);
    auto stmts_of = [&](const std::string& src) {
        auto p = parse_model_source("model { " + src + " }");
        return p.model->stmts;
    };

    SECTION("target accumulates") {
        Env env;
        interp.exec_stmts(env, stmts_of("target += 2; target += 3;"));
        CHECK(env.target == 5.0);
    }
    SECTION("standard normal log density at zero") {
        Env env;
        env.set("x", real_v(0.0));
        interp.exec_stmts(env, stmts_of("x ~ normal(0, 1);"));
        CHECK(env.target == Catch::Approx(-0.9189385332046727).epsilon(1e-12));
    }
    SECTION("for loop bounds are inclusive with early exit") {
        Env env;
        env.set("s", int_v(0));
        interp.exec_stmts(env, stmts_of("for (i in 1:4) s = s + i;"));
        CHECK(as_int(*env.find("s")) == 10);
        Env env2;
        env2.set("s", int_v(7));
        interp.exec_stmts(env2, stmts_of("for (i in 3:2) s = s + 100;"));
        CHECK(as_int(*env2.find("s")) == 7);
    }
    SECTION("foreach over vectors and matrices") {
        Env env;
        env.set("v", Value(VecV{{1.0, 2.0, 3.0}}));
        env.set("s", real_v(0.0));
        interp.exec_stmts(env, stmts_of("for (e in v) s = s + e;"));
        CHECK(as_real(*env.find("s")) == 6.0);

        Env env2;
        env2.set("m", Value(MatV{{{1.0, 2.0}, {3.0, 4.0}}}));
        env2.set("s", real_v(0.0));
        interp.exec_stmts(env2, stmts_of("for (e in m) s = s + e;"));
        CHECK(as_real(*env2.find("s")) == 10.0);
    }
    SECTION("while compares exactly against zero") {
        Env env;
        env.set("w", int_v(3));
        env.set("s", int_v(0));
        interp.exec_stmts(env, stmts_of("while (w) { s = s + w; w = w - 1; }"));
        CHECK(as_int(*env.find("s")) == 6);
    }
    SECTION("runaway while hits the iteration cap") {
        StanInterp capped(empty, 100);
        Env env;
        env.set("w", int_v(1));
        CHECK_THROWS_AS(capped.exec_stmts(env, stmts_of("while (w) w = 1;")), EvalError);
    }
    SECTION("indexed assignment is a functional update") {
        StanProgram prog = kernel_of_source("model { vector[3] v; v[2] = 9; }");
        Env env = run_model(prog, Env{}, Env{});
        const Value* v = env.find("v");
        REQUIRE(v);
        CHECK(as_real(element_at(*v, 2)) == 9.0);
        CHECK(std::isnan(as_real(element_at(*v, 1))));
    }
    SECTION("vectorized sampling statement with a loop oracle") {
        Env env;
        env.set("xs", Value(ArrayV{{real_v(0.3), real_v(-1.2), real_v(2.0)}}));
        interp.exec_stmts(env, stmts_of("xs ~ normal(0, 1);"));
        Env env2;
        env2.set("xs", Value(ArrayV{{real_v(0.3), real_v(-1.2), real_v(2.0)}}));
        interp.exec_stmts(env2, stmts_of("for (i in 1:3) xs[i] ~ normal(0, 1);"));
        CHECK(env.target == Catch::Approx(env2.target).epsilon(1e-12));
    }
}

TEST_CASE("coin model target matches the closed form") {
    StanProgram kernel = kernel_of("coin.stan");

    SECTION("two flips at z = 0.5") {
        Env data;
        data.set("N", int_v(2));
        data.set("x", Value(ArrayV{{int_v(1), int_v(0)}}));
        Env params;
        params.set("z", real_v(0.5));
        Env out = run_model(kernel, data, params);
        // flat beta contributes zero; two fair flips each log(1/2)
        CHECK(out.target == Catch::Approx(-1.3862943611198906).epsilon(1e-12));
    }
    SECTION("no data leaves only the flat prior") {
        Env data;
        data.set("N", int_v(0));
        data.set("x", Value(ArrayV{}));
        Env params;
        params.set("z", real_v(0.3));
        Env out = run_model(kernel, data, params);
        CHECK(out.target == 0.0);
    }
    SECTION("missing bindings are reported") {
        Env data;
        data.set("N", int_v(0));
        CHECK_THROWS_WITH(run_model(kernel, data, Env{}),
                          Catch::Matchers::ContainsSubstring("missing"));
    }
}

TEST_CASE("double normal stacks two identical scores") {
    StanProgram kernel = kernel_of("double_normal.stan");
    Env params;
    params.set("theta", real_v(1000.0));
    Env out = run_model(kernel, Env{}, params);
    CHECK(out.target == Catch::Approx(2 * (-0.5 * log_two_pi)).epsilon(1e-12));
}

TEST_CASE("linear regression target equals the per-point summation oracle") {
    StanProgram kernel = kernel_of("linear_regression.stan");
    std::vector<double> x{1.0, 2.0, 3.0, 4.0, 5.0};
    std::vector<double> y{2.1, 3.9, 6.2, 7.8, 10.1};
    Env data;
    data.set("N", int_v(5));
    data.set("x", Value(VecV{x}));
    data.set("y", Value(VecV{y}));
    std::mt19937_64 gen(42);
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    for (int rep = 0; rep < 20; ++rep) {
        double alpha = unif(gen), beta = unif(gen), sigma = std::abs(unif(gen)) + 0.1;
        Env params;
        params.set("alpha", real_v(alpha));
        params.set("beta", real_v(beta));
        params.set("sigma", real_v(sigma));
        Env out = run_model(kernel, data, params);
        double expected = 0;
        for (size_t i = 0; i < x.size(); ++i)
            expected += scalar_lpdf("normal", {real_v(alpha + beta * x[i]), real_v(sigma)},
                                    real_v(y[i]));
        CHECK(out.target == Catch::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("environment evaluation is deterministic") {
    StanProgram kernel = kernel_of("coin.stan");
    Env data;
    data.set("N", int_v(3));
    data.set("x", Value(ArrayV{{int_v(1), int_v(1), int_v(0)}}));
    Env params;
    params.set("z", real_v(0.37));
    Env a = run_model(kernel, data, params);
    Env b = run_model(kernel, data, params);
    CHECK(a.target == b.target);  // bit-identical
    for (const auto& [name, v] : a.vars) {
        REQUIRE(b.find(name));
        CHECK(value_equal(v, *b.find(name)));
    }
}

// ---------------------------------------------------------------------------
// Random-program property: running from target = t equals t plus the run
// from target = 0.

namespace {

struct StmtGen {
    std::mt19937_64 gen;
    explicit StmtGen(uint64_t seed) : gen(seed) {}

    double real_const() {
        std::uniform_real_distribution<double> d(-2.0, 2.0);
        return d(gen);
    }
    int pick(int n) {
        std::uniform_int_distribution<int> d(0, n - 1);
        return d(gen);
    }

    std::string expr(int depth) {
        if (depth <= 0 || pick(3) == 0) {
            switch (pick(3)) {
                case 0: return format_double(real_const());
                case 1: return "a";
                default: return "b";
            }
        }
        const char* ops[] = {"+", "-", "*"};
        return "(" + expr(depth - 1) + " " + ops[pick(3)] + " " + expr(depth - 1) + ")";
    }

    std::string stmt(int depth) {
        int kind = pick(depth > 0 ? 6 : 4);
        switch (kind) {
            case 0: return "target += " + expr(1) + ";";
            case 1: return "a = " + expr(1) + ";";
            case 2: return "a ~ normal(" + expr(1) + ", 1.5);";
            case 3: return "b ~ normal(0, 0.5);";
            case 4:
                return "if (" + expr(1) + " > 0) { " + stmt(depth - 1) + " } else { " +
                       stmt(depth - 1) + " }";
            default: return "for (i in 1:3) { " + stmt(depth - 1) + " }";
        }
    }
};

}  // namespace

TEST_CASE("target shift law on random programs") {
    for (uint64_t seed = 0; seed < 60; ++seed) {
        StmtGen g(seed);
        std::string body;
        int n = 1 + g.pick(4);
        for (int i = 0; i < n; ++i) body += g.stmt(2) + " ";
        StanProgram prog = kernel_of_source("model { " + body + " }");
        StanInterp interp(prog);

        Env base;
        base.set("a", real_v(g.real_const()));
        base.set("b", real_v(g.real_const()));

        double t = g.real_const() * 10;
        Env from_zero = base;
        from_zero.target = 0;
        Env from_t = base;
        from_t.target = t;
        INFO("seed " << seed << ": " << body);
        interp.exec_stmts(from_zero, prog.model->stmts);
        interp.exec_stmts(from_t, prog.model->stmts);
        CHECK(from_t.target == Catch::Approx(t + from_zero.target).margin(1e-9));
    }
}

// ---------------------------------------------------------------------------
// Block normalization preserves the evaluated target.

TEST_CASE("function inlining preserves semantics") {
    SECTION("pure function call") {
        auto prog = parse_model_source(
            "functions { real f(real q) { return q + 1; } }"
            "model { real y; y = f(2.5); target += y; }");
        Diagnostics diags;
        REQUIRE(inline_functions(prog, diags));
        CHECK(prog.functions.empty());
        Env out = run_model(kernelize(prog), Env{}, Env{});
        CHECK(out.target == 3.5);
    }
    SECTION("no functions block is the identity") {
        auto before = parse_model_file("coin.stan");
        auto after = before;
        Diagnostics diags;
        REQUIRE(inline_functions(after, diags));
        CHECK(program_to_string(before) == program_to_string(after));
    }
    SECTION("sampling statements inside bodies stay at the call site") {
        auto inlined = parse_model_source(
            "parameters { real w; }"
            "model { real y; y = w * 2; y ~ normal(0, 2); target += y; }");
        auto with_fn = parse_model_source(
            "functions { real g(real v) { v ~ normal(0, 2); return v; } }"
            "parameters { real w; }"
            "model { real y; y = g(w * 2); target += y; }");
        Diagnostics diags;
        REQUIRE(inline_functions(with_fn, diags));
        std::mt19937_64 gen(7);
        std::uniform_real_distribution<double> unif(-3.0, 3.0);
        for (int rep = 0; rep < 25; ++rep) {
            Env params;
            params.set("w", real_v(unif(gen)));
            double a = run_model(kernelize(inlined), Env{}, params).target;
            double b = run_model(kernelize(with_fn), Env{}, params).target;
            CHECK(a == Catch::Approx(b).epsilon(1e-12));
        }
    }
    SECTION("recursion is rejected") {
        auto prog = parse_model_source(
            "functions { real f(real q) { return f(q); } }"
            "model { real y; y = f(1.0); }");
        Diagnostics diags;
        CHECK(!inline_functions(prog, diags));
        CHECK(diags.has_code("unsupported-recursion"));
    }
    SECTION("arity mismatch is rejected") {
        auto prog = parse_model_source(
            "functions { real f(real q) { return q; } }"
            "model { real y; y = f(1.0, 2.0); }");
        Diagnostics diags;
        CHECK(!inline_functions(prog, diags));
        CHECK(diags.has_code("arity-mismatch"));
    }
}

TEST_CASE("kernelize folds blocks in evaluation order") {
    SECTION("reparameterized model computes transformed parameters first") {
        StanProgram kernel = kernel_of("reparameterization.stan");
        CHECK(kernel.kernel_form());
        REQUIRE(kernel.model);
        // locals y and x computed before the two sampling statements
        REQUIRE(kernel.model->stmts.size() == 4);
        CHECK(kernel.model->stmts[0].is<AssignStmt>());
        CHECK(kernel.model->stmts[1].is<AssignStmt>());
        CHECK(kernel.model->stmts[2].is<TildeStmt>());

        Env params;
        params.set("y_std", real_v(0.7));
        params.set("x_std", real_v(-1.1));
        Env out = run_model(kernel, Env{}, params);
        double y = 3.0 * 0.7;
        CHECK(as_real(*out.find("y")) == Catch::Approx(y));
        CHECK(as_real(*out.find("x")) == Catch::Approx(std::exp(y / 2) * -1.1));
        double expected = scalar_lpdf("normal", {real_v(0), real_v(1)}, real_v(0.7)) +
                          scalar_lpdf("normal", {real_v(0), real_v(1)}, real_v(-1.1));
        CHECK(out.target == Catch::Approx(expected).epsilon(1e-12));
    }
    SECTION("kernel form is the identity on kernel-form programs") {
        auto prog = parse_model_file("coin.stan");
        CHECK(program_to_string(kernelize(prog)) == program_to_string(prog));
    }
    SECTION("generated quantities append after model statements") {
        auto prog = parse_model_source(
            "parameters { real t; } model { t ~ normal(0, 1); }"
            "generated quantities { real g = t * 2; }");
        StanProgram kernel = kernelize(prog);
        REQUIRE(kernel.model->stmts.size() == 2);
        CHECK(kernel.model->stmts[0].is<TildeStmt>());
        CHECK(kernel.model->stmts[1].is<AssignStmt>());
    }
}

TEST_CASE("phase split matches the kernelized semantics") {
    const std::string src =
        "data { int N; real xs[N]; }"
        "transformed data { real m = mean(xs); }"
        "parameters { real loc; }"
        "transformed parameters { real shifted = loc - m; }"
        "model { shifted ~ normal(0, 1); }"
        "generated quantities { real doubled = shifted * 2; }";
    auto prog = parse_model_source(src);
    Diagnostics diags;
    REQUIRE(inline_functions(prog, diags));

    StanProgram kernel = kernelize(prog);
    PhaseSplit split = split_phases(prog);
    REQUIRE(split.transformed_data);
    REQUIRE(split.generated_quantities);
    CHECK(split.kernel.kernel_form());

    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> unif(-2.0, 2.0);
    for (int rep = 0; rep < 30; ++rep) {
        Env data;
        data.set("N", int_v(3));
        data.set("xs",
                 Value(ArrayV{{real_v(unif(gen)), real_v(unif(gen)), real_v(unif(gen))}}));
        Env params;
        params.set("loc", real_v(unif(gen)));

        Env kernel_out = run_model(kernel, data, params);

        Env td_out = run_phase(*split.transformed_data, data);
        Env split_data = data;
        for (const auto& [name, v] : td_out.vars) split_data.set(name, v);
        Env split_out = run_model(split.kernel, split_data, params);

        CHECK(kernel_out.target == Catch::Approx(split_out.target).epsilon(1e-9));

        // post-processing sees data, transformed data, and parameters
        Env gq_in = split_data;
        for (const auto& [name, v] : params.vars) gq_in.set(name, v);
        Env gq_out = run_phase(*split.generated_quantities, gq_in);
        CHECK(as_real(*gq_out.find("doubled")) ==
              Catch::Approx(as_real(*kernel_out.find("doubled"))));
    }
}

TEST_CASE("phase split of simple corpus models") {
    PhaseSplit coin = split_phases(parse_model_file("coin.stan"));
    CHECK(!coin.transformed_data);
    CHECK(!coin.generated_quantities);

    PhaseSplit reparam = split_phases(parse_model_file("reparameterization.stan"));
    CHECK(!reparam.generated_quantities);
    REQUIRE(reparam.kernel.model);
    // transformed parameters are inlined ahead of the model statements
    CHECK(reparam.kernel.model->stmts[0].is<AssignStmt>());
}
