#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "stangen/gprob_eval.hpp"
#include "stangen/gprob_text.hpp"
#include "stangen/inference.hpp"
#include "stangen/pipeline.hpp"
#include "testutil.hpp"

using namespace stangen;

static Compiled compile_file(const std::string& name) {
    Diagnostics diags;
    auto c = compile_source(testutil::read_model(name), diags);
    if (!c) throw std::runtime_error("compile failed:\n" + diags.to_string());
    return std::move(*c);
}

static Compiled compile_src(const std::string& src) {
    Diagnostics diags;
    auto c = compile_source(src, diags);
    if (!c) throw std::runtime_error("compile failed:\n" + diags.to_string());
    return std::move(*c);
}

static GExpr ir_of(const std::string& text) {
    Diagnostics diags;
    auto e = parse_gprob(text, diags);
    if (!e) throw std::runtime_error("bad IR:\n" + diags.to_string());
    return std::move(*e);
}

TEST_CASE("trace execution basics") {
    SECTION("a factor adds its value to the log weight") {
        GExpr prog = ir_of("let () = factor(3.0) in\nreturn(())\n");
        Trace t = run_trace(prog, Env{}, TraceOptions{});
        CHECK(t.log_weight == 3.0);
    }
    SECTION("a proper prior draws inside its support with zero weight") {
        GExpr prog = ir_of("let x = sample(uniform(0, 1)) in\nreturn(x)\n");
        Rng rng(5);
        TraceOptions opts;
        opts.rng = &rng;
        for (int i = 0; i < 50; ++i) {
            Trace t = run_trace(prog, Env{}, opts);
            CHECK(t.log_weight == 0.0);
            double x = as_real(t.return_value);
            CHECK(x >= 0.0);
            CHECK(x <= 1.0);
        }
    }
    SECTION("flat priors cannot be drawn forward") {
        GExpr prog = ir_of("let x = sample(improper_uniform(-inf, inf)) in\nreturn(x)\n");
        Rng rng(5);
        TraceOptions opts;
        opts.rng = &rng;
        CHECK_THROWS_WITH(run_trace(prog, Env{}, opts),
                          Catch::Matchers::ContainsSubstring("improper-prior-needs-mcmc"));
    }
    SECTION("a pinned replay must cover every site") {
        GExpr prog = ir_of("let x = sample(uniform(0, 1)) in\nreturn(x)\n");
        Trace empty;
        TraceOptions opts;
        opts.pinned = &empty;
        CHECK_THROWS_WITH(run_trace(prog, Env{}, opts),
                          Catch::Matchers::ContainsSubstring("missing site"));
    }
}

TEST_CASE("pinned coin trace weight equals the reference target") {
    Compiled c = compile_file("coin.stan");
    Env data;
    data.set("N", int_v(2));
    data.set("x", Value(ArrayV{{int_v(1), int_v(0)}}));

    Trace pinned;
    pinned.set("z", real_v(0.5));
    TraceOptions opts;
    opts.pinned = &pinned;
    opts.include_prior_lpdf = true;
    Trace t = run_trace(c.model, data, opts);
    // uniform(0,1) scores zero, so the weight is exactly the reference target
    CHECK(t.log_weight == Catch::Approx(-1.3862943611198906).epsilon(1e-12));

    Env params;
    params.set("z", real_v(0.5));
    Env ref = run_model(c.kernel, data, params);
    CHECK(t.log_weight == Catch::Approx(ref.target).epsilon(1e-12));
}

// ---------------------------------------------------------------------------
// Core correspondence: pinned trace weight equals the reference target, up
// to the bounded-uniform prior constants.

namespace {

struct PinCase {
    const char* model;
    std::function<Env(std::mt19937_64&)> data_gen;
};

Env random_params(const Compiled& c, const Env& data, std::mt19937_64& gen) {
    Env params;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (const auto& spec : materialize_params(c.kernel, c.types, data)) {
        std::vector<double> flat(spec.flat_size);
        for (auto& v : flat) {
            if (spec.bounded_uniform())
                v = spec.lower + (spec.upper - spec.lower) * unif(gen);
            else if (std::isfinite(spec.lower))
                v = spec.lower + 3.0 * unif(gen) + 1e-3;
            else if (std::isfinite(spec.upper))
                v = spec.upper - 3.0 * unif(gen) - 1e-3;
            else
                v = 6.0 * unif(gen) - 3.0;
        }
        const double* p = flat.data();
        params.set(spec.name, stangen::detail::build_from_flat(data, spec.type, p));
    }
    return params;
}

double bounded_prior_constant(const Compiled& c, const Env& data, const Env& params) {
    double sum = 0;
    for (const auto& spec : materialize_params(c.kernel, c.types, data)) {
        if (!spec.bounded_uniform()) continue;
        std::vector<double> flat;
        stangen::detail::flatten_value(*params.find(spec.name), flat);
        for (size_t i = 0; i < flat.size(); ++i)
            sum += -std::log(spec.upper - spec.lower);
    }
    return sum;
}

}  // namespace

TEST_CASE("trace weight equals reference target over random pins") {
    std::mt19937_64 gen(2024);
    auto no_data = [](std::mt19937_64&) { return Env{}; };
    std::vector<PinCase> cases = {
        {"coin.stan",
         [](std::mt19937_64& g) {
             std::uniform_int_distribution<int> flip(0, 1);
             Env d;
             d.set("N", int_v(4));
             ArrayV xs;
             for (int i = 0; i < 4; ++i) xs.elems.push_back(int_v(flip(g)));
             d.set("x", Value(std::move(xs)));
             return d;
         }},
        {"double_normal.stan", no_data},
        {"reparameterization.stan", no_data},
        {"multimodal.stan", no_data},
        {"target_update.stan", no_data},
        {"linear_regression.stan",
         [](std::mt19937_64& g) {
             std::uniform_real_distribution<double> u(-2, 2);
             Env d;
             d.set("N", int_v(3));
             d.set("x", Value(VecV{{u(g), u(g), u(g)}}));
             d.set("y", Value(VecV{{u(g), u(g), u(g)}}));
             return d;
         }},
        {"multiple_updates.stan",
         [](std::mt19937_64& g) {
             std::uniform_real_distribution<double> u(0.5, 2.0);
             Env d;
             d.set("sigma_py", real_v(u(g)));
             d.set("sigma_pt", real_v(u(g)));
             return d;
         }},
        {"left_expression.stan",
         [](std::mt19937_64&) {
             Env d;
             d.set("N", int_v(50));
             return d;
         }},
    };
    for (const auto& pc : cases) {
        Compiled c = compile_file(pc.model);
        for (int rep = 0; rep < 25; ++rep) {
            Env data = pc.data_gen(gen);
            Env params = random_params(c, data, gen);

            Env ref = run_model(c.kernel, data, params);

            Trace pinned;
            for (const auto& [name, v] : params.vars) pinned.set(name, v);
            TraceOptions opts;
            opts.pinned = &pinned;
            opts.include_prior_lpdf = true;
            Trace t = run_trace(c.model, data, opts);

            double adjusted = t.log_weight - bounded_prior_constant(c, data, params);
            INFO(pc.model << " rep " << rep);
            CHECK(adjusted == Catch::Approx(ref.target).epsilon(1e-9));
        }
    }
}

TEST_CASE("observation-to-factor rewrite leaves the weight bit-identical") {
    std::mt19937_64 gen(9);
    for (const char* name : {"coin.stan", "linear_regression.stan", "multimodal.stan"}) {
        Compiled c = compile_file(name);
        GExpr rewritten = observe_to_factor(c.model);
        for (int rep = 0; rep < 20; ++rep) {
            Env data;
            if (std::string(name) == "coin.stan") {
                data.set("N", int_v(2));
                data.set("x", Value(ArrayV{{int_v(1), int_v(1)}}));
            } else if (std::string(name) == "linear_regression.stan") {
                data.set("N", int_v(2));
                data.set("x", Value(VecV{{0.5, 1.5}}));
                data.set("y", Value(VecV{{1.0, 2.0}}));
            }
            Env params = random_params(c, data, gen);
            Trace pinned;
            for (const auto& [n, v] : params.vars) pinned.set(n, v);
            TraceOptions opts;
            opts.pinned = &pinned;
            opts.include_prior_lpdf = true;
            double a = run_trace(c.model, data, opts).log_weight;
            double b = run_trace(rewritten, data, opts).log_weight;
            CHECK(a == b);
        }
    }
}

TEST_CASE("replaying a drawn trace reproduces its weight exactly") {
    Compiled c = compile_file("coin.stan");
    Env data;
    data.set("N", int_v(5));
    data.set("x", Value(ArrayV{{int_v(1), int_v(0), int_v(1), int_v(1), int_v(0)}}));
    Rng rng(77);
    for (int rep = 0; rep < 100; ++rep) {
        TraceOptions draw;
        draw.rng = &rng;
        Trace t = run_trace(c.model, data, draw);

        TraceOptions replay;
        replay.pinned = &t;
        Trace r = run_trace(c.model, data, replay);
        CHECK(r.log_weight == t.log_weight);  // bit-identical
        CHECK(value_equal(r.return_value, t.return_value));
    }
}

TEST_CASE("loop state threads through compiled loops") {
    SECTION("while loop sum matches the closed form") {
        Compiled c = compile_src(
            "data { int n; }"
            "model {"
            "  real s; real w;"
            "  s = 0; w = n;"
            "  while (w > 0) { s = s + w; w = w - 1; }"
            "  target += s;"
            "}");
        for (long long n = 0; n <= 12; ++n) {
            Env data;
            data.set("n", int_v(n));
            Trace t = run_trace(c.model, data, TraceOptions{});
            CHECK(t.log_weight == (double)(n * (n + 1) / 2));
        }
    }
    SECTION("for loop accumulates factors inside the body") {
        Compiled c = compile_src("model { for (i in 1:5) target += i; }");
        Trace t = run_trace(c.model, Env{}, TraceOptions{});
        CHECK(t.log_weight == 15.0);
    }
    SECTION("runaway while loops hit the cap") {
        GExpr prog = ir_of(
            "let x =\n  while_{x} (1)\n    return(1)\nin\nreturn(x)\n");
        TraceOptions opts;
        opts.while_cap = 50;
        Env env;
        env.set("x", int_v(0));
        CHECK_THROWS_WITH(run_trace(prog, env, opts),
                          Catch::Matchers::ContainsSubstring("iteration cap"));
    }
}

TEST_CASE("importance sampling diagnostics") {
    SECTION("no observations means unit weights and full ess") {
        Compiled c = compile_src("parameters { real<lower=0, upper=1> u; } model { }");
        Env data;
        auto specs = materialize_params(c.kernel, c.types, data);
        IsOptions opts;
        opts.samples = 500;
        opts.seed = 3;
        InferenceResult r = importance_sample(c.model, data, specs, opts);
        CHECK(r.ess == Catch::Approx(500.0));
        CHECK(r.n_samples == 500);
    }
    SECTION("an impossible factor degenerates every weight") {
        Compiled c = compile_src(
            "parameters { real<lower=0, upper=1> u; } model { target += log(0); }");
        Env data;
        auto specs = materialize_params(c.kernel, c.types, data);
        IsOptions opts;
        opts.samples = 10;
        CHECK_THROWS_WITH(importance_sample(c.model, data, specs, opts),
                          Catch::Matchers::ContainsSubstring("degenerate-weights"));
    }
    SECTION("improper priors cannot be importance sampled") {
        Compiled c = compile_file("double_normal.stan");
        auto specs = materialize_params(c.kernel, c.types, Env{});
        IsOptions opts;
        opts.samples = 10;
        CHECK_THROWS_WITH(importance_sample(c.model, Env{}, specs, opts),
                          Catch::Matchers::ContainsSubstring("improper-prior-needs-mcmc"));
    }
}

TEST_CASE("random-walk chain on a pure prior recovers its spread") {
    Compiled c = compile_src("parameters { real theta; } model { theta ~ normal(0, 1); }");
    auto specs = materialize_params(c.kernel, c.types, Env{});
    MhOptions opts;
    opts.samples = 20000;
    opts.warmup = 2000;
    opts.thin = 5;
    opts.step = 1.0;
    opts.seed = 11;
    InferenceResult r = metropolis(c.model, Env{}, specs, opts);
    REQUIRE(r.params.size() == 1);
    CHECK(r.params[0].first == "theta");
    CHECK(r.params[0].second.mean == Catch::Approx(0.0).margin(0.08));
    CHECK(r.params[0].second.sd == Catch::Approx(1.0).epsilon(0.05));
    CHECK(r.accept_rate > 0.2);
    CHECK(r.accept_rate < 0.9);
}

TEST_CASE("chains split deterministically and merge in order") {
    Compiled c = compile_src(
        "data { int n; int k; }"
        "parameters { real<lower=0, upper=1> p; }"
        "model { k ~ binomial_logit(n, log(p / (1 - p))); }");
    Env data;
    data.set("n", int_v(20));
    data.set("k", int_v(14));
    auto specs = materialize_params(c.kernel, c.types, data);
    MhOptions opts;
    opts.samples = 4000;
    opts.warmup = 500;
    opts.thin = 4;
    opts.step = 0.2;
    opts.seed = 21;
    opts.chains = 2;
    InferenceResult a = metropolis(c.model, data, specs, opts);
    InferenceResult b = metropolis(c.model, data, specs, opts);
    REQUIRE(a.params.size() == 1);
    CHECK(a.params[0].second.mean == b.params[0].second.mean);  // bit-identical
    CHECK(a.params[0].second.q95 == b.params[0].second.q95);
    CHECK(a.n_samples == 2000);
    // 14/20 successes center the posterior near 0.7
    CHECK(a.params[0].second.mean == Catch::Approx(0.7).margin(0.08));
}

TEST_CASE("a stuck chain reports zero acceptance") {
    Compiled c = compile_src(
        "parameters { real<lower=0, upper=1> z; } model { z ~ beta(2, 2); }");
    auto specs = materialize_params(c.kernel, c.types, Env{});
    MhOptions opts;
    opts.samples = 60;
    opts.warmup = 10;
    opts.thin = 1;
    opts.step = 1e12;  // every proposal lands far outside the unit interval
    opts.seed = 8;
    InferenceResult r = metropolis(c.model, Env{}, specs, opts);
    REQUIRE(!r.notes.empty());
    CHECK(r.notes[0].find("zero-acceptance") != std::string::npos);
    CHECK(r.accept_rate == 0.0);
}

TEST_CASE("learnable parameter nodes evaluate to zero initializations") {
    Compiled c = compile_file("multimodal.stan");
    REQUIRE(c.guide);
    Rng rng(4);
    TraceOptions opts;
    opts.rng = &rng;
    Trace t = run_trace(*c.guide, Env{}, opts);
    // cluster and theta drawn from normal(0, 1)-style guides around zero
    CHECK(t.find("cluster"));
    CHECK(t.find("theta"));
    const auto* tuple = t.return_value.as<ArrayV>();
    REQUIRE(tuple);
    CHECK(tuple->elems.size() == 2);
}
