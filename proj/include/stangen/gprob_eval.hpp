#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "stangen/builtins.hpp"
#include "stangen/distributions.hpp"
#include "stangen/gprob_ast.hpp"
#include "stangen/rng.hpp"
#include "stangen/stan_eval.hpp"

namespace stangen {

// One weighted execution: the values drawn at every sample site, the
// accumulated log weight, and the return value.
struct Trace {
    std::vector<std::pair<std::string, Value>> sites;
    double log_weight = 0.0;
    Value return_value;

    const Value* find(const std::string& name) const {
        for (const auto& [n, v] : sites)
            if (n == name) return &v;
        return nullptr;
    }
    void set(const std::string& name, Value v) {
        for (auto& [n, ex] : sites)
            if (n == name) {
                ex = std::move(v);
                return;
            }
        sites.emplace_back(name, std::move(v));
    }
};

struct TraceOptions {
    const Trace* pinned = nullptr;     // replay these sample values
    bool include_prior_lpdf = false;   // score pinned draws under their priors
    Rng* rng = nullptr;                // required when not pinned
    long long while_cap = 1'000'000;
};

namespace detail {

struct TraceEvaluator {
    const TraceOptions& opts;
    Trace trace;
    int anonymous_sites = 0;

    Value unit() const { return Value(ArrayV{}); }

    Value eval(const GExpr& e, Env& env) {
        struct Vis {
            TraceEvaluator& tv;
            Env& env;
            Value operator()(const GLet& x) {
                Value v = tv.eval_binding(x.pat, *x.value, env);
                tv.bind(x.pat, std::move(v), env);
                return tv.eval(*x.body, env);
            }
            Value operator()(const GIf& x) {
                if (as_real(eval_expr(env, x.cond)) != 0.0) return tv.eval(*x.then_e, env);
                return tv.eval(*x.else_e, env);
            }
            Value operator()(const GFor& x) {
                long long lo = as_int(eval_expr(env, x.lo));
                long long hi = as_int(eval_expr(env, x.hi));
                for (long long i = lo; i <= hi; ++i) {
                    Env child = env;
                    child.set(x.var, int_v(i));
                    Value v = tv.eval(*x.body, child);
                    tv.rebind_state(x.state, v, env);
                }
                return tv.state_value(x.state, env);
            }
            Value operator()(const GWhile& x) {
                long long iters = 0;
                while (as_real(eval_expr(env, x.cond)) != 0.0) {
                    if (++iters > tv.opts.while_cap)
                        throw EvalError("while loop exceeded the iteration cap");
                    Env child = env;
                    Value v = tv.eval(*x.body, child);
                    tv.rebind_state(x.state, v, env);
                }
                return tv.state_value(x.state, env);
            }
            Value operator()(const GFactor& x) {
                tv.trace.log_weight += as_real(eval_expr(env, x.amount));
                return tv.unit();
            }
            Value operator()(const GSample& x) { return tv.do_sample("site_", x, env); }
            Value operator()(const GObserve& x) {
                Value d = eval_expr(env, x.dist);
                const auto* dist = d.as<DistV>();
                if (!dist) throw EvalError("observe needs a distribution");
                tv.trace.log_weight += dist_lpdf(*dist, eval_expr(env, x.value));
                return tv.unit();
            }
            Value operator()(const GParam& x) {
                // learnable parameters are not trained here; they evaluate to
                // a deterministic zero initialization
                if (!x.shape) return real_v(0.0);
                Value shape = eval_expr(env, *x.shape);
                return call_builtin("broadcast", {real_v(0.0), shape});
            }
            Value operator()(const GReturn& x) {
                if (x.values.empty()) return tv.unit();
                if (x.values.size() == 1) return eval_expr(env, x.values[0]);
                ArrayV tuple;
                for (const auto& v : x.values) tuple.elems.push_back(eval_expr(env, v));
                return Value(std::move(tuple));
            }
        };
        return std::visit(Vis{*this, env}, e.node);
    }

    Value eval_binding(const GPattern& pat, const GExpr& value, Env& env) {
        if (const auto* s = value.as<GSample>()) {
            std::string site = pat.kind == GPattern::Kind::Var
                                   ? pat.name
                                   : "site_" + std::to_string(++anonymous_sites);
            return do_sample_named(site, *s, env);
        }
        return eval(value, env);
    }

    Value do_sample(const char* prefix, const GSample& s, Env& env) {
        return do_sample_named(prefix + std::to_string(++anonymous_sites), s, env);
    }

    Value do_sample_named(const std::string& site, const GSample& s, Env& env) {
        Value d = eval_expr(env, s.dist);
        const auto* dist = d.as<DistV>();
        if (!dist) throw EvalError("sample needs a distribution");
        if (trace.find(site))
            throw EvalError("duplicate sample site '" + site + "' in one trace");
        Value v;
        if (opts.pinned) {
            const Value* pv = opts.pinned->find(site);
            if (!pv) throw EvalError("pinned trace is missing site '" + site + "'");
            v = *pv;
        } else {
            if (!opts.rng) throw EvalError("sampling requires a generator");
            v = dist_sample(*dist, *opts.rng);
        }
        if (opts.include_prior_lpdf) trace.log_weight += dist_lpdf(*dist, v);
        trace.set(site, v);
        return v;
    }

    void bind(const GPattern& pat, Value v, Env& env) {
        switch (pat.kind) {
            case GPattern::Kind::Unit: return;
            case GPattern::Kind::Var: env.set(pat.name, std::move(v)); return;
            case GPattern::Kind::IndexedVar: {
                std::vector<long long> path;
                for (const auto& ix : pat.indices)
                    path.push_back(as_int(eval_expr(env, ix)));
                const Value* cur = env.find(pat.name);
                if (!cur)
                    throw EvalError("indexed binding into unbound variable '" + pat.name +
                                    "'");
                env.set(pat.name, with_element(*cur, path, 0, v));
                return;
            }
            case GPattern::Kind::Tuple: {
                const auto* tuple = v.as<ArrayV>();
                if (!tuple || tuple->elems.size() != pat.tuple.size())
                    throw EvalError("tuple binding arity mismatch");
                for (size_t i = 0; i < pat.tuple.size(); ++i)
                    env.set(pat.tuple[i], tuple->elems[i]);
                return;
            }
        }
    }

    // Rebinds the loop state from the body's return value.
    void rebind_state(const std::vector<std::string>& state, const Value& v, Env& env) {
        if (state.empty()) return;
        if (state.size() == 1) {
            env.set(state[0], v);
            return;
        }
        const auto* tuple = v.as<ArrayV>();
        if (!tuple || tuple->elems.size() != state.size())
            throw EvalError("loop state arity mismatch");
        for (size_t i = 0; i < state.size(); ++i) env.set(state[i], tuple->elems[i]);
    }

    // Value of the loop itself: the current state bindings.
    Value state_value(const std::vector<std::string>& state, Env& env) {
        if (state.empty()) return unit();
        auto get = [&](const std::string& n) -> Value {
            const Value* v = env.find(n);
            if (!v) throw EvalError("loop state variable '" + n + "' is unbound");
            return *v;
        };
        if (state.size() == 1) return get(state[0]);
        ArrayV tuple;
        for (const auto& n : state) tuple.elems.push_back(get(n));
        return Value(std::move(tuple));
    }
};

}  // namespace detail

// Executes the program over bound data: forward draws at sample sites (or
// pinned replays), while factors and observations accumulate the log weight.
inline Trace run_trace(const GExpr& program, const Env& data, TraceOptions opts) {
    detail::TraceEvaluator tv{opts, {}, 0};
    Env env = data;
    tv.trace.return_value = tv.eval(program, env);
    return std::move(tv.trace);
}

}  // namespace stangen
