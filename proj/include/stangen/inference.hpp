#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "stangen/gprob_eval.hpp"
#include "stangen/stan_eval.hpp"
#include "stangen/typecheck.hpp"

namespace stangen {

// A parameter with concrete shape and evaluated scalar bounds; the flat
// layout used by the random-walk sampler.
struct ParamSpec {
    std::string name;
    IType type;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    size_t flat_size = 1;

    bool bounded_uniform() const { return std::isfinite(lower) && std::isfinite(upper); }
};

namespace detail {

inline long long eval_size(const Env& data, const Size& s) {
    if (s.is_var()) throw EvalError("parameter shape is not concrete");
    return as_int(eval_expr(data, s.expr));
}

inline size_t flat_count(const Env& data, const IType& t) {
    switch (t.kind) {
        case IType::Kind::Int:
        case IType::Kind::Real: return 1;
        case IType::Kind::Vector:
        case IType::Kind::RowVector: return (size_t)eval_size(data, t.sizes[0]);
        case IType::Kind::Matrix:
            return (size_t)(eval_size(data, t.sizes[0]) * eval_size(data, t.sizes[1]));
        case IType::Kind::Array:
            return (size_t)eval_size(data, t.sizes[0]) * flat_count(data, *t.elem);
        case IType::Kind::ArrayDim: {
            if (t.dim->kind != Dim::Kind::List)
                throw EvalError("parameter shape is not concrete");
            size_t n = flat_count(data, *t.elem);
            for (const auto& s : t.dim->list) n *= (size_t)eval_size(data, s);
            return n;
        }
    }
    return 1;
}

inline Value build_from_flat(const Env& data, const IType& t, const double*& xs) {
    switch (t.kind) {
        case IType::Kind::Int: return int_v((long long)std::llround(*xs++));
        case IType::Kind::Real: return real_v(*xs++);
        case IType::Kind::Vector:
        case IType::Kind::RowVector: {
            size_t n = (size_t)eval_size(data, t.sizes[0]);
            std::vector<double> v(xs, xs + n);
            xs += n;
            if (t.kind == IType::Kind::Vector) return Value(VecV{std::move(v)});
            return Value(RowVecV{std::move(v)});
        }
        case IType::Kind::Matrix: {
            size_t r = (size_t)eval_size(data, t.sizes[0]);
            size_t c = (size_t)eval_size(data, t.sizes[1]);
            MatV m;
            for (size_t i = 0; i < r; ++i) {
                m.rows.emplace_back(xs, xs + c);
                xs += c;
            }
            return Value(std::move(m));
        }
        case IType::Kind::Array: {
            size_t n = (size_t)eval_size(data, t.sizes[0]);
            ArrayV a;
            for (size_t i = 0; i < n; ++i) a.elems.push_back(build_from_flat(data, *t.elem, xs));
            return Value(std::move(a));
        }
        case IType::Kind::ArrayDim: {
            if (t.dim->kind != Dim::Kind::List)
                throw EvalError("parameter shape is not concrete");
            IType grounded = *t.elem;
            const auto& l = t.dim->list;
            for (size_t i = l.size(); i > 0; --i) grounded = t_array(grounded, l[i - 1]);
            return build_from_flat(data, grounded, xs);
        }
    }
    throw EvalError("unsupported parameter type");
}

inline void flatten_value(const Value& v, std::vector<double>& out) {
    if (v.scalar()) {
        out.push_back(as_real(v));
        return;
    }
    size_t n = outer_size(v);
    for (size_t i = 1; i <= n; ++i) flatten_value(element_at(v, (long long)i), out);
}

inline void component_labels(const std::string& name, const Value& v,
                             std::vector<std::string>& out, std::string idx = "") {
    if (v.scalar()) {
        out.push_back(idx.empty() ? name : name + "[" + idx + "]");
        return;
    }
    size_t n = outer_size(v);
    for (size_t i = 1; i <= n; ++i) {
        std::string next = idx.empty() ? std::to_string(i) : idx + "," + std::to_string(i);
        component_labels(name, element_at(v, (long long)i), out, next);
    }
}

}  // namespace detail

inline std::vector<ParamSpec> materialize_params(const StanProgram& kernel,
                                                 const TypeInfo& types, const Env& data) {
    std::vector<ParamSpec> out;
    if (!kernel.parameters) return out;
    for (const auto& d : kernel.parameters->decls) {
        ParamSpec spec;
        spec.name = d.name;
        spec.type = types.decl_types.at(d.name);
        if (d.constraint.lower) spec.lower = as_real(eval_expr(data, *d.constraint.lower));
        if (d.constraint.upper) spec.upper = as_real(eval_expr(data, *d.constraint.upper));
        spec.flat_size = detail::flat_count(data, spec.type);
        out.push_back(std::move(spec));
    }
    return out;
}

struct ParamSummary {
    double mean = 0, sd = 0, q5 = 0, q50 = 0, q95 = 0;
};

struct InferenceResult {
    std::vector<std::pair<std::string, ParamSummary>> params;  // declaration order
    double ess = 0;          // importance sampling
    double accept_rate = 0;  // random-walk chains
    uint64_t seed = 0;
    int chains = 1;
    std::vector<uint64_t> chain_streams;  // derived per-chain stream ids
    size_t n_samples = 0;
    std::vector<std::string> notes;
};

namespace detail {

struct WeightedSeries {
    std::vector<double> xs;
    std::vector<double> ws;  // normalized-enough (common scale)
};

inline ParamSummary summarize(WeightedSeries s) {
    ParamSummary out;
    double wsum = 0, mean = 0;
    for (size_t i = 0; i < s.xs.size(); ++i) {
        wsum += s.ws[i];
        mean += s.ws[i] * s.xs[i];
    }
    mean /= wsum;
    double var = 0;
    for (size_t i = 0; i < s.xs.size(); ++i)
        var += s.ws[i] * (s.xs[i] - mean) * (s.xs[i] - mean);
    var /= wsum;
    out.mean = mean;
    out.sd = std::sqrt(var);

    std::vector<size_t> order(s.xs.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return s.xs[a] < s.xs[b]; });
    auto quantile = [&](double q) {
        double cum = 0;
        for (size_t i : order) {
            cum += s.ws[i];
            if (cum >= q * wsum) return s.xs[i];
        }
        return s.xs[order.back()];
    };
    out.q5 = quantile(0.05);
    out.q50 = quantile(0.50);
    out.q95 = quantile(0.95);
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Self-normalized importance sampling with the prior as proposal: prior
// draws carry no weight of their own, so the weight is exactly the model's
// observation and factor score.

struct IsOptions {
    size_t samples = 10000;
    uint64_t seed = 1;
    int chains = 1;
};

inline InferenceResult importance_sample(const GExpr& program, const Env& data,
                                         const std::vector<ParamSpec>& specs,
                                         const IsOptions& opts) {
    struct Draw {
        std::vector<double> flat;
        double lw;
    };
    std::vector<std::vector<Draw>> per_chain((size_t)opts.chains);

    auto worker = [&](int chain) {
        size_t n = opts.samples / opts.chains +
                   ((size_t)chain < opts.samples % opts.chains ? 1 : 0);
        Rng rng = Rng(opts.seed).split((uint64_t)chain);
        auto& out = per_chain[chain];
        out.reserve(n);
        for (size_t i = 0; i < n; ++i) {
            TraceOptions topts;
            topts.rng = &rng;
            Trace t = run_trace(program, data, topts);
            Draw d;
            d.lw = t.log_weight;
            for (const auto& spec : specs) {
                const Value* v = t.find(spec.name);
                if (!v) throw EvalError("trace is missing parameter '" + spec.name + "'");
                detail::flatten_value(*v, d.flat);
            }
            out.push_back(std::move(d));
        }
    };
    if (opts.chains == 1) {
        worker(0);
    } else {
        std::vector<std::thread> threads;
        for (int c = 0; c < opts.chains; ++c) threads.emplace_back(worker, c);
        for (auto& t : threads) t.join();
    }

    std::vector<Draw> draws;
    for (auto& c : per_chain)
        for (auto& d : c) draws.push_back(std::move(d));

    double max_lw = neg_inf;
    for (const auto& d : draws) max_lw = std::max(max_lw, d.lw);
    if (!(max_lw > neg_inf)) throw EvalError("degenerate-weights: every draw scored zero");
    double wsum = 0, w2sum = 0;
    std::vector<double> ws(draws.size());
    for (size_t i = 0; i < draws.size(); ++i) {
        ws[i] = std::exp(draws[i].lw - max_lw);
        wsum += ws[i];
        w2sum += ws[i] * ws[i];
    }

    InferenceResult res;
    res.seed = opts.seed;
    res.chains = opts.chains;
    for (int chain = 0; chain < opts.chains; ++chain)
        res.chain_streams.push_back(Rng(opts.seed).split((uint64_t)chain).stream());
    res.n_samples = draws.size();
    res.ess = wsum * wsum / w2sum;

    std::vector<std::string> labels;
    {
        const double* p0 = nullptr;
        std::vector<double> zeros;
        for (const auto& spec : specs) {
            zeros.assign(spec.flat_size, 0.0);
            p0 = zeros.data();
            Value example = detail::build_from_flat(data, spec.type, p0);
            detail::component_labels(spec.name, example, labels);
        }
    }
    for (size_t k = 0; k < labels.size(); ++k) {
        detail::WeightedSeries s;
        s.xs.reserve(draws.size());
        for (size_t i = 0; i < draws.size(); ++i) {
            s.xs.push_back(draws[i].flat[k]);
            s.ws.push_back(ws[i]);
        }
        res.params.emplace_back(labels[k], detail::summarize(std::move(s)));
    }
    return res;
}

// ---------------------------------------------------------------------------
// Random-walk Metropolis over the flattened parameter vector.  The target is
// the pinned-trace log weight including prior densities, so bounded uniforms
// score their constant and flat priors reject proposals outside the support.

struct MhOptions {
    size_t samples = 10000;  // post-warmup iterations
    size_t warmup = 1000;
    size_t thin = 10;
    double step = 0.5;
    uint64_t seed = 1;
    int chains = 1;
    std::optional<Env> init;
};

inline InferenceResult metropolis(const GExpr& program, const Env& data,
                                  const std::vector<ParamSpec>& specs, const MhOptions& opts) {
    size_t dim = 0;
    for (const auto& spec : specs) dim += spec.flat_size;

    auto log_weight = [&](const std::vector<double>& flat) {
        Trace pinned;
        const double* p = flat.data();
        for (const auto& spec : specs)
            pinned.set(spec.name, detail::build_from_flat(data, spec.type, p));
        TraceOptions topts;
        topts.pinned = &pinned;
        topts.include_prior_lpdf = true;
        return run_trace(program, data, topts).log_weight;
    };

    std::vector<double> x0(dim);
    {
        size_t at = 0;
        for (const auto& spec : specs) {
            double v;
            if (opts.init && opts.init->find(spec.name)) {
                std::vector<double> flat;
                detail::flatten_value(*opts.init->find(spec.name), flat);
                if (flat.size() != spec.flat_size)
                    throw EvalError("init for '" + spec.name + "' has the wrong shape");
                for (size_t i = 0; i < flat.size(); ++i) x0[at + i] = flat[i];
                at += spec.flat_size;
                continue;
            }
            if (spec.bounded_uniform())
                v = 0.5 * (spec.lower + spec.upper);
            else if (std::isfinite(spec.lower))
                v = spec.lower + 1;
            else if (std::isfinite(spec.upper))
                v = spec.upper - 1;
            else
                v = 0;
            for (size_t i = 0; i < spec.flat_size; ++i) x0[at + i] = v;
            at += spec.flat_size;
        }
    }

    struct ChainOut {
        std::vector<std::vector<double>> kept;
        size_t accepted = 0;
        size_t iters = 0;
    };
    std::vector<ChainOut> chains((size_t)opts.chains);

    auto worker = [&](int chain) {
        Rng rng = Rng(opts.seed).split((uint64_t)chain);
        std::vector<double> x = x0;
        double lw = log_weight(x);
        if (!(lw > neg_inf)) throw EvalError("initial point is outside the support");
        ChainOut& out = chains[chain];
        size_t total = opts.warmup + opts.samples;
        std::vector<double> y(dim);
        for (size_t iter = 1; iter <= total; ++iter) {
            for (size_t i = 0; i < dim; ++i) y[i] = x[i] + opts.step * rng.gauss();
            double lwy = log_weight(y);
            bool accept = false;
            if (lwy > neg_inf) {
                double u = rng.uniform01();
                accept = std::log(u) < lwy - lw;
            }
            if (accept) {
                x = y;
                lw = lwy;
            }
            if (iter > opts.warmup) {
                ++out.iters;
                if (accept) ++out.accepted;
                if ((iter - opts.warmup) % opts.thin == 0) out.kept.push_back(x);
            }
        }
    };
    if (opts.chains == 1) {
        worker(0);
    } else {
        std::vector<std::thread> threads;
        for (int c = 0; c < opts.chains; ++c) threads.emplace_back(worker, c);
        for (auto& t : threads) t.join();
    }

    InferenceResult res;
    res.seed = opts.seed;
    res.chains = opts.chains;
    for (int chain = 0; chain < opts.chains; ++chain)
        res.chain_streams.push_back(Rng(opts.seed).split((uint64_t)chain).stream());
    size_t accepted = 0, iters = 0;
    std::vector<const std::vector<double>*> kept;
    for (const auto& c : chains) {
        accepted += c.accepted;
        iters += c.iters;
        for (const auto& row : c.kept) kept.push_back(&row);
    }
    res.n_samples = kept.size();
    res.accept_rate = iters ? (double)accepted / (double)iters : 0.0;
    if (accepted == 0) res.notes.push_back("zero-acceptance: no proposal was accepted");

    std::vector<std::string> labels;
    {
        std::vector<double> zeros;
        for (const auto& spec : specs) {
            zeros.assign(spec.flat_size, 0.0);
            const double* p0 = zeros.data();
            Value example = detail::build_from_flat(data, spec.type, p0);
            detail::component_labels(spec.name, example, labels);
        }
    }
    for (size_t k = 0; k < labels.size(); ++k) {
        detail::WeightedSeries s;
        s.xs.reserve(kept.size());
        for (const auto* row : kept) {
            s.xs.push_back((*row)[k]);
            s.ws.push_back(1.0);
        }
        if (s.xs.empty()) throw EvalError("no samples were recorded");
        res.params.emplace_back(labels[k], detail::summarize(std::move(s)));
    }
    return res;
}

}  // namespace stangen
