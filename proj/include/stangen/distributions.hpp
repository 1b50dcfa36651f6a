#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "stangen/rng.hpp"
#include "stangen/value.hpp"

namespace stangen {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();
inline constexpr double log_two_pi = 1.8378770664093454835606594728112;

namespace detail {

inline double lbeta(double a, double b) {
    return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

inline double lchoose(double n, double k) {
    return std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1);
}

inline double log_sum_exp(const std::vector<double>& xs) {
    double m = neg_inf;
    for (double x : xs) m = std::max(m, x);
    if (m == neg_inf) return neg_inf;
    double s = 0;
    for (double x : xs) s += std::exp(x - m);
    return m + std::log(s);
}

inline std::vector<double> logits_of(const Value& v) {
    if (const auto* x = v.as<VecV>()) return x->v;
    if (const auto* x = v.as<RowVecV>()) return x->v;
    if (const auto* a = v.as<ArrayV>()) {
        std::vector<double> out;
        out.reserve(a->elems.size());
        for (const auto& e : a->elems) out.push_back(as_real(e));
        return out;
    }
    throw EvalError("categorical_logits expects a vector of logits");
}

}  // namespace detail

// Runtime distribution registry: log densities in natural log including
// normalizing constants; discrete families use log probability mass.  The
// flat prior has no sampler and density zero on its support.
struct DistDef {
    size_t arity = 0;
    bool has_sampler = true;
    bool discrete = false;
    bool atomic_params = false;  // params never broadcast elementwise
};

inline const std::map<std::string, DistDef>& dist_table() {
    static const std::map<std::string, DistDef> table = {
        {"normal", {2, true, false, false}},
        {"beta", {2, true, false, false}},
        {"bernoulli", {1, true, true, false}},
        {"uniform", {2, true, false, false}},
        {"improper_uniform", {2, false, false, false}},
        {"exponential", {1, true, false, false}},
        {"binomial_logit", {2, true, true, false}},
        {"categorical_logits", {1, true, true, true}},
    };
    return table;
}

inline bool is_runtime_distribution(const std::string& name) {
    return dist_table().count(name) > 0;
}

inline double scalar_lpdf(const std::string& name, const std::vector<Value>& params,
                          const Value& value) {
    if (name == "normal") {
        double mu = as_real(params[0]), sigma = as_real(params[1]);
        double x = as_real(value);
        if (!(sigma > 0)) return neg_inf;
        double z = (x - mu) / sigma;
        return -0.5 * z * z - std::log(sigma) - 0.5 * log_two_pi;
    }
    if (name == "beta") {
        double a = as_real(params[0]), b = as_real(params[1]);
        double x = as_real(value);
        if (!(a > 0) || !(b > 0)) return neg_inf;
        if (!(x > 0.0) || !(x < 1.0)) return neg_inf;
        return (a - 1) * std::log(x) + (b - 1) * std::log1p(-x) - detail::lbeta(a, b);
    }
    if (name == "bernoulli") {
        double p = as_real(params[0]);
        double k = as_real(value);
        if (p < 0 || p > 1) return neg_inf;
        if (k == 1.0) return std::log(p);
        if (k == 0.0) return std::log1p(-p);
        return neg_inf;
    }
    if (name == "uniform") {
        double a = as_real(params[0]), b = as_real(params[1]);
        double x = as_real(value);
        if (!(b > a)) return neg_inf;
        if (x < a || x > b) return neg_inf;
        return -std::log(b - a);
    }
    if (name == "improper_uniform") {
        double lo = as_real(params[0]), hi = as_real(params[1]);
        double x = as_real(value);
        return (x >= lo && x <= hi) ? 0.0 : neg_inf;
    }
    if (name == "exponential") {
        double rate = as_real(params[0]);
        double x = as_real(value);
        if (!(rate > 0) || x < 0) return neg_inf;
        return std::log(rate) - rate * x;
    }
    if (name == "binomial_logit") {
        double n_trials = as_real(params[0]);
        double alpha = as_real(params[1]);
        double k = as_real(value);
        if (k < 0 || k > n_trials) return neg_inf;
        return detail::lchoose(n_trials, k) - k * std::log1p(std::exp(-alpha)) -
               (n_trials - k) * std::log1p(std::exp(alpha));
    }
    if (name == "categorical_logits") {
        auto theta = detail::logits_of(params[0]);
        long long k = as_int(value);
        if (k < 1 || static_cast<size_t>(k) > theta.size()) return neg_inf;
        return theta[k - 1] - detail::log_sum_exp(theta);
    }
    throw EvalError("unknown distribution '" + name + "'");
}

inline Value scalar_sample(const std::string& name, const std::vector<Value>& params,
                           Rng& rng) {
    if (name == "normal") {
        double mu = as_real(params[0]), sigma = as_real(params[1]);
        if (!(sigma > 0)) throw EvalError("normal scale must be positive");
        return real_v(mu + sigma * rng.gauss());
    }
    if (name == "beta") {
        double a = as_real(params[0]), b = as_real(params[1]);
        double ga = rng.gamma(a), gb = rng.gamma(b);
        return real_v(ga / (ga + gb));
    }
    if (name == "bernoulli") {
        double p = as_real(params[0]);
        return int_v(rng.uniform01() < p ? 1 : 0);
    }
    if (name == "uniform") {
        double a = as_real(params[0]), b = as_real(params[1]);
        return real_v(a + (b - a) * rng.uniform01());
    }
    if (name == "exponential") {
        double rate = as_real(params[0]);
        return real_v(-std::log1p(-rng.uniform01()) / rate);
    }
    if (name == "binomial_logit") {
        long long n_trials = as_int(params[0]);
        double alpha = as_real(params[1]);
        double p = 1.0 / (1.0 + std::exp(-alpha));
        return int_v(rng.binomial(n_trials, p));
    }
    if (name == "categorical_logits") {
        auto theta = detail::logits_of(params[0]);
        double lse = detail::log_sum_exp(theta);
        double u = rng.uniform01();
        double cum = 0;
        for (size_t k = 0; k < theta.size(); ++k) {
            cum += std::exp(theta[k] - lse);
            if (u <= cum) return int_v(static_cast<long long>(k) + 1);
        }
        return int_v(static_cast<long long>(theta.size()));
    }
    if (name == "improper_uniform")
        throw EvalError("improper-prior-needs-mcmc: '" + name + "' has no sampler");
    throw EvalError("unknown distribution '" + name + "'");
}

namespace detail {

// Projects the i-th element of a broadcast parameter: containers index
// through, scalars (and atomic parameters) pass unchanged.
inline Value project(const Value& p, long long i, bool atomic) {
    if (atomic || !is_container(p)) return p;
    return element_at(p, i);
}

}  // namespace detail

// Log density of `value` under the distribution, broadcasting elementwise
// over container observations and summing, which matches the vectorized
// sampling-statement semantics.
inline double dist_lpdf(const DistV& d, const Value& value) {
    auto it = dist_table().find(d.name);
    if (it == dist_table().end()) throw EvalError("unknown distribution '" + d.name + "'");
    const DistDef& def = it->second;
    if (d.params.size() != def.arity)
        throw EvalError("distribution '" + d.name + "' expects " + std::to_string(def.arity) +
                        " parameters");
    if (is_container(value)) {
        double sum = 0;
        size_t n = outer_size(value);
        for (size_t i = 1; i <= n; ++i) {
            DistV proj{d.name, {}};
            for (const auto& p : d.params)
                proj.params.push_back(detail::project(p, (long long)i, def.atomic_params));
            sum += dist_lpdf(proj, element_at(value, (long long)i));
        }
        return sum;
    }
    return scalar_lpdf(d.name, d.params, value);
}

// Forward draw matching the parameter broadcast shape and container kind.
inline Value dist_sample(const DistV& d, Rng& rng) {
    auto it = dist_table().find(d.name);
    if (it == dist_table().end()) throw EvalError("unknown distribution '" + d.name + "'");
    const DistDef& def = it->second;
    if (!def.has_sampler)
        throw EvalError("improper-prior-needs-mcmc: '" + d.name +
                        "' cannot be sampled directly");
    if (!def.atomic_params) {
        for (const auto& p : d.params) {
            if (!is_container(p)) continue;
            size_t n = outer_size(p);
            std::vector<Value> elems;
            elems.reserve(n);
            for (size_t i = 1; i <= n; ++i) {
                DistV proj{d.name, {}};
                for (const auto& q : d.params)
                    proj.params.push_back(detail::project(q, (long long)i, false));
                elems.push_back(dist_sample(proj, rng));
            }
            if (p.is<VecV>() || p.is<RowVecV>()) {
                std::vector<double> xs;
                xs.reserve(n);
                for (const auto& e : elems) xs.push_back(as_real(e));
                if (p.is<VecV>()) return Value(VecV{std::move(xs)});
                return Value(RowVecV{std::move(xs)});
            }
            if (p.is<MatV>()) {
                MatV m;
                for (const auto& e : elems) m.rows.push_back(e.as<RowVecV>()->v);
                return Value(std::move(m));
            }
            return Value(ArrayV{std::move(elems)});
        }
    }
    return scalar_sample(d.name, d.params, rng);
}

}  // namespace stangen
