#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "stangen/distributions.hpp"
#include "stangen/value.hpp"

namespace stangen {

namespace detail {

inline Value scalar_arith(const std::string& op, const Value& a, const Value& b) {
    if (a.is<IntV>() && b.is<IntV>()) {
        long long x = a.as<IntV>()->v, y = b.as<IntV>()->v;
        if (op == "+") return int_v(x + y);
        if (op == "-") return int_v(x - y);
        if (op == "*") return int_v(x * y);
        if (op == "/") {
            if (y == 0) throw EvalError("integer division by zero");
            return int_v(x / y);  // truncation toward zero
        }
    }
    double x = as_real(a), y = as_real(b);
    if (op == "+") return real_v(x + y);
    if (op == "-") return real_v(x - y);
    if (op == "*") return real_v(x * y);
    if (op == "/") return real_v(x / y);
    throw EvalError("unknown arithmetic operator '" + op + "'");
}

inline Value rebuild_like(const Value& proto, std::vector<Value> elems) {
    if (proto.is<VecV>() || proto.is<RowVecV>()) {
        std::vector<double> out;
        out.reserve(elems.size());
        for (const auto& e : elems) out.push_back(as_real(e));
        if (proto.is<VecV>()) return Value(VecV{std::move(out)});
        return Value(RowVecV{std::move(out)});
    }
    if (proto.is<MatV>()) {
        MatV m;
        for (const auto& e : elems) {
            if (const auto* r = e.as<RowVecV>())
                m.rows.push_back(r->v);
            else
                throw EvalError("matrix rows must stay row vectors");
        }
        return Value(std::move(m));
    }
    return Value(ArrayV{std::move(elems)});
}

inline Value ew_arith(const std::string& op, const Value& a, const Value& b) {
    bool ca = is_container(a), cb = is_container(b);
    if (!ca && !cb) return scalar_arith(op, a, b);
    const Value& proto = ca ? a : b;
    size_t n = outer_size(proto);
    if (ca && cb && outer_size(b) != n)
        throw EvalError("shape mismatch in elementwise '" + op + "'");
    std::vector<Value> elems;
    elems.reserve(n);
    for (size_t i = 1; i <= n; ++i) {
        Value ea = ca ? element_at(a, (long long)i) : a;
        Value eb = cb ? element_at(b, (long long)i) : b;
        elems.push_back(ew_arith(op, ea, eb));
    }
    return rebuild_like(proto, std::move(elems));
}

inline Value ew_unary(const Value& v, double (*fn)(double)) {
    if (!is_container(v)) return real_v(fn(as_real(v)));
    size_t n = outer_size(v);
    std::vector<Value> elems;
    elems.reserve(n);
    for (size_t i = 1; i <= n; ++i) elems.push_back(ew_unary(element_at(v, (long long)i), fn));
    return rebuild_like(v, std::move(elems));
}

inline void sum_into(const Value& v, double& total, bool& all_int) {
    if (const auto* i = v.as<IntV>()) {
        total += (double)i->v;
        return;
    }
    if (const auto* r = v.as<RealV>()) {
        total += r->v;
        all_int = false;
        return;
    }
    if (!is_container(v)) throw EvalError("sum expects numeric values");
    if (!v.is<ArrayV>()) all_int = false;
    size_t n = outer_size(v);
    for (size_t i = 1; i <= n; ++i) sum_into(element_at(v, (long long)i), total, all_int);
}

inline size_t count_leaves(const Value& v) {
    if (!is_container(v)) return 1;
    size_t n = outer_size(v), total = 0;
    for (size_t i = 1; i <= n; ++i) total += count_leaves(element_at(v, (long long)i));
    return total;
}

inline Value broadcast_value(const Value& x, const std::vector<long long>& shape, size_t at) {
    if (at == shape.size()) return x;
    ArrayV out;
    out.elems.reserve((size_t)shape[at]);
    for (long long i = 0; i < shape[at]; ++i)
        out.elems.push_back(broadcast_value(x, shape, at + 1));
    return Value(std::move(out));
}

}  // namespace detail

inline Value call_builtin(const std::string& fn, const std::vector<Value>& args) {
    auto need = [&](size_t n) {
        if (args.size() != n)
            throw EvalError("'" + fn + "' expects " + std::to_string(n) + " arguments");
    };
    if (fn == "+" || fn == "*" || fn == "/" || (fn == "-" && args.size() == 2)) {
        need(2);
        return detail::ew_arith(fn, args[0], args[1]);
    }
    if (fn == "-") {
        need(1);
        if (args[0].is<IntV>()) return int_v(-args[0].as<IntV>()->v);
        if (!is_container(args[0])) return real_v(-as_real(args[0]));
        return detail::ew_unary(args[0], [](double x) { return -x; });
    }
    if (fn == "^") {
        need(2);
        return real_v(std::pow(as_real(args[0]), as_real(args[1])));
    }
    if (fn == "<" || fn == "<=" || fn == ">" || fn == ">=" || fn == "==" || fn == "!=") {
        need(2);
        double a = as_real(args[0]), b = as_real(args[1]);
        bool r = fn == "<"    ? a < b
                 : fn == "<=" ? a <= b
                 : fn == ">"  ? a > b
                 : fn == ">=" ? a >= b
                 : fn == "==" ? a == b
                              : a != b;
        return int_v(r ? 1 : 0);
    }
    if (fn == "&&" || fn == "||") {
        need(2);
        bool a = as_real(args[0]) != 0.0, b = as_real(args[1]) != 0.0;
        return int_v((fn == "&&" ? (a && b) : (a || b)) ? 1 : 0);
    }
    if (fn == "!") {
        need(1);
        return int_v(as_real(args[0]) == 0.0 ? 1 : 0);
    }
    if (fn == "exp") {
        need(1);
        return detail::ew_unary(args[0], [](double x) { return std::exp(x); });
    }
    if (fn == "log") {
        need(1);
        return detail::ew_unary(args[0], [](double x) { return std::log(x); });
    }
    if (fn == "sqrt") {
        need(1);
        return detail::ew_unary(args[0], [](double x) { return std::sqrt(x); });
    }
    if (fn == "fabs") {
        need(1);
        return detail::ew_unary(args[0], [](double x) { return std::fabs(x); });
    }
    if (fn == "inv_logit") {
        need(1);
        return detail::ew_unary(args[0], [](double x) { return 1.0 / (1.0 + std::exp(-x)); });
    }
    if (fn == "sum") {
        need(1);
        double total = 0;
        bool all_int = args[0].is<ArrayV>() || args[0].is<IntV>();
        detail::sum_into(args[0], total, all_int);
        if (all_int) return int_v((long long)total);
        return real_v(total);
    }
    if (fn == "mean") {
        need(1);
        double total = 0;
        bool all_int = true;
        detail::sum_into(args[0], total, all_int);
        size_t n = detail::count_leaves(args[0]);
        if (n == 0) throw EvalError("mean of an empty container");
        return real_v(total / (double)n);
    }
    if (fn == "dot_self") {
        need(1);
        const std::vector<double>* xs = nullptr;
        if (const auto* v = args[0].as<VecV>()) xs = &v->v;
        if (const auto* v = args[0].as<RowVecV>()) xs = &v->v;
        if (!xs) throw EvalError("dot_self expects a vector");
        double s = 0;
        for (double x : *xs) s += x * x;
        return real_v(s);
    }
    if (fn == "length") {
        need(1);
        return int_v((long long)outer_size(args[0]));
    }
    if (fn == "shape") {
        need(1);
        ArrayV out;
        for (long long d : value_shape(args[0])) out.elems.push_back(int_v(d));
        return Value(std::move(out));
    }
    if (fn == "broadcast") {
        need(2);
        std::vector<long long> shape;
        if (const auto* a = args[1].as<ArrayV>()) {
            for (const auto& e : a->elems) shape.push_back(as_int(e));
        } else {
            throw EvalError("broadcast shape must be an array of sizes");
        }
        return detail::broadcast_value(args[0], shape, 0);
    }
    if (fn == "broadcast_vector" || fn == "broadcast_row_vector") {
        need(2);
        std::vector<double> out((size_t)as_int(args[1]), as_real(args[0]));
        if (fn == "broadcast_vector") return Value(VecV{std::move(out)});
        return Value(RowVecV{std::move(out)});
    }
    if (fn == "broadcast_matrix") {
        need(3);
        size_t r = (size_t)as_int(args[1]), c = (size_t)as_int(args[2]);
        return Value(MatV{std::vector<std::vector<double>>(
            r, std::vector<double>(c, as_real(args[0])))});
    }
    if (fn == "lpdf") {
        need(2);
        const auto* d = args[0].as<DistV>();
        if (!d) throw EvalError("lpdf expects a distribution value");
        return real_v(dist_lpdf(*d, args[1]));
    }
    throw EvalError("unknown builtin '" + fn + "'");
}

}  // namespace stangen
