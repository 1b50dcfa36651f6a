#pragma once

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "stangen/numfmt.hpp"

namespace stangen {

struct EvalError : std::runtime_error {
    explicit EvalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct Value;

struct IntV {
    long long v = 0;
};
struct RealV {
    double v = 0.0;
};
struct ArrayV {
    std::vector<Value> elems;
};
struct VecV {
    std::vector<double> v;
};
struct RowVecV {
    std::vector<double> v;
};
struct MatV {
    std::vector<std::vector<double>> rows;
};
struct DistV {
    std::string name;
    std::vector<Value> params;
};

struct Value {
    std::variant<IntV, RealV, ArrayV, VecV, RowVecV, MatV, DistV> node;

    Value() : node(RealV{0.0}) {}
    Value(IntV x) : node(std::move(x)) {}
    Value(RealV x) : node(std::move(x)) {}
    Value(ArrayV x) : node(std::move(x)) {}
    Value(VecV x) : node(std::move(x)) {}
    Value(RowVecV x) : node(std::move(x)) {}
    Value(MatV x) : node(std::move(x)) {}
    Value(DistV x) : node(std::move(x)) {}

    template <class T>
    const T* as() const {
        return std::get_if<T>(&node);
    }
    template <class T>
    T* as() {
        return std::get_if<T>(&node);
    }
    template <class T>
    bool is() const {
        return std::holds_alternative<T>(node);
    }
    bool scalar() const { return is<IntV>() || is<RealV>(); }
};

inline Value int_v(long long v) { return Value(IntV{v}); }
inline Value real_v(double v) { return Value(RealV{v}); }

inline double as_real(const Value& v) {
    if (const auto* i = v.as<IntV>()) return static_cast<double>(i->v);
    if (const auto* r = v.as<RealV>()) return r->v;
    throw EvalError("expected a scalar value");
}

inline long long as_int(const Value& v) {
    if (const auto* i = v.as<IntV>()) return i->v;
    if (const auto* r = v.as<RealV>()) {
        double rd = std::round(r->v);
        if (rd == r->v) return static_cast<long long>(rd);
    }
    throw EvalError("expected an integer value");
}

// Container element count along the outermost axis.
inline size_t outer_size(const Value& v) {
    if (const auto* a = v.as<ArrayV>()) return a->elems.size();
    if (const auto* x = v.as<VecV>()) return x->v.size();
    if (const auto* x = v.as<RowVecV>()) return x->v.size();
    if (const auto* m = v.as<MatV>()) return m->rows.size();
    throw EvalError("expected a container value");
}

inline bool is_container(const Value& v) {
    return v.is<ArrayV>() || v.is<VecV>() || v.is<RowVecV>() || v.is<MatV>();
}

// 1-based element access, following the source language convention.
inline Value element_at(const Value& v, long long i) {
    auto check = [&](size_t n) {
        if (i < 1 || static_cast<size_t>(i) > n)
            throw EvalError("index " + std::to_string(i) + " out of bounds (size " +
                            std::to_string(n) + ")");
    };
    if (const auto* a = v.as<ArrayV>()) {
        check(a->elems.size());
        return a->elems[i - 1];
    }
    if (const auto* x = v.as<VecV>()) {
        check(x->v.size());
        return real_v(x->v[i - 1]);
    }
    if (const auto* x = v.as<RowVecV>()) {
        check(x->v.size());
        return real_v(x->v[i - 1]);
    }
    if (const auto* m = v.as<MatV>()) {
        check(m->rows.size());
        return Value(RowVecV{m->rows[i - 1]});
    }
    throw EvalError("cannot index a scalar value");
}

// Functional update at a 1-based index path.
inline Value with_element(const Value& v, const std::vector<long long>& path, size_t at,
                          const Value& replacement) {
    if (at == path.size()) return replacement;
    long long i = path[at];
    auto check = [&](size_t n) {
        if (i < 1 || static_cast<size_t>(i) > n)
            throw EvalError("index " + std::to_string(i) + " out of bounds (size " +
                            std::to_string(n) + ")");
    };
    if (const auto* a = v.as<ArrayV>()) {
        check(a->elems.size());
        ArrayV out = *a;
        out.elems[i - 1] = with_element(out.elems[i - 1], path, at + 1, replacement);
        return Value(std::move(out));
    }
    if (v.is<VecV>() || v.is<RowVecV>()) {
        if (at + 1 != path.size()) throw EvalError("too many indices for a vector");
        double r = as_real(replacement);
        if (const auto* x = v.as<VecV>()) {
            check(x->v.size());
            VecV out = *x;
            out.v[i - 1] = r;
            return Value(std::move(out));
        }
        const auto* x = v.as<RowVecV>();
        check(x->v.size());
        RowVecV out = *x;
        out.v[i - 1] = r;
        return Value(std::move(out));
    }
    if (const auto* m = v.as<MatV>()) {
        check(m->rows.size());
        if (at + 2 == path.size()) {
            long long j = path[at + 1];
            if (j < 1 || static_cast<size_t>(j) > m->rows[i - 1].size())
                throw EvalError("column index out of bounds");
            MatV out = *m;
            out.rows[i - 1][j - 1] = as_real(replacement);
            return Value(std::move(out));
        }
        throw EvalError("matrix cell update needs exactly two indices");
    }
    throw EvalError("cannot index-assign a scalar value");
}

inline std::vector<long long> value_shape(const Value& v) {
    if (const auto* a = v.as<ArrayV>()) {
        std::vector<long long> s{(long long)a->elems.size()};
        if (!a->elems.empty()) {
            auto inner = value_shape(a->elems[0]);
            s.insert(s.end(), inner.begin(), inner.end());
        }
        return s;
    }
    if (const auto* x = v.as<VecV>()) return {(long long)x->v.size()};
    if (const auto* x = v.as<RowVecV>()) return {(long long)x->v.size()};
    if (const auto* m = v.as<MatV>())
        return {(long long)m->rows.size(),
                m->rows.empty() ? 0 : (long long)m->rows[0].size()};
    return {};
}

inline bool value_equal(const Value& a, const Value& b) {
    if (a.node.index() != b.node.index()) return false;
    if (const auto* x = a.as<IntV>()) return x->v == b.as<IntV>()->v;
    if (const auto* x = a.as<RealV>()) return x->v == b.as<RealV>()->v;
    if (const auto* x = a.as<VecV>()) return x->v == b.as<VecV>()->v;
    if (const auto* x = a.as<RowVecV>()) return x->v == b.as<RowVecV>()->v;
    if (const auto* x = a.as<MatV>()) return x->rows == b.as<MatV>()->rows;
    if (const auto* x = a.as<ArrayV>()) {
        const auto& y = *b.as<ArrayV>();
        if (x->elems.size() != y.elems.size()) return false;
        for (size_t i = 0; i < x->elems.size(); ++i)
            if (!value_equal(x->elems[i], y.elems[i])) return false;
        return true;
    }
    if (const auto* x = a.as<DistV>()) {
        const auto& y = *b.as<DistV>();
        if (x->name != y.name || x->params.size() != y.params.size()) return false;
        for (size_t i = 0; i < x->params.size(); ++i)
            if (!value_equal(x->params[i], y.params[i])) return false;
        return true;
    }
    return false;
}

inline std::string value_to_string(const Value& v) {
    if (const auto* x = v.as<IntV>()) return std::to_string(x->v);
    if (const auto* x = v.as<RealV>()) return format_double(x->v);
    if (const auto* x = v.as<VecV>()) {
        std::string s = "[";
        for (size_t i = 0; i < x->v.size(); ++i)
            s += (i ? ", " : "") + format_double(x->v[i]);
        return s + "]";
    }
    if (const auto* x = v.as<RowVecV>()) {
        std::string s = "row[";
        for (size_t i = 0; i < x->v.size(); ++i)
            s += (i ? ", " : "") + format_double(x->v[i]);
        return s + "]";
    }
    if (const auto* m = v.as<MatV>()) {
        std::string s = "[";
        for (size_t i = 0; i < m->rows.size(); ++i) {
            s += i ? ", [" : "[";
            for (size_t j = 0; j < m->rows[i].size(); ++j)
                s += (j ? ", " : "") + format_double(m->rows[i][j]);
            s += "]";
        }
        return s + "]";
    }
    if (const auto* a = v.as<ArrayV>()) {
        std::string s = "{";
        for (size_t i = 0; i < a->elems.size(); ++i)
            s += (i ? ", " : "") + value_to_string(a->elems[i]);
        return s + "}";
    }
    if (const auto* d = v.as<DistV>()) {
        std::string s = d->name + "(";
        for (size_t i = 0; i < d->params.size(); ++i)
            s += (i ? ", " : "") + value_to_string(d->params[i]);
        return s + ")";
    }
    return "?";
}

// Environment threaded through evaluation; `target` is the reserved
// log-density accumulator, initialized to zero.
struct Env {
    std::map<std::string, Value> vars;
    double target = 0.0;

    const Value* find(const std::string& name) const {
        auto it = vars.find(name);
        return it == vars.end() ? nullptr : &it->second;
    }
    void set(const std::string& name, Value v) { vars[name] = std::move(v); }
};

}  // namespace stangen
