#pragma once

#include <map>
#include <string>
#include <vector>

#include "stangen/internal_types.hpp"

namespace stangen {

struct SchemaArg {
    IType type;
    bool vect = false;  // whether the argument position broadcasts
};

// One instantiable signature. Quantified size/dim variables are encoded as
// negative ids, remapped to fresh solver variables at each use.  A schema
// with `observed` is a distribution: params -> observed -> real, and its
// result in expression position is the observed (sample) type.
struct FuncSchema {
    std::vector<SchemaArg> args;
    IType result;
    std::optional<SchemaArg> observed;
};

class Registry {
public:
    Registry() { seed(); }

    const std::vector<FuncSchema>* lookup(const std::string& name) const {
        auto it = table_.find(name);
        return it == table_.end() ? nullptr : &it->second;
    }

    bool is_distribution(const std::string& name) const {
        const auto* ss = lookup(name);
        if (!ss) return false;
        for (const auto& s : *ss)
            if (s.observed) return true;
        return false;
    }

    void add(const std::string& name, FuncSchema schema) {
        table_[name].push_back(std::move(schema));
    }

private:
    std::map<std::string, std::vector<FuncSchema>> table_;

    static Size sv(int k) { return Size::of_var(-k); }
    static Dim dv(int k) { return Dim::of_var(-k); }

    void add_fn(const std::string& name, std::vector<SchemaArg> args, IType result) {
        add(name, FuncSchema{std::move(args), std::move(result), std::nullopt});
    }

    // A distribution over an observed slot of type `obs`, with `params`
    // co-shaped slots; in expression position the call yields `obs`.
    void add_dist(const std::string& name, std::vector<SchemaArg> params, IType obs) {
        add(name, FuncSchema{std::move(params), obs, SchemaArg{obs, true}});
    }

    // Location/scale style families: every parameter broadcasts against the
    // observed shape, for observed scalar / dim-array / vector / row_vector.
    void add_scalar_family(const std::string& name, const std::vector<IType>& param_bases,
                           IType obs_base) {
        auto lift = [&](const IType& base, const IType& shape_proto) -> IType {
            if (shape_proto.kind == IType::Kind::ArrayDim)
                return t_array_dim(base, *shape_proto.dim);
            if (shape_proto.kind == IType::Kind::Vector ||
                shape_proto.kind == IType::Kind::RowVector) {
                if (base.kind == IType::Kind::Real) {
                    IType t = shape_proto;
                    return t;
                }
                // int params inside vector contexts stay scalar-liftable
                return base;
            }
            return base;
        };
        const IType shapes[] = {
            t_real(),                       // scalar signature
            t_array_dim(t_real(), dv(1)),   // any nesting of arrays
            t_vector(sv(1)),
            t_row_vector(sv(1)),
        };
        for (const auto& proto : shapes) {
            std::vector<SchemaArg> args;
            for (const auto& pb : param_bases) args.push_back({lift(pb, proto), true});
            IType obs = obs_base;
            if (proto.kind == IType::Kind::ArrayDim) {
                obs = t_array_dim(obs_base, *proto.dim);
            } else if (proto.kind != IType::Kind::Real) {
                if (obs_base.kind == IType::Kind::Real)
                    obs = proto;
                else
                    continue;  // no int vectors in Stan
            }
            add_dist(name, std::move(args), obs);
        }
    }

    void seed() {
        const IType R = t_real();
        const IType I = t_int();
        const IType V = t_vector(sv(1));
        const IType RV = t_row_vector(sv(1));
        const IType M = t_matrix(sv(1), sv(2));
        const IType AI = t_array_dim(t_int(), dv(1));
        const IType AR = t_array_dim(t_real(), dv(1));

        // arithmetic; scalar forms first so exact matches win the tie-break
        for (const char* op : {"+", "-", "*", "/"}) {
            add_fn(op, {{I, false}, {I, false}}, I);
            add_fn(op, {{R, false}, {R, false}}, R);
            add_fn(op, {{R, false}, {V, false}}, V);
            add_fn(op, {{V, false}, {R, false}}, V);
            add_fn(op, {{R, false}, {RV, false}}, RV);
            add_fn(op, {{RV, false}, {R, false}}, RV);
            add_fn(op, {{R, false}, {M, false}}, M);
            add_fn(op, {{M, false}, {R, false}}, M);
            if (op[0] == '+' || op[0] == '-') {
                add_fn(op, {{V, false}, {V, false}}, V);
                add_fn(op, {{RV, false}, {RV, false}}, RV);
                add_fn(op, {{M, false}, {M, false}}, M);
            }
            // elementwise over arrays, broadcasting either operand
            add_fn(op, {{t_array_dim(t_int(), dv(1)), true}, {t_array_dim(t_int(), dv(1)), true}},
                   t_array_dim(t_int(), dv(1)));
            add_fn(op, {{t_array_dim(t_real(), dv(1)), true},
                        {t_array_dim(t_real(), dv(1)), true}},
                   t_array_dim(t_real(), dv(1)));
        }
        // unary negation
        add_fn("-", {{I, false}}, I);
        add_fn("-", {{R, false}}, R);
        add_fn("-", {{V, false}}, V);
        add_fn("-", {{RV, false}}, RV);
        add_fn("-", {{M, false}}, M);
        add_fn("-", {{AR, false}}, AR);

        add_fn("^", {{R, false}, {R, false}}, R);

        for (const char* op : {"<", "<=", ">", ">=", "==", "!="}) {
            add_fn(op, {{R, false}, {R, false}}, I);
        }
        add_fn("&&", {{R, false}, {R, false}}, I);
        add_fn("||", {{R, false}, {R, false}}, I);
        add_fn("!", {{R, false}}, I);

        for (const char* fn : {"exp", "log", "sqrt", "fabs", "inv_logit"}) {
            add_fn(fn, {{R, false}}, R);
            add_fn(fn, {{V, false}}, V);
            add_fn(fn, {{RV, false}}, RV);
            add_fn(fn, {{M, false}}, M);
            add_fn(fn, {{AR, false}}, AR);
        }

        add_fn("sum", {{V, false}}, R);
        add_fn("sum", {{RV, false}}, R);
        add_fn("sum", {{AI, false}}, I);
        add_fn("sum", {{AR, false}}, R);
        add_fn("mean", {{V, false}}, R);
        add_fn("mean", {{RV, false}}, R);
        add_fn("mean", {{AI, false}}, R);
        add_fn("mean", {{AR, false}}, R);
        add_fn("dot_self", {{V, false}}, R);
        add_fn("dot_self", {{RV, false}}, R);

        // distributions
        add_scalar_family("normal", {R, R}, R);
        add_scalar_family("beta", {R, R}, R);
        add_scalar_family("uniform", {R, R}, R);
        add_scalar_family("exponential", {R}, R);
        add_scalar_family("bernoulli", {R}, I);
        add_scalar_family("binomial_logit", {I, R}, I);
        // categorical over logits: one simplex-sized parameter shared by all
        // observations
        add_dist("categorical_logits", {{V, false}}, I);
        add_dist("categorical_logits", {{t_array_dim(t_real(), dv(1)), false}}, I);
        add_dist("categorical_logits", {{t_vector(sv(1)), false}},
                 t_array_dim(t_int(), dv(1)));
    }
};

inline const Registry& builtin_registry() {
    static Registry reg;
    return reg;
}

}  // namespace stangen
