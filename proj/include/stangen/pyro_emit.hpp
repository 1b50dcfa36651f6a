#pragma once

#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "stangen/gprob_text.hpp"
#include "stangen/pipeline.hpp"

namespace stangen {

namespace pyro {

// Expression printing in Python syntax: 1-based indices shift down, logical
// operators spell out, and dotted tensor paths route through the lifted
// module's parameter dictionary (model) or a mangled local (guide).
struct ExprPrinter {
    bool in_model = true;
    const std::set<std::string>* lifted_networks = nullptr;

    std::string mangle(const std::string& dotted) const {
        std::string out = dotted;
        size_t pos;
        while ((pos = out.find('.')) != std::string::npos) out.replace(pos, 1, "__");
        return out;
    }

    std::string dotted_ref(const std::string& name) const {
        size_t dot = name.find('.');
        std::string root = name.substr(0, dot);
        std::string path = name.substr(dot + 1);
        if (in_model) return root + "_params['" + path + "']";
        return mangle(name);
    }

    std::string index_shift(const Expr& e) const {
        if (const auto* i = e.as<IntLit>()) return std::to_string(i->value - 1);
        return print(e, 5) + " - 1";
    }

    std::string print(const Expr& e, int parent_prec = 0) const {
        struct Vis {
            const ExprPrinter& p;
            const Expr& e;
            int parent_prec;
            std::string operator()(const IntLit& x) const { return std::to_string(x.value); }
            std::string operator()(const RealLit& x) const {
                if (std::isinf(x.value))
                    return x.value > 0 ? "float('inf')" : "float('-inf')";
                return format_double(x.value);
            }
            std::string operator()(const VarRef& x) const {
                if (x.name.find('.') != std::string::npos) return p.dotted_ref(x.name);
                return x.name;
            }
            std::string operator()(const ArrayLit& x) const {
                std::string out = "[";
                for (size_t i = 0; i < x.elems.size(); ++i)
                    out += (i ? ", " : "") + p.print(x.elems[i]);
                return out + "]";
            }
            std::string operator()(const VectorLit& x) const {
                std::string out = "[";
                for (size_t i = 0; i < x.elems.size(); ++i)
                    out += (i ? ", " : "") + p.print(x.elems[i]);
                return out + "]";
            }
            std::string operator()(const MatrixLit& x) const {
                std::string out = "[";
                for (size_t i = 0; i < x.rows.size(); ++i) {
                    out += i ? ", [" : "[";
                    for (size_t j = 0; j < x.rows[i].size(); ++j)
                        out += (j ? ", " : "") + p.print(x.rows[i][j]);
                    out += "]";
                }
                return out + "]";
            }
            std::string operator()(const IndexExpr& x) const {
                std::string out = p.print(*x.target, 9) + "[";
                for (size_t i = 0; i < x.indices.size(); ++i)
                    out += (i ? ", " : "") + p.index_shift(x.indices[i]);
                return out + "]";
            }
            std::string operator()(const CallExpr& x) const { return p.print_call(x, parent_prec); }
        };
        return std::visit(Vis{*this, e, parent_prec}, e.node);
    }

    std::string print_call(const CallExpr& x, int parent_prec) const {
        // shape(w) reads the tensor's runtime shape
        if (x.fn == "shape" && x.args.size() == 1) {
            const auto* v = x.args[0].as<VarRef>();
            std::string base = v && v->name.find('.') != std::string::npos
                                   ? v->name
                                   : print(x.args[0], 9);
            return base + ".shape";
        }
        if (x.fn.rfind("broadcast", 0) == 0) return print_broadcast(x);

        int prec = detail::operator_precedence(x.fn, x.args.size());
        if (prec < 0) {
            std::string name = x.fn;
            if (lifted_networks && lifted_networks->count(name)) name = "lifted_" + name;
            std::string out = name + "(";
            for (size_t i = 0; i < x.args.size(); ++i)
                out += (i ? ", " : "") + print(x.args[i]);
            return out + ")";
        }
        std::string op = x.fn;
        if (op == "&&") op = "and";
        if (op == "||") op = "or";
        if (op == "^") op = "**";
        if (x.args.size() == 1) {
            std::string inner = print(x.args[0], prec);
            std::string text = (op == "!" ? "not " : op) + inner;
            return prec < parent_prec ? "(" + text + ")" : text;
        }
        bool right_assoc = prec == 8;
        std::string text = print(x.args[0], right_assoc ? prec + 1 : prec) + " " + op + " " +
                           print(x.args[1], right_assoc ? prec : prec + 1);
        return prec < parent_prec ? "(" + text + ")" : text;
    }

    // broadcast(c, SHAPE) renders as zeros/ones-style tensors
    std::string print_broadcast(const CallExpr& x) const {
        std::string shape = broadcast_shape(x);
        double c = 0;
        bool is_const = false;
        if (const auto* i = x.args[0].as<IntLit>()) {
            c = (double)i->value;
            is_const = true;
        } else if (const auto* r = x.args[0].as<RealLit>()) {
            c = r->value;
            is_const = true;
        }
        if (is_const && c == 0.0) return "zeros(" + shape + ")";
        if (is_const && c == 1.0) return "ones(" + shape + ")";
        return print(x.args[0], 7) + " * ones(" + shape + ")";
    }

    std::string broadcast_shape(const CallExpr& x) const {
        if (x.fn == "broadcast_vector" || x.fn == "broadcast_row_vector")
            return print(x.args[1]);
        if (x.fn == "broadcast_matrix") return print(x.args[1]) + ", " + print(x.args[2]);
        // broadcast(c, {dims}) or broadcast(c, shape(w))
        if (const auto* dims = x.args[1].as<ArrayLit>()) {
            std::string out;
            for (size_t i = 0; i < dims->elems.size(); ++i)
                out += (i ? ", " : "") + print(dims->elems[i]);
            return out;
        }
        return print(x.args[1]);
    }
};

struct DistCall {
    std::string text;
};

// Emits one function from IR, tracking unique site names.
class FunctionEmitter {
public:
    FunctionEmitter(std::ostream& os, ExprPrinter printer, bool dict_return = false)
        : os_(os), printer_(std::move(printer)), dict_return_(dict_return) {}

    void emit_body(const GExpr& e, int indent) {
        body_empty_ = true;
        emit(e, indent);
        if (body_empty_) os_ << std::string(indent, ' ') << "pass\n";
    }

    const std::set<std::string>& sites() const { return sites_; }

    std::string dist_text(const Expr& dist) {
        const auto* c = dist.as<CallExpr>();
        if (!c) return printer_.print(dist);
        auto args = [&](size_t from = 0) {
            std::string out;
            for (size_t i = from; i < c->args.size(); ++i)
                out += (i > from ? ", " : "") + printer_.print(c->args[i]);
            return out;
        };
        if (c->fn == "normal") return "Normal(" + args() + ")";
        if (c->fn == "beta") return "Beta(" + args() + ")";
        if (c->fn == "bernoulli") return "Bernoulli(" + args() + ")";
        if (c->fn == "uniform") return "Uniform(" + args() + ")";
        if (c->fn == "exponential") return "Exponential(" + args() + ")";
        if (c->fn == "binomial_logit")
            return "Binomial(" + printer_.print(c->args[0]) + ", logits=" +
                   printer_.print(c->args[1]) + ")";
        if (c->fn == "categorical_logits")
            return "Categorical(logits=" + printer_.print(c->args[0]) + ")";
        if (c->fn == "improper_uniform") return improper_text(*c);
        return printer_.print(dist);
    }

private:
    std::ostream& os_;
    ExprPrinter printer_;
    bool dict_return_;
    bool body_empty_ = true;
    std::set<std::string> sites_;
    std::map<std::string, int> site_counters_;

    std::string fresh_site(const std::string& base) {
        std::string name = base + "__" + std::to_string(++site_counters_[base]);
        if (!sites_.insert(name).second)
            throw std::runtime_error("duplicate emitted site '" + name + "'");
        return name;
    }

    // Parameter sites are keyed by the parameter itself; exclusive branches
    // of a guide may sample the same one.
    std::string bind_site(const std::string& name) {
        sites_.insert(name);
        return name;
    }

    std::string observe_base(const Expr& value) const {
        const Expr* cur = &value;
        while (const auto* ix = cur->as<IndexExpr>()) cur = &*ix->target;
        if (const auto* v = cur->as<VarRef>()) return v->name;
        return "obs";
    }

    // ImproperUniform keyword arguments: finite bounds and the tensor shape.
    std::string improper_text(const CallExpr& c) {
        auto peel = [&](const Expr& e, std::string& shape) -> const Expr* {
            if (const auto* b = e.as<CallExpr>(); b && b->fn.rfind("broadcast", 0) == 0) {
                shape = printer_.broadcast_shape(*b);
                return &b->args[0];
            }
            return &e;
        };
        std::string shape;
        const Expr* lo = peel(c.args[0], shape);
        const Expr* hi = peel(c.args[1], shape);
        std::vector<std::string> kw;
        auto finite = [](const Expr* e) {
            const auto* r = e->as<RealLit>();
            return !(r && std::isinf(r->value));
        };
        if (finite(lo)) kw.push_back("lower=" + printer_.print(*lo));
        if (finite(hi)) kw.push_back("upper=" + printer_.print(*hi));
        if (!shape.empty()) {
            bool single = shape.find(',') == std::string::npos &&
                          shape.find(".shape") == std::string::npos;
            kw.push_back("shape=" + (single ? "(" + shape + ",)" : shape));
        }
        std::string out = "ImproperUniform(";
        for (size_t i = 0; i < kw.size(); ++i) out += (i ? ", " : "") + kw[i];
        return out + ")";
    }

    void line(int indent, const std::string& text) {
        os_ << std::string(indent, ' ') << text << '\n';
        body_empty_ = false;
    }

    void emit(const GExpr& e, int indent) {
        struct Vis {
            FunctionEmitter& fe;
            int indent;
            void operator()(const GLet& x) const {
                fe.emit_binding(x.pat, *x.value, indent);
                fe.emit(*x.body, indent);
            }
            void operator()(const GIf& x) const {
                fe.line(indent, "if " + fe.printer_.print(x.cond) + ":");
                fe.emit(*x.then_e, indent + 4);
                fe.line(indent, "else:");
                fe.emit(*x.else_e, indent + 4);
            }
            void operator()(const GFor& x) const {
                fe.line(indent, "for " + x.var + " in range(" + fe.printer_.print(x.lo) +
                                    ", " + fe.printer_.print(x.hi) + " + 1):");
                fe.emit_loop_body(*x.body, indent + 4);
            }
            void operator()(const GWhile& x) const {
                fe.line(indent, "while " + fe.printer_.print(x.cond) + ":");
                fe.emit_loop_body(*x.body, indent + 4);
            }
            void operator()(const GFactor& x) const {
                std::string site = fe.fresh_site("target");
                fe.line(indent, "sample('" + site + "', Exponential(1.0), obs=-(" +
                                    fe.printer_.print(x.amount) + "))");
            }
            void operator()(const GSample& x) const {
                std::string site = fe.fresh_site("sample");
                fe.line(indent, "sample('" + site + "', " + fe.dist_text(x.dist) + ")");
            }
            void operator()(const GObserve& x) const { fe.emit_observe(x, indent); }
            void operator()(const GParam& x) const {
                std::string init =
                    x.shape ? "zeros(" + fe.param_shape(*x.shape) + ")" : "tensor(0.0)";
                fe.line(indent, fe.printer_.mangle(x.name) + " = param('" + x.name + "', " +
                                    init + ")");
            }
            void operator()(const GReturn& x) const {
                if (fe.dict_return_) {
                    std::string out = "return {";
                    for (size_t i = 0; i < x.values.size(); ++i) {
                        const auto* v = x.values[i].as<VarRef>();
                        std::string name = v ? v->name : "value" + std::to_string(i);
                        out += (i ? ", " : "") + ("'" + name + "': " +
                                                  fe.printer_.print(x.values[i]));
                    }
                    fe.line(indent, out + "}");
                    return;
                }
                if (x.values.empty()) {
                    fe.line(indent, "return ()");
                } else if (x.values.size() == 1) {
                    fe.line(indent, "return " + fe.printer_.print(x.values[0]));
                } else {
                    std::string out = "return (";
                    for (size_t i = 0; i < x.values.size(); ++i)
                        out += (i ? ", " : "") + fe.printer_.print(x.values[i]);
                    fe.line(indent, out + ")");
                }
            }
        };
        std::visit(Vis{*this, indent}, e.node);
    }

    std::string param_shape(const Expr& shape) {
        if (const auto* dims = shape.as<ArrayLit>()) {
            std::string out;
            for (size_t i = 0; i < dims->elems.size(); ++i)
                out += (i ? ", " : "") + printer_.print(dims->elems[i]);
            return out;
        }
        return printer_.print(shape);
    }

    // Loop bodies return their state tuple, which Python loops carry
    // implicitly; drop the trailing return.
    void emit_loop_body(const GExpr& e, int indent) {
        if (e.is<GReturn>()) {
            line(indent, "pass");
            return;
        }
        const GExpr* cur = &e;
        emit_until_tail(*cur, indent);
    }

    void emit_until_tail(const GExpr& e, int indent) {
        if (const auto* let = e.as<GLet>()) {
            emit_binding(let->pat, *let->value, indent);
            if (let->body->is<GReturn>()) return;
            emit_until_tail(*let->body, indent);
            return;
        }
        if (e.is<GReturn>()) return;
        emit(e, indent);
    }

    void emit_binding(const GPattern& pat, const GExpr& value, int indent) {
        if (const auto* s = value.as<GSample>()) {
            if (pat.kind == GPattern::Kind::Var) {
                std::string site = bind_site(pat.name);
                line(indent, printer_.mangle(pat.name) + " = sample('" + site + "', " +
                                 dist_text(s->dist) + ")");
            } else {
                std::string site = fresh_site("sample");
                line(indent, "sample('" + site + "', " + dist_text(s->dist) + ")");
            }
            return;
        }
        if (const auto* r = value.as<GReturn>()) {
            std::string target = pattern_target(pat);
            if (r->values.size() == 1) {
                line(indent, target + " = " + printer_.print(r->values[0]));
            } else {
                line(indent, target + " = ()");
            }
            return;
        }
        if (value.is<GObserve>() || value.is<GFactor>() || value.is<GParam>()) {
            emit(value, indent);
            return;
        }
        if (value.is<GFor>() || value.is<GWhile>() || value.is<GIf>()) {
            emit(value, indent);  // loop state persists as ordinary variables
            return;
        }
        emit(value, indent);
    }

    void emit_observe(const GObserve& x, int indent) {
        std::string site = fresh_site(observe_base(x.value));
        line(indent, "sample('" + site + "', " + dist_text(x.dist) +
                         ", obs=" + printer_.print(x.value) + ")");
    }

    std::string pattern_target(const GPattern& pat) {
        switch (pat.kind) {
            case GPattern::Kind::Var: return printer_.mangle(pat.name);
            case GPattern::Kind::IndexedVar: {
                std::string out = printer_.mangle(pat.name) + "[";
                for (size_t i = 0; i < pat.indices.size(); ++i)
                    out += (i ? ", " : "") + printer_.index_shift(pat.indices[i]);
                return out + "]";
            }
            case GPattern::Kind::Tuple: {
                std::string out;
                for (size_t i = 0; i < pat.tuple.size(); ++i)
                    out += (i ? ", " : "") + pat.tuple[i];
                return out;
            }
            case GPattern::Kind::Unit: return "_";
        }
        return "_";
    }
};

}  // namespace pyro

inline void emit_phase(std::ostream& os, const Compiled& c, const PhaseFn& phase,
                       Diagnostics& diags);

// Emits the full Pyro-flavored source: model, optional guide, and the
// pre/post-processing functions from the phase split.  The text is validated
// structurally, not executed; the in-process runtime interprets the same IR.
inline std::string emit_pyro(const Compiled& c, Diagnostics& diags) {
    std::ostringstream os;

    std::vector<std::string> data_args;
    if (c.phases.kernel.data)
        for (const auto& d : c.phases.kernel.data->decls) data_args.push_back(d.name);
    auto arglist = [](const std::vector<std::string>& names) {
        std::string out;
        for (size_t i = 0; i < names.size(); ++i) out += (i ? ", " : "") + names[i];
        return out;
    };

    // parameters with unresolved shapes cannot be initialized in emitted code
    for (const auto& [name, t] : c.types.decl_order) {
        bool is_param = false;
        if (c.kernel.parameters)
            for (const auto& d : c.kernel.parameters->decls)
                if (d.name == name) is_param = true;
        if (is_param && Subst{}.has_unresolved(t)) {
            diags.error("ambiguous-shape",
                        "parameter '" + name + "' has no concrete shape for emission");
            return {};
        }
    }

    // pre-processing
    if (c.phases.transformed_data) {
        const PhaseFn& td = *c.phases.transformed_data;
        std::vector<std::string> inputs;
        for (const auto& d : td.inputs) inputs.push_back(d.name);
        os << "def transformed_data(" << arglist(inputs) << "):\n";
        emit_phase(os, c, td, diags);
        os << "\n\n";
    }

    // the emitted model is the phase-split kernel: pre-processing runs once
    // outside, post-processing not at all
    GExpr phase_model;
    const GExpr* model_ir = &c.model;
    {
        Diagnostics scratch;
        auto ptypes = resolve_program(c.phases.kernel, scratch);
        if (ptypes && !scratch.has_errors()) {
            try {
                phase_model = compile_program(c.phases.kernel, *ptypes);
                model_ir = &phase_model;
            } catch (const TranslateError&) {
            }
        }
    }

    // lifted networks: those with parameters declared in the source
    std::set<std::string> lifted;
    std::vector<const Decl*> net_params;
    if (c.kernel.parameters) {
        for (const auto& d : c.kernel.parameters->decls) {
            size_t dot = d.name.find('.');
            if (dot == std::string::npos) continue;
            lifted.insert(d.name.substr(0, dot));
            net_params.push_back(&d);
        }
    }

    pyro::ExprPrinter model_printer{true, &lifted};
    os << "def model(" << arglist(data_args) << "):\n";
    {
        pyro::FunctionEmitter fe(os, model_printer);
        // dictionary-of-priors lifting for networks with declared parameters
        if (!lifted.empty()) {
            for (const auto& net : lifted) {
                os << "    priors = {}\n";
                const GExpr* cur = model_ir;
                while (const auto* let = cur->as<GLet>()) {
                    if (const auto* s = let->value->as<GSample>();
                        s && let->pat.kind == GPattern::Kind::Var &&
                        let->pat.name.rfind(net + ".", 0) == 0) {
                        std::string path = let->pat.name.substr(net.size() + 1);
                        os << "    priors['" << path << "'] = " << fe.dist_text(s->dist)
                           << "\n";
                    }
                    cur = &*let->body;
                }
                os << "    lifted_" << net << " = random_module('" << net << "', " << net
                   << ", priors)()\n";
                os << "    " << net << "_params = dict(lifted_" << net
                   << ".named_parameters())\n";
            }
        }
        // skip the network-parameter sample prefix: the lifting above covers it
        const GExpr* body = model_ir;
        while (const auto* let = body->as<GLet>()) {
            if (!(let->value->is<GSample>() && let->pat.kind == GPattern::Kind::Var &&
                  let->pat.name.find('.') != std::string::npos))
                break;
            body = &*let->body;
        }
        fe.emit_body(*body, 4);
    }

    if (c.guide) {
        os << "\n\ndef guide(" << arglist(data_args) << "):\n";
        pyro::ExprPrinter guide_printer{false, &lifted};
        pyro::FunctionEmitter fe(os, guide_printer);
        fe.emit_body(*c.guide, 4);
    }

    if (c.phases.generated_quantities) {
        const PhaseFn& gq = *c.phases.generated_quantities;
        std::vector<std::string> inputs;
        for (const auto& d : gq.inputs) inputs.push_back(d.name);
        os << "\n\ndef generated_quantities(" << arglist(inputs) << "):\n";
        emit_phase(os, c, gq, diags);
    }
    return os.str();
}

// A deterministic pre/post-processing block compiles through the same IR
// pipeline and returns a dictionary of its outputs.
inline void emit_phase(std::ostream& os, const Compiled& c, const PhaseFn& phase,
                       Diagnostics& diags) {
    StanProgram synth;
    Block data;
    data.decls = phase.inputs;
    synth.data = std::move(data);
    synth.networks = c.kernel.networks;
    synth.model = phase.body;
    IdAssigner().run(synth);
    auto types = resolve_program(synth, diags);
    if (!types) return;
    Translator tr(*types);
    GExpr body = tr.compile_stmts(synth.model->stmts, g_return_names(phase.outputs));
    pyro::ExprPrinter printer{false, nullptr};
    pyro::FunctionEmitter fe(os, printer, /*dict_return=*/true);
    fe.emit_body(body, 4);
}

}  // namespace stangen
