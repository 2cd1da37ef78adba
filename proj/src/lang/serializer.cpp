#include "mech/core/operations.hpp"
#include "mech/lang/mech_format.hpp"

#include <cmath>
#include <sstream>

namespace mech {

namespace {

template <class T, class F>
std::string join(const std::vector<T>& items, std::string_view sep, F&& fmt) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += fmt(items[i]);
    }
    return out;
}

std::string join(const std::vector<std::string>& items, std::string_view sep = ", ") {
    return join(items, sep, [](const std::string& s) { return s; });
}

std::string format_operand(const StateExpr& e) {
    bool group = (e.kind == StateExpr::Kind::And || e.kind == StateExpr::Kind::Or) && !e.children.empty();
    return group ? "(" + format_expr(e) + ")" : format_expr(e);
}

std::string format_tokens(const std::vector<TokenCount>& list) {
    return join(list, ", ", [](const TokenCount& t) {
        return t.count == 1 ? t.place : t.place + " * " + std::to_string(t.count);
    });
}

class Writer {
public:
    void line(int indent, const std::string& text) {
        out_ << std::string(static_cast<std::size_t>(indent) * 2, ' ') << text << '\n';
    }
    void blank() { out_ << '\n'; }
    std::string str() const { return out_.str(); }

private:
    std::ostringstream out_;
};

void write_metadata(Writer& w, int indent, const MechanismMetadata& m) {
    w.line(indent, "metadata {");
    int in = indent + 1;
    if (m.mechanism_type) w.line(in, "mechanism_type: " + std::string(to_string(*m.mechanism_type)));
    if (m.model_type) w.line(in, "model_type: " + quote(*m.model_type));
    if (m.function_type) w.line(in, "function_type: " + std::string(to_string(*m.function_type)));
    if (m.dynamic_elements) w.line(in, "dynamic_elements: " + quote(*m.dynamic_elements));
    if (m.context) w.line(in, "context: " + quote(*m.context));
    if (m.author) w.line(in, "author: " + quote(*m.author));
    if (m.date) w.line(in, "date: " + quote(*m.date));
    if (m.version) w.line(in, "version: " + quote(*m.version));
    if (m.explanations) w.line(in, "explanations: " + quote(*m.explanations));
    if (m.variations) w.line(in, "variations: " + quote(*m.variations));
    if (m.implications) w.line(in, "implications: " + quote(*m.implications));
    if (!m.evidence.empty()) w.line(in, "evidence: " + join(m.evidence, ", ", [](const std::string& s) { return quote(s); }));
    w.line(indent, "}");
}

void write_aggregate(Writer& w, std::string_view keyword, const Aggregate& a) {
    w.line(0, std::string(keyword) + " " + a.id + " {");
    if (!a.label.empty()) w.line(1, "label: " + quote(a.label));
    if (!a.ontology_refs.empty()) w.line(1, "ontology: " + join(a.ontology_refs));
    for (const auto& q : a.qualities) w.line(1, "quality " + q.name + ": " + format_value(q.value));
    for (const auto& p : a.parts) w.line(1, "part " + p.child + " " + std::string(to_string(p.role)));
    if (a.position)
        w.line(1, "position: (" + join(*a.position, ", ", [](double x) { return format_number(x); }) + ")");
    w.line(0, "}");
}

}  // namespace

std::string quote(std::string_view text) {
    std::string out = "\"";
    for (char c : text) {
        switch (c) {
        case '"': out += "\\\""; break;
        case '\\': out += "\\\\"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        case '\r': out += "\\r"; break;
        default: out += c;
        }
    }
    return out + "\"";
}

std::string format_atom(const StateAtom& atom) {
    struct Visitor {
        std::string operator()(const QualityState& s) const {
            return s.aggregate + "." + s.quality + " " + std::string(to_string(s.op)) + " " + format_value(s.value);
        }
        std::string operator()(const ConfigurationState& s) const {
            return "rq " + s.relation + " " + std::string(to_string(s.op)) + " " + format_value(s.value);
        }
        std::string operator()(const EmergentState& s) const { return "emergent(" + s.predicate + ")"; }
        std::string operator()(const TokenState& s) const {
            return "tokens(" + s.place + ") >= " + std::to_string(s.required);
        }
    };
    return std::visit(Visitor{}, atom);
}

std::string format_expr(const StateExpr& e) {
    switch (e.kind) {
    case StateExpr::Kind::Atom: return format_atom(e.atom);
    case StateExpr::Kind::Not: {
        const StateExpr& c = e.children.front();
        if (c.kind == StateExpr::Kind::Atom) return "!(" + format_expr(c) + ")";
        return "!" + format_operand(c);
    }
    case StateExpr::Kind::And:
        if (e.children.empty()) return "true";
        return join(e.children, " && ", format_operand);
    case StateExpr::Kind::Or:
        if (e.children.empty()) return "false";
        return join(e.children, " || ", format_operand);
    }
    return "true";
}

std::string format_effect(const Effect& effect) {
    struct Visitor {
        std::string operator()(const SetQuality& e) const {
            return e.aggregate + "." + e.quality + " = " + format_value(e.value);
        }
        std::string operator()(const AdjustQuality& e) const {
            std::string target = e.aggregate + "." + e.quality;
            if (auto* n = std::get_if<std::int64_t>(&e.delta)) {
                if (*n < 0 && *n != INT64_MIN) return target + " -= " + std::to_string(-*n);
                return target + " += " + std::to_string(*n);
            }
            const Scalar& s = std::get<Scalar>(e.delta);
            if (std::signbit(s.value)) return target + " -= " + format_value(Scalar{-s.value, s.unit});
            return target + " += " + format_value(s);
        }
        std::string operator()(const SetRelation& e) const { return "rq " + e.relation + " = " + format_value(e.value); }
        std::string operator()(const CreateAggregate& e) const { return "create " + e.id + " from " + e.from_template; }
        std::string operator()(const DestroyAggregate& e) const { return "destroy " + e.id; }
        std::string operator()(const SendMessage& e) const {
            std::string out = "send " + e.sender + " -> " + e.receiver + "." + e.quality + " = " + format_value(e.value);
            if (e.latency != Time(0)) out += " after " + format_time(e.latency);
            return out;
        }
    };
    return std::visit(Visitor{}, effect);
}

std::string serialize_mech(const ModelDocument& d) {
    Writer w;
    w.line(0, "# mechanism model");
    auto section = [&] { w.blank(); };

    if (!d.metadata.empty()) {
        section();
        write_metadata(w, 0, d.metadata);
    }
    for (const auto& dom : d.domains) {
        section();
        w.line(0, "domain " + dom.id + " { " + join(dom.symbols) + (dom.symbols.empty() ? "}" : " }"));
    }
    for (const auto& a : d.aggregates) {
        section();
        write_aggregate(w, "aggregate", a);
    }
    for (const auto& a : d.templates) {
        section();
        write_aggregate(w, "template", a);
    }
    for (const auto& r : d.relations) {
        section();
        w.line(0, "relation " + r.id + " {");
        if (!r.name.empty()) w.line(1, "name: " + quote(r.name));
        if (!r.participants.empty()) w.line(1, "participants: " + join(r.participants));
        w.line(1, "value: " + format_value(r.value));
        w.line(0, "}");
    }
    for (const auto& e : d.emergents) {
        section();
        w.line(0, "emergent " + e.id + " {");
        if (!e.over.empty()) w.line(1, "over: " + join(e.over));
        w.line(1, "when: " + format_expr(e.when));
        w.line(0, "}");
    }
    if (!d.places.empty()) {
        section();
        for (const auto& p : d.places) w.line(0, "place " + p.id + ": " + std::to_string(p.initial_tokens));
    }
    for (const auto& t : d.transitionals) {
        section();
        w.line(0, "transitional " + t.id + " {");
        if (!t.label.empty()) w.line(1, "label: " + quote(t.label));
        w.line(1, "kind: " + std::string(to_string(t.kind)));
        if (t.delay != Time(0)) w.line(1, "delay: " + format_time(t.delay));
        if (t.function) w.line(1, "function: " + quote(*t.function));
        if (t.refinement) w.line(1, "refinement: " + *t.refinement);
        for (const auto& e : t.effects) w.line(1, "effect " + format_effect(e.effect));
        w.line(0, "}");
    }
    for (const auto& u : d.units) {
        section();
        w.line(0, "unit " + u.id + " {");
        w.line(1, "transitional: " + u.transitional);
        w.line(1, "inputs: " + format_expr(u.inputs));
        w.line(1, "outputs: " + format_expr(u.outputs));
        if (!u.consumes.empty()) w.line(1, "consumes: " + format_tokens(u.consumes));
        if (!u.produces.empty()) w.line(1, "produces: " + format_tokens(u.produces));
        if (!u.sources.empty()) w.line(1, "source: " + join(u.sources));
        if (!u.sinks.empty()) w.line(1, "sink: " + join(u.sinks));
        w.line(0, "}");
    }
    for (const auto& m : d.mechanisms) {
        section();
        w.line(0, "mechanism " + m.id + " {");
        if (!m.metadata.empty()) write_metadata(w, 1, m.metadata);
        w.line(1, "setup: " + format_expr(m.phenomenon.setup));
        w.line(1, "termination: " + format_expr(m.phenomenon.termination));
        if (m.phenomenon.summary) w.line(1, "summary: " + quote(*m.phenomenon.summary));
        for (const auto& p : m.parts) w.line(1, "part " + p.aggregate + " " + std::string(to_string(p.role)));
        if (!m.places.empty()) w.line(1, "places: " + join(m.places));
        if (!m.organization.empty()) w.line(1, "organization: " + join(m.organization));
        if (!m.observables.empty()) w.line(1, "observe: " + join(m.observables));
        if (!m.conserved.empty()) w.line(1, "conserve: " + join(m.conserved));
        w.line(0, "}");
    }
    if (d.microworld) {
        section();
        w.line(0, "microworld " + d.microworld->id + " {");
        if (!d.microworld->mechanisms.empty()) w.line(1, "mechanisms: " + join(d.microworld->mechanisms));
        for (const auto& a : d.microworld->axioms) w.line(1, "axiom: " + format_expr(a));
        w.line(0, "}");
    }
    for (const auto& c : d.conservation) {
        section();
        w.line(0, "conserve " + c.name + " {");
        if (c.multiplier) w.line(1, "multiplier: " + *c.multiplier);
        if (c.weight_quality) w.line(1, "weight: " + *c.weight_quality);
        for (const auto& m : c.matches) w.line(1, "match " + m.pattern + " = " + std::to_string(m.weight));
        w.line(0, "}");
    }
    return w.str();
}

}  // namespace mech
