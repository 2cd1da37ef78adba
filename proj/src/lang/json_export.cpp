#include "mech/lang/json_export.hpp"

#include "mech/core/operations.hpp"
#include "mech/lang/mech_format.hpp"

namespace mech {

namespace {

Json string_list(const std::vector<std::string>& items) {
    Json arr = Json::array();
    for (const auto& s : items) arr.push_back(s);
    return arr;
}

Json optional_string(const std::optional<std::string>& s) {
    return s ? Json(*s) : Json(nullptr);
}

Json tokens_json(const std::vector<TokenCount>& list) {
    Json arr = Json::array();
    for (const auto& t : list) arr.push_back(Json{{"place", t.place}, {"count", t.count}});
    return arr;
}

Json aggregate_json(const Aggregate& a) {
    Json qualities = Json::array();
    for (const auto& q : a.qualities)
        qualities.push_back(Json{{"name", q.name}, {"value", to_json(q.value)}, {"span", to_json(q.span)}});
    Json parts = Json::array();
    for (const auto& p : a.parts) parts.push_back(Json{{"child", p.child}, {"role", to_string(p.role)}});
    Json j;
    j["id"] = a.id;
    j["label"] = a.label;
    j["ontology_refs"] = string_list(a.ontology_refs);
    j["qualities"] = qualities;
    j["parts"] = parts;
    j["relational_qualities"] = string_list(a.relational_qualities);
    if (a.position) {
        Json pos = Json::array();
        for (double x : *a.position) pos.push_back(x);
        j["position"] = pos;
    } else {
        j["position"] = nullptr;
    }
    j["span"] = to_json(a.span);
    return j;
}

Json effect_json(const EffectDecl& decl) {
    struct Visitor {
        Json operator()(const SetQuality& e) const {
            return Json{{"kind", "set"}, {"aggregate", e.aggregate}, {"quality", e.quality}, {"value", to_json(e.value)}};
        }
        Json operator()(const AdjustQuality& e) const {
            Json delta = std::holds_alternative<std::int64_t>(e.delta)
                             ? Json(std::get<std::int64_t>(e.delta))
                             : to_json(QualityValue(std::get<Scalar>(e.delta)));
            return Json{{"kind", "adjust"}, {"aggregate", e.aggregate}, {"quality", e.quality}, {"delta", delta}};
        }
        Json operator()(const SetRelation& e) const {
            return Json{{"kind", "set-relation"}, {"relation", e.relation}, {"value", to_json(e.value)}};
        }
        Json operator()(const CreateAggregate& e) const {
            return Json{{"kind", "create"}, {"id", e.id}, {"template", e.from_template}};
        }
        Json operator()(const DestroyAggregate& e) const { return Json{{"kind", "destroy"}, {"id", e.id}}; }
        Json operator()(const SendMessage& e) const {
            return Json{{"kind", "send"},         {"sender", e.sender},
                        {"receiver", e.receiver}, {"quality", e.quality},
                        {"value", to_json(e.value)}, {"latency", format_time_fraction(e.latency)}};
        }
    };
    Json j = std::visit(Visitor{}, decl.effect);
    j["text"] = format_effect(decl.effect);
    j["span"] = to_json(decl.span);
    return j;
}

}  // namespace

Json to_json(const SourceSpan& span) {
    return Json{{"file", span.file},
                {"start_line", span.start_line},
                {"start_column", span.start_column},
                {"end_line", span.end_line},
                {"end_column", span.end_column}};
}

Json to_json(const QualityValue& value) {
    Json j;
    j["kind"] = to_string(kind_of(value));
    std::visit(
        [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, Symbol>) {
                j["value"] = v.name;
            } else if constexpr (std::is_same_v<T, Scalar>) {
                j["value"] = v.value;
                j["unit"] = v.unit;
            } else if constexpr (std::is_same_v<T, bool>) {
                j["value"] = v;
            } else {
                j["value"] = v.value;
            }
        },
        value);
    return j;
}

Json to_json(const StateExpr& expr) {
    Json j;
    switch (expr.kind) {
    case StateExpr::Kind::Atom: {
        j["op"] = "atom";
        std::visit(
            [&](const auto& a) {
                using T = std::decay_t<decltype(a)>;
                if constexpr (std::is_same_v<T, QualityState>) {
                    j["state"] = "quality";
                    j["aggregate"] = a.aggregate;
                    j["quality"] = a.quality;
                    j["comparator"] = to_string(a.op);
                    j["value"] = to_json(a.value);
                } else if constexpr (std::is_same_v<T, ConfigurationState>) {
                    j["state"] = "configuration";
                    j["relation"] = a.relation;
                    j["comparator"] = to_string(a.op);
                    j["value"] = to_json(a.value);
                } else if constexpr (std::is_same_v<T, EmergentState>) {
                    j["state"] = "emergent";
                    j["predicate"] = a.predicate;
                } else {
                    j["state"] = "token";
                    j["place"] = a.place;
                    j["required"] = a.required;
                }
            },
            expr.atom);
        break;
    }
    case StateExpr::Kind::And:
    case StateExpr::Kind::Or:
    case StateExpr::Kind::Not: {
        j["op"] = expr.kind == StateExpr::Kind::And ? "and" : expr.kind == StateExpr::Kind::Or ? "or" : "not";
        Json terms = Json::array();
        for (const auto& c : expr.children) terms.push_back(to_json(c));
        j["terms"] = terms;
        break;
    }
    }
    j["text"] = format_expr(expr);
    j["span"] = to_json(expr.span);
    return j;
}

Json to_json(const MechanismMetadata& m) {
    Json j;
    j["mechanism_type"] = m.mechanism_type ? Json(to_string(*m.mechanism_type)) : Json(nullptr);
    j["model_type"] = optional_string(m.model_type);
    j["function_type"] = m.function_type ? Json(to_string(*m.function_type)) : Json(nullptr);
    j["dynamic_elements"] = optional_string(m.dynamic_elements);
    j["context"] = optional_string(m.context);
    j["author"] = optional_string(m.author);
    j["date"] = optional_string(m.date);
    j["version"] = optional_string(m.version);
    j["explanations"] = optional_string(m.explanations);
    j["variations"] = optional_string(m.variations);
    j["implications"] = optional_string(m.implications);
    j["evidence"] = string_list(m.evidence);
    j["span"] = to_json(m.span);
    return j;
}

Json to_json(const ModelDocument& d) {
    Json j;
    j["file"] = d.file;
    j["metadata"] = to_json(d.metadata);

    Json domains = Json::array();
    for (const auto& dom : d.domains)
        domains.push_back(Json{{"id", dom.id}, {"symbols", string_list(dom.symbols)}, {"span", to_json(dom.span)}});
    j["domains"] = domains;

    Json aggregates = Json::array();
    for (const auto& a : d.aggregates) aggregates.push_back(aggregate_json(a));
    j["aggregates"] = aggregates;
    Json templates = Json::array();
    for (const auto& a : d.templates) templates.push_back(aggregate_json(a));
    j["templates"] = templates;

    Json relations = Json::array();
    for (const auto& r : d.relations)
        relations.push_back(Json{{"id", r.id},
                                 {"name", r.name},
                                 {"participants", string_list(r.participants)},
                                 {"value", to_json(r.value)},
                                 {"span", to_json(r.span)}});
    j["relations"] = relations;

    Json emergents = Json::array();
    for (const auto& e : d.emergents)
        emergents.push_back(
            Json{{"id", e.id}, {"over", string_list(e.over)}, {"when", to_json(e.when)}, {"span", to_json(e.span)}});
    j["emergents"] = emergents;

    Json places = Json::array();
    for (const auto& p : d.places)
        places.push_back(Json{{"id", p.id}, {"initial_tokens", p.initial_tokens}, {"span", to_json(p.span)}});
    j["places"] = places;

    Json transitionals = Json::array();
    for (const auto& t : d.transitionals) {
        Json effects = Json::array();
        for (const auto& e : t.effects) effects.push_back(effect_json(e));
        transitionals.push_back(Json{{"id", t.id},
                                     {"label", t.label},
                                     {"kind", to_string(t.kind)},
                                     {"delay", format_time_fraction(t.delay)},
                                     {"function", optional_string(t.function)},
                                     {"refinement", optional_string(t.refinement)},
                                     {"effects", effects},
                                     {"span", to_json(t.span)}});
    }
    j["transitionals"] = transitionals;

    Json units = Json::array();
    for (const auto& u : d.units)
        units.push_back(Json{{"id", u.id},
                             {"transitional", u.transitional},
                             {"inputs", to_json(u.inputs)},
                             {"outputs", to_json(u.outputs)},
                             {"consumes", tokens_json(u.consumes)},
                             {"produces", tokens_json(u.produces)},
                             {"sources", string_list(u.sources)},
                             {"sinks", string_list(u.sinks)},
                             {"span", to_json(u.span)}});
    j["units"] = units;

    Json mechanisms = Json::array();
    for (const auto& m : d.mechanisms) {
        Json parts = Json::array();
        for (const auto& p : m.parts) parts.push_back(Json{{"aggregate", p.aggregate}, {"role", to_string(p.role)}});
        mechanisms.push_back(Json{{"id", m.id},
                                  {"metadata", to_json(m.metadata)},
                                  {"phenomenon",
                                   Json{{"setup", to_json(m.phenomenon.setup)},
                                        {"termination", to_json(m.phenomenon.termination)},
                                        {"summary", optional_string(m.phenomenon.summary)}}},
                                  {"parts", parts},
                                  {"places", string_list(m.places)},
                                  {"organization", string_list(m.organization)},
                                  {"observables", string_list(m.observables)},
                                  {"conserved", string_list(m.conserved)},
                                  {"span", to_json(m.span)}});
    }
    j["mechanisms"] = mechanisms;

    if (d.microworld) {
        Json axioms = Json::array();
        for (const auto& a : d.microworld->axioms) axioms.push_back(to_json(a));
        j["microworld"] = Json{{"id", d.microworld->id},
                               {"mechanisms", string_list(d.microworld->mechanisms)},
                               {"axioms", axioms},
                               {"span", to_json(d.microworld->span)}};
    } else {
        j["microworld"] = nullptr;
    }

    Json conservation = Json::array();
    for (const auto& c : d.conservation) {
        Json matches = Json::array();
        for (const auto& m : c.matches) matches.push_back(Json{{"pattern", m.pattern}, {"weight", m.weight}});
        conservation.push_back(Json{{"name", c.name},
                                    {"multiplier", optional_string(c.multiplier)},
                                    {"weight", optional_string(c.weight_quality)},
                                    {"matches", matches},
                                    {"span", to_json(c.span)}});
    }
    j["conservation"] = conservation;
    return j;
}

Json to_json(const std::vector<Diagnostic>& diagnostics) {
    Json arr = Json::array();
    for (const auto& d : diagnostics) {
        Json related = Json::array();
        for (const auto& r : d.related)
            related.push_back(Json{{"file", r.span.file},
                                   {"line", r.span.start_line},
                                   {"column", r.span.start_column},
                                   {"note", r.note}});
        arr.push_back(Json{{"code", d.code},
                           {"severity", to_string(d.severity)},
                           {"message", d.message},
                           {"file", d.span.file},
                           {"line", d.span.start_line},
                           {"column", d.span.start_column},
                           {"end_line", d.span.end_line},
                           {"end_column", d.span.end_column},
                           {"related", related}});
    }
    return arr;
}

}  // namespace mech
