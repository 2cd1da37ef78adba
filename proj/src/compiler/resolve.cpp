#include "mech/compiler/compiler.hpp"

#include "mech/core/errors.hpp"
#include "mech/core/operations.hpp"

#include <algorithm>

namespace mech {

namespace {

std::string describe_kind(const QualityValue& v) {
    switch (kind_of(v)) {
    case ValueKind::Symbol: return "an enum symbol";
    case ValueKind::Scalar: return "a scalar";
    case ValueKind::Boolean: return "a boolean";
    case ValueKind::Count: return "a count";
    }
    return "a value";
}

class Resolver {
public:
    explicit Resolver(const ModelDocument& m) : m_(m) {
        for (const auto& a : m.aggregates) instances_.emplace(a.id, &a);
        for (const auto& t : m.transitionals)
            for (const auto& e : t.effects)
                if (const auto* c = std::get_if<CreateAggregate>(&e.effect))
                    if (const Aggregate* tmpl = m.find_template(c->from_template)) {
                        instances_.try_emplace(c->id, tmpl);
                        created_.insert(c->id);
                    }
    }

    std::vector<Diagnostic> run() {
        for (const auto& d : m_.domains)
            if (d.symbols.empty()) warn("EMPTY_DOMAIN", "domain '" + d.id + "' declares no symbols", d.span);
        for (const auto& a : m_.aggregates) check_aggregate(a, "aggregate");
        for (const auto& a : m_.templates) check_aggregate(a, "template");
        for (const auto& r : m_.relations) check_relation(r);
        for (const auto& e : m_.emergents) {
            for (const auto& id : e.over)
                if (!instances_.count(id))
                    error("UNRESOLVED_REFERENCE", "emergent '" + e.id + "' ranges over unknown aggregate '" + id + "'",
                          e.span);
            check_expr(e.when, e.span);
        }
        for (const auto& t : m_.transitionals) check_transitional(t);
        for (const auto& u : m_.units) check_unit(u);
        for (const auto& mech : m_.mechanisms) check_mechanism(mech);
        if (m_.microworld) {
            for (const auto& id : m_.microworld->mechanisms)
                if (!m_.find_mechanism(id))
                    error("UNRESOLVED_REFERENCE", "microworld names unknown mechanism '" + id + "'",
                          m_.microworld->span);
            for (const auto& a : m_.microworld->axioms) check_expr(a, m_.microworld->span);
        }
        for (const auto& c : m_.conservation) {
            if (!is_curie(c.name))
                error("INVALID_CURIE", "conserved quantity '" + c.name + "' is not of the form prefix:local", c.span);
            for (const auto& match : c.matches) {
                std::string_view p = match.pattern;
                bool ok = p.ends_with("*") ? p.size() > 1 : is_curie(p);
                if (!ok) error("INVALID_CURIE", "pattern '" + match.pattern + "' is not a CURIE", c.span);
            }
        }
        return std::move(out_);
    }

private:
    const ModelDocument& m_;
    std::map<std::string, const Aggregate*> instances_;
    std::set<std::string> created_;
    std::vector<Diagnostic> out_;

    void add(Severity sev, std::string code, std::string message, const SourceSpan& span,
             std::vector<RelatedSpan> related = {}) {
        Diagnostic d;
        d.severity = sev;
        d.code = std::move(code);
        d.message = std::move(message);
        d.span = span;
        d.related = std::move(related);
        out_.push_back(std::move(d));
    }
    void error(std::string code, std::string message, const SourceSpan& span, std::vector<RelatedSpan> related = {}) {
        add(Severity::Error, std::move(code), std::move(message), span, std::move(related));
    }
    void warn(std::string code, std::string message, const SourceSpan& span) {
        add(Severity::Warning, std::move(code), std::move(message), span);
    }

    static const SourceSpan& pick(const SourceSpan& preferred, const SourceSpan& fallback) {
        return preferred.valid() ? preferred : fallback;
    }

    void check_symbol(const QualityValue& v, const SourceSpan& span) {
        if (const auto* s = std::get_if<Symbol>(&v))
            if (!m_.domain_of_symbol(s->name))
                error("UNKNOWN_SYMBOL", "symbol '" + s->name + "' is not declared in any domain", span);
    }

    /// `literal` is compared with or assigned to something declared as `declared`.
    void check_compatible(const QualityValue& declared, const QualityValue& literal, const std::string& what,
                          const SourceSpan& span) {
        if (kind_of(declared) != kind_of(literal)) {
            error("KIND_MISMATCH",
                  what + " is " + describe_kind(declared) + " but " + format_value(literal) + " is " +
                      describe_kind(literal),
                  span);
            return;
        }
        if (const auto* d = std::get_if<Scalar>(&declared)) {
            const auto& l = std::get<Scalar>(literal);
            if (d->unit != l.unit)
                error("UNIT_MISMATCH", what + " is measured in [" + d->unit + "] but the value uses [" + l.unit + "]",
                      span);
            return;
        }
        if (const auto* d = std::get_if<Symbol>(&declared)) {
            const auto& l = std::get<Symbol>(literal);
            const EnumDomain* dd = m_.domain_of_symbol(d->name);
            const EnumDomain* ld = m_.domain_of_symbol(l.name);
            if (!ld) {
                error("UNKNOWN_SYMBOL", "symbol '" + l.name + "' is not declared in any domain", span);
            } else if (dd && dd != ld) {
                error("UNKNOWN_SYMBOL",
                      "symbol '" + l.name + "' belongs to domain '" + ld->id + "', not '" + dd->id + "' of " + what,
                      span);
            }
        }
    }

    const QualityValue* find_quality(const std::string& agg, const std::string& quality, const SourceSpan& span,
                                     const std::string& context) {
        auto it = instances_.find(agg);
        if (it == instances_.end()) {
            error("UNRESOLVED_REFERENCE", context + " refers to unknown aggregate '" + agg + "'", span);
            return nullptr;
        }
        const QualityValue* q = it->second->quality(quality);
        if (!q) error("UNRESOLVED_REFERENCE", context + " refers to unknown quality '" + agg + "." + quality + "'", span);
        return q;
    }

    void check_comparator(Comparator op, const QualityValue& declared, const std::string& what, const SourceSpan& span) {
        if (!comparator_allowed(op, kind_of(declared)))
            error("KIND_MISMATCH",
                  "comparator '" + std::string(to_string(op)) + "' cannot order " + what + ", which is " +
                      describe_kind(declared),
                  span);
    }

    void check_expr(const StateExpr& e, const SourceSpan& fallback) {
        const SourceSpan& span = pick(e.span, fallback);
        if (e.kind != StateExpr::Kind::Atom) {
            for (const auto& c : e.children) check_expr(c, span);
            return;
        }
        std::visit(
            [&](const auto& a) {
                using T = std::decay_t<decltype(a)>;
                if constexpr (std::is_same_v<T, QualityState>) {
                    if (const QualityValue* q = find_quality(a.aggregate, a.quality, span, "condition")) {
                        std::string what = a.aggregate + "." + a.quality;
                        check_comparator(a.op, *q, what, span);
                        check_compatible(*q, a.value, what, span);
                    }
                } else if constexpr (std::is_same_v<T, ConfigurationState>) {
                    const RelationalQuality* r = m_.find_relation(a.relation);
                    if (!r) {
                        error("UNRESOLVED_REFERENCE", "condition refers to unknown relation '" + a.relation + "'",
                              span);
                    } else {
                        std::string what = "relation " + a.relation;
                        check_comparator(a.op, r->value, what, span);
                        check_compatible(r->value, a.value, what, span);
                    }
                } else if constexpr (std::is_same_v<T, EmergentState>) {
                    if (!m_.find_emergent(a.predicate))
                        error("UNRESOLVED_REFERENCE", "condition refers to unknown emergent predicate '" + a.predicate +
                                                          "'",
                              span);
                } else {
                    if (!m_.find_place(a.place))
                        error("UNRESOLVED_REFERENCE", "condition refers to unknown place '" + a.place + "'", span);
                }
            },
            e.atom);
    }

    void check_aggregate(const Aggregate& a, std::string_view kind) {
        for (const auto& ref : a.ontology_refs)
            if (!is_curie(ref))
                error("INVALID_CURIE", "ontology reference '" + ref + "' of " + std::string(kind) + " '" + a.id +
                                           "' is not of the form prefix:local",
                      a.span);
        for (const auto& q : a.qualities) check_symbol(q.value, pick(q.span, a.span));
        for (const auto& p : a.parts)
            if (!m_.find_aggregate(p.child))
                error("UNRESOLVED_REFERENCE",
                      "part '" + p.child + "' of " + std::string(kind) + " '" + a.id + "' is not a declared aggregate",
                      a.span);
    }

    void check_relation(const RelationalQuality& r) {
        if (r.participants.size() < 2)
            error("RELATION_ARITY", "relation '" + r.id + "' needs at least two participants", r.span);
        for (const auto& p : r.participants)
            if (!m_.find_aggregate(p))
                error("UNRESOLVED_REFERENCE", "relation '" + r.id + "' names unknown aggregate '" + p + "'", r.span);
        check_symbol(r.value, r.span);
    }

    void check_transitional(const Transitional& t) {
        for (const auto& decl : t.effects) {
            const SourceSpan& span = pick(decl.span, t.span);
            std::visit(
                [&](const auto& e) {
                    using T = std::decay_t<decltype(e)>;
                    if constexpr (std::is_same_v<T, SetQuality>) {
                        if (const QualityValue* q = find_quality(e.aggregate, e.quality, span, "effect"))
                            check_compatible(*q, e.value, e.aggregate + "." + e.quality, span);
                    } else if constexpr (std::is_same_v<T, AdjustQuality>) {
                        if (const QualityValue* q = find_quality(e.aggregate, e.quality, span, "effect")) {
                            std::string what = e.aggregate + "." + e.quality;
                            if (std::holds_alternative<std::int64_t>(e.delta)) {
                                if (!std::holds_alternative<Count>(*q))
                                    error("KIND_MISMATCH",
                                          what + " is " + describe_kind(*q) + "; only counts take whole-number steps",
                                          span);
                            } else {
                                check_compatible(*q, std::get<Scalar>(e.delta), what, span);
                            }
                        }
                    } else if constexpr (std::is_same_v<T, SetRelation>) {
                        const RelationalQuality* r = m_.find_relation(e.relation);
                        if (!r)
                            error("UNRESOLVED_REFERENCE", "effect refers to unknown relation '" + e.relation + "'",
                                  span);
                        else
                            check_compatible(r->value, e.value, "relation " + e.relation, span);
                    } else if constexpr (std::is_same_v<T, CreateAggregate>) {
                        if (!m_.find_template(e.from_template))
                            error("UNRESOLVED_REFERENCE", "effect creates from unknown template '" + e.from_template +
                                                              "'",
                                  span);
                    } else if constexpr (std::is_same_v<T, DestroyAggregate>) {
                        if (!instances_.count(e.id))
                            error("UNRESOLVED_REFERENCE", "effect destroys unknown aggregate '" + e.id + "'", span);
                    } else {
                        if (!instances_.count(e.sender))
                            error("UNRESOLVED_REFERENCE", "message sender '" + e.sender + "' is not an aggregate",
                                  span);
                        if (const QualityValue* q = find_quality(e.receiver, e.quality, span, "message"))
                            check_compatible(*q, e.value, e.receiver + "." + e.quality, span);
                    }
                },
                decl.effect);
        }
        if (t.refinement && !m_.find_mechanism(*t.refinement))
            error("UNRESOLVED_REFERENCE",
                  "transitional '" + t.id + "' is refined by unknown mechanism '" + *t.refinement + "'", t.span);
    }

    void check_tokens(const std::vector<TokenCount>& list, const TransitionalUnit& u) {
        for (const auto& tc : list)
            if (!m_.find_place(tc.place))
                error("UNRESOLVED_REFERENCE", "unit '" + u.id + "' uses unknown place '" + tc.place + "'", u.span);
    }

    void check_unit(const TransitionalUnit& u) {
        if (!m_.find_transitional(u.transitional))
            error("UNRESOLVED_REFERENCE", "unit '" + u.id + "' names unknown transitional '" + u.transitional + "'",
                  u.span);
        check_expr(u.inputs, u.span);
        check_expr(u.outputs, u.span);
        check_tokens(u.consumes, u);
        check_tokens(u.produces, u);
        for (const auto* list : {&u.sources, &u.sinks})
            for (const auto& name : *list)
                if (!m_.find_conservation(name))
                    error("UNRESOLVED_REFERENCE", "unit '" + u.id + "' exempts unknown quantity '" + name + "'",
                          u.span);
    }

    static void collect_aggregates(const StateExpr& e, std::set<std::string>& out) {
        if (e.kind == StateExpr::Kind::Atom) {
            if (const auto* q = std::get_if<QualityState>(&e.atom)) out.insert(q->aggregate);
            return;
        }
        for (const auto& c : e.children) collect_aggregates(c, out);
    }

    static void collect_places(const StateExpr& e, std::set<std::string>& out) {
        if (e.kind == StateExpr::Kind::Atom) {
            if (const auto* t = std::get_if<TokenState>(&e.atom)) out.insert(t->place);
            return;
        }
        for (const auto& c : e.children) collect_places(c, out);
    }

    void check_mechanism(const Mechanism& mech) {
        std::set<std::string> allowed_parts;
        for (const auto& p : mech.parts) {
            if (!m_.find_aggregate(p.aggregate)) {
                error("UNRESOLVED_REFERENCE", "mechanism '" + mech.id + "' lists unknown part '" + p.aggregate + "'",
                      mech.span);
                continue;
            }
            allowed_parts.insert(p.aggregate);
            try {
                auto below = part_closure(p.aggregate, std::span<const Aggregate>(m_.aggregates));
                allowed_parts.insert(below.begin(), below.end());
            } catch (const MechError&) {
                // reported as PART_CYCLE
            }
        }
        allowed_parts.insert(created_.begin(), created_.end());
        for (const auto& p : mech.places)
            if (!m_.find_place(p))
                error("UNRESOLVED_REFERENCE", "mechanism '" + mech.id + "' lists unknown place '" + p + "'", mech.span);
        for (const auto& path : mech.observables) {
            auto dot = path.find('.');
            find_quality(path.substr(0, dot), path.substr(dot + 1), mech.span, "observable");
        }
        for (const auto& name : mech.conserved)
            if (!m_.find_conservation(name))
                error("UNRESOLVED_REFERENCE", "mechanism '" + mech.id + "' conserves undeclared quantity '" + name + "'",
                      mech.span);
        check_expr(mech.phenomenon.setup, mech.span);
        check_expr(mech.phenomenon.termination, mech.span);

        std::set<std::string> declared_places(mech.places.begin(), mech.places.end());
        std::set<std::string> seen;
        for (const auto& id : mech.organization) {
            const TransitionalUnit* u = m_.find_unit(id);
            if (!u) {
                error("UNRESOLVED_REFERENCE", "mechanism '" + mech.id + "' organizes unknown unit '" + id + "'",
                      mech.span);
                continue;
            }
            if (!seen.insert(id).second) continue;
            std::set<std::string> aggs;
            collect_aggregates(u->inputs, aggs);
            collect_aggregates(u->outputs, aggs);
            if (const Transitional* t = m_.find_transitional(u->transitional)) {
                for (const auto& decl : t->effects) {
                    std::visit(
                        [&](const auto& e) {
                            using T = std::decay_t<decltype(e)>;
                            if constexpr (std::is_same_v<T, SetQuality> || std::is_same_v<T, AdjustQuality>)
                                aggs.insert(e.aggregate);
                            else if constexpr (std::is_same_v<T, SendMessage>) {
                                aggs.insert(e.sender);
                                aggs.insert(e.receiver);
                            } else if constexpr (std::is_same_v<T, DestroyAggregate>)
                                aggs.insert(e.id);
                        },
                        decl.effect);
                }
            }
            if (!mech.parts.empty()) {
                for (const auto& a : aggs)
                    if (instances_.count(a) && !allowed_parts.count(a))
                        error("UNDECLARED_PART",
                              "unit '" + id + "' uses aggregate '" + a + "', which is not a part of mechanism '" +
                                  mech.id + "'",
                              u->span, {{mech.span, "mechanism declared here"}});
            }
            std::set<std::string> places;
            for (const auto& tc : u->consumes) places.insert(tc.place);
            for (const auto& tc : u->produces) places.insert(tc.place);
            collect_places(u->inputs, places);
            collect_places(u->outputs, places);
            for (const auto& p : places)
                if (m_.find_place(p) && !declared_places.count(p))
                    error("UNDECLARED_PLACE",
                          "unit '" + id + "' uses place '" + p + "', which mechanism '" + mech.id + "' does not list",
                          u->span, {{mech.span, "mechanism declared here"}});
        }
    }
};

}  // namespace

std::vector<Diagnostic> resolve_references(const ModelDocument& model) {
    return Resolver(model).run();
}

}  // namespace mech
