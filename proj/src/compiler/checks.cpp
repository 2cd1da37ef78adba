#include "internal.hpp"

#include "mech/core/operations.hpp"
#include "mech/lang/mech_format.hpp"

#include <algorithm>

namespace mech {

namespace detail {

Diagnostic make_diag(Severity severity, std::string code, std::string message, const SourceSpan& span,
                     std::vector<RelatedSpan> related) {
    Diagnostic d;
    d.severity = severity;
    d.code = std::move(code);
    d.message = std::move(message);
    d.span = span;
    d.related = std::move(related);
    return d;
}

AbstractState widened_facts(const ModelDocument& model) {
    AbstractState s = initial_facts(model);
    std::set<std::string> touched;
    for (const auto& u : model.units) {
        auto t = touched_targets(model, u);
        touched.insert(t.begin(), t.end());
    }
    for (const auto& target : touched) {
        auto it = s.find(target);
        if (target.rfind("place:", 0) == 0) {
            s.insert_or_assign(target, ValueBox::count_at_least(0));
            continue;
        }
        if (it == s.end()) continue;
        auto pv = it->second.point_value();
        if (!pv) {
            s.erase(it);
        } else if (std::holds_alternative<Count>(*pv)) {
            it->second = ValueBox::count_at_least(0);
        } else {
            it->second = ValueBox::top_for(*pv);
        }
    }
    return s;
}

std::vector<const TransitionalUnit*> units_of(const Mechanism& mechanism, const ModelDocument& model) {
    std::vector<const TransitionalUnit*> out;
    for (const auto& id : mechanism.organization)
        if (const TransitionalUnit* u = model.find_unit(id))
            if (std::find(out.begin(), out.end(), u) == out.end()) out.push_back(u);
    return out;
}

}  // namespace detail

using detail::make_diag;

std::vector<Diagnostic> check_outputs(const ModelDocument& model) {
    std::vector<Diagnostic> out;
    AbstractState base = detail::widened_facts(model);
    for (const auto& u : model.units) {
        const Transitional* t = model.find_transitional(u.transitional);
        if (!t) continue;
        AbstractState post = unit_post_state(model, u, base);
        if (entails(post, to_ground(u.outputs))) continue;
        std::vector<RelatedSpan> related{{t->span, "transitional '" + t->id + "' declared here"}};
        out.push_back(make_diag(Severity::Error, "OUTPUT_NOT_ENTAILED",
                                "outputs of unit '" + u.id + "' (" + format_expr(u.outputs) +
                                    ") do not follow from its inputs and the effects of '" + t->id + "'",
                                u.outputs.span.valid() ? u.outputs.span : u.span, std::move(related)));
    }
    return out;
}

namespace {

using Facts = std::map<std::string, std::vector<ValueBox>>;
/// Per target, the unit that produced each fact (-1 for initial facts).
using Origins = std::map<std::string, std::vector<int>>;

constexpr std::size_t kMaxFactsPerTarget = 32;
constexpr std::size_t kMaxCombinations = 4096;
constexpr int kMaxRounds = 64;

GroundExpr requirements(const TransitionalUnit& u) {
    GroundExpr need;
    need.kind = GroundExpr::Kind::And;
    need.children.push_back(to_ground(u.inputs));
    need.children.push_back(token_requirements(u));
    return need;
}

bool add_fact(Facts& facts, Origins& origins, const std::string& target, const ValueBox& box, int origin) {
    auto& list = facts[target];
    if (std::find(list.begin(), list.end(), box) != list.end()) return false;
    if (list.size() >= kMaxFactsPerTarget) {
        ValueBox joined = list.back();
        joined.join(box);
        if (joined == list.back()) return false;
        if (auto pv = box.point_value())
            joined = std::holds_alternative<Count>(*pv) ? ValueBox::count_at_least(0) : ValueBox::top_for(*pv);
        list.back() = joined;
        origins[target].back() = origin;
        return true;
    }
    list.push_back(box);
    origins[target].push_back(origin);
    return true;
}

/// Calls `visit` with every assignment of one known fact per target; targets
/// without facts stay unconstrained.
template <class F>
void for_each_combination(const Facts& facts, const std::vector<std::string>& targets, F&& visit) {
    std::vector<const std::vector<ValueBox>*> options;
    for (const auto& t : targets) {
        auto it = facts.find(t);
        options.push_back(it == facts.end() || it->second.empty() ? nullptr : &it->second);
    }
    std::vector<std::size_t> idx(targets.size(), 0);
    for (std::size_t n = 0; n < kMaxCombinations; ++n) {
        AbstractState st;
        for (std::size_t i = 0; i < targets.size(); ++i)
            if (options[i]) st.insert_or_assign(targets[i], (*options[i])[idx[i]]);
        if (visit(st)) return;
        std::size_t i = 0;
        for (; i < targets.size(); ++i) {
            if (!options[i]) continue;
            if (++idx[i] < options[i]->size()) break;
            idx[i] = 0;
        }
        if (i == targets.size()) return;
    }
}

std::string describe_facts(const Facts& facts, const std::string& target) {
    auto it = facts.find(target);
    if (it == facts.end() || it->second.empty()) return target + " unknown";
    std::string out;
    for (const auto& b : it->second) {
        if (!out.empty()) out += " or ";
        out += b.describe();
    }
    return target + " " + out;
}

}  // namespace

std::vector<Diagnostic> check_chain(const Mechanism& mechanism, const ModelDocument& model) {
    auto units = detail::units_of(mechanism, model);
    Facts facts;
    Origins origins;
    for (const auto& [target, box] : initial_facts(model)) add_fact(facts, origins, target, box, -1);

    std::vector<bool> fired(units.size(), false);
    std::vector<bool> refires(units.size(), false);
    const AbstractState widened = detail::widened_facts(model);
    for (int round = 0; round < kMaxRounds; ++round) {
        bool changed = false;
        for (std::size_t i = 0; i < units.size(); ++i) {
            const TransitionalUnit& u = *units[i];
            GroundExpr need = requirements(u);
            auto refs = referenced_targets(need);
            std::vector<std::string> targets(refs.begin(), refs.end());
            auto touched = touched_targets(model, u);
            if (!refires[i]) {
                for_each_combination(facts, targets, [&](const AbstractState& st) {
                    if (!satisfiable(st, need)) return false;
                    for (const auto& [t, box] : st) {
                        const auto& list = facts.at(t);
                        auto k = static_cast<std::size_t>(std::find(list.begin(), list.end(), box) - list.begin());
                        if (origins[t][k] >= 0) refires[i] = true;
                    }
                    if (satisfiable(unit_post_state(model, u, st), need)) refires[i] = true;
                    return static_cast<bool>(refires[i]);
                });
            }
            Facts additions;
            for_each_combination(facts, targets, [&](const AbstractState& st) {
                if (!satisfiable(st, need)) return false;
                if (!fired[i]) {
                    fired[i] = true;
                    changed = true;
                }
                AbstractState post = unit_post_state(model, u, st);
                for (const auto& t : touched) {
                    if (refs.count(t) || !facts.count(t)) {
                        if (auto it = post.find(t); it != post.end()) additions[t].push_back(it->second);
                        continue;
                    }
                    const auto& known = facts.at(t);
                    for (std::size_t k = 0; k < known.size(); ++k) {
                        if (origins[t][k] == static_cast<int>(i)) {
                            if (!refires[i]) continue;
                            if (auto w = widened.find(t); w != widened.end()) additions[t].push_back(w->second);
                            continue;
                        }
                        AbstractState st2 = st;
                        st2.insert_or_assign(t, known[k]);
                        AbstractState p2 = unit_post_state(model, u, st2);
                        if (auto it = p2.find(t); it != p2.end()) additions[t].push_back(it->second);
                    }
                }
                return false;
            });
            for (const auto& [t, boxes] : additions)
                for (const auto& b : boxes)
                    if (!b.empty() && add_fact(facts, origins, t, b, static_cast<int>(i))) changed = true;
        }
        if (!changed) break;
    }

    std::vector<Diagnostic> out;
    for (std::size_t i = 0; i < units.size(); ++i) {
        if (fired[i]) continue;
        const TransitionalUnit& u = *units[i];
        GroundExpr need = requirements(u);
        std::vector<std::string> blocking;
        for (const auto& t : referenced_targets(need)) {
            bool some = false;
            auto it = facts.find(t);
            if (it == facts.end()) continue;
            for (const auto& f : it->second) {
                AbstractState st{{t, f}};
                if (satisfiable(st, need)) {
                    some = true;
                    break;
                }
            }
            if (!some) blocking.push_back(t);
        }
        std::vector<const TransitionalUnit*> producers;
        std::string blocked_on;
        for (std::size_t j = 0; j < units.size(); ++j) {
            if (j == i || !fired[j]) continue;
            auto touched = touched_targets(model, *units[j]);
            for (const auto& t : blocking) {
                if (t.rfind("place:", 0) == 0) continue;
                if (touched.count(t)) {
                    if (producers.empty() || producers.back() != units[j]) producers.push_back(units[j]);
                    if (blocked_on.empty()) blocked_on = t;
                }
            }
        }
        const SourceSpan& span = u.inputs.span.valid() ? u.inputs.span : u.span;
        if (!producers.empty()) {
            std::vector<RelatedSpan> related{{u.span, "consumer unit '" + u.id + "' declared here"}};
            std::string names;
            for (const auto* p : producers) {
                related.push_back({p->span, "producer unit '" + p->id + "' declared here"});
                if (!names.empty()) names += ", ";
                names += "'" + p->id + "'";
            }
            out.push_back(make_diag(Severity::Error, "CHAIN_MISMATCH",
                                    "inputs of unit '" + u.id + "' (" + format_expr(u.inputs) +
                                        ") are not met by the outputs of " + names + ": reachable " +
                                        describe_facts(facts, blocked_on),
                                    span, std::move(related)));
        } else {
            std::string what = blocking.empty() ? std::string("its inputs") : blocking.front();
            out.push_back(make_diag(Severity::Warning, "UNREACHABLE_UNIT",
                                    "unit '" + u.id + "' can never fire in mechanism '" + mechanism.id +
                                        "': nothing establishes " + what,
                                    u.span, {{mechanism.span, "mechanism declared here"}}));
        }
    }
    return out;
}

namespace {

std::optional<std::int64_t> static_weight(const ConservationDecl& decl, const Aggregate& a) {
    if (decl.weight_quality)
        if (const auto* v = a.quality(*decl.weight_quality))
            if (const auto* c = std::get_if<Count>(v)) return c->value;
    for (const auto& m : decl.matches)
        for (const auto& ref : a.ontology_refs)
            if (ontology_pattern_matches(m.pattern, ref)) return m.weight;
    return std::nullopt;
}

std::optional<std::int64_t> pinned_count(const AbstractState& s, const std::string& target) {
    auto it = s.find(target);
    if (it == s.end()) return std::nullopt;
    auto pv = it->second.point_value();
    if (!pv) return std::nullopt;
    if (const auto* c = std::get_if<Count>(&*pv)) return c->value;
    return std::nullopt;
}

}  // namespace

std::vector<Diagnostic> check_conservation(const Mechanism& mechanism, const ModelDocument& model) {
    std::vector<const ConservationDecl*> decls;
    if (mechanism.conserved.empty()) {
        for (const auto& c : model.conservation) decls.push_back(&c);
    } else {
        for (const auto& name : mechanism.conserved)
            if (const auto* c = model.find_conservation(name)) decls.push_back(c);
    }
    std::map<std::string, const Aggregate*> instances;
    for (const auto& a : model.aggregates) instances.emplace(a.id, &a);
    for (const auto& t : model.transitionals)
        for (const auto& e : t.effects)
            if (const auto* c = std::get_if<CreateAggregate>(&e.effect))
                if (const Aggregate* tmpl = model.find_template(c->from_template)) instances.try_emplace(c->id, tmpl);

    AbstractState base = detail::widened_facts(model);
    std::vector<Diagnostic> out;
    for (const TransitionalUnit* u : detail::units_of(mechanism, model)) {
        const Transitional* t = model.find_transitional(u->transitional);
        if (!t) continue;
        AbstractState pre = base;
        assume(pre, to_ground(u->inputs));
        for (const ConservationDecl* decl : decls) {
            if (u->exempt_from(decl->name)) continue;
            std::int64_t before = 0, after = 0;
            std::string undetermined;
            auto change = [&](std::int64_t delta) {
                if (delta < 0)
                    before -= delta;
                else
                    after += delta;
            };
            auto multiplier_of = [&](const std::string& id, const Aggregate& a) -> std::optional<std::int64_t> {
                if (!decl->multiplier || !a.quality(*decl->multiplier)) return 1;
                return pinned_count(pre, id + "." + *decl->multiplier);
            };
            for (const auto& ed : t->effects) {
                std::visit(
                    [&](const auto& e) {
                        using T = std::decay_t<decltype(e)>;
                        if constexpr (std::is_same_v<T, SetQuality> || std::is_same_v<T, AdjustQuality>) {
                            auto it = instances.find(e.aggregate);
                            if (it == instances.end()) return;
                            const Aggregate& a = *it->second;
                            std::string target = e.aggregate + "." + e.quality;
                            bool is_mult = decl->multiplier && *decl->multiplier == e.quality;
                            bool is_weight = decl->weight_quality && *decl->weight_quality == e.quality;
                            if (!is_mult && !is_weight) return;
                            std::optional<std::int64_t> delta;
                            if constexpr (std::is_same_v<T, AdjustQuality>) {
                                if (const auto* d = std::get_if<std::int64_t>(&e.delta)) delta = *d;
                            } else {
                                auto old = pinned_count(pre, target);
                                const auto* c = std::get_if<Count>(&e.value);
                                if (old && c) delta = c->value - *old;
                            }
                            if (!delta) {
                                undetermined = target;
                                return;
                            }
                            if (is_mult) {
                                auto w = static_weight(*decl, a);
                                change(w.value_or(0) * *delta);
                            } else {
                                auto m = multiplier_of(e.aggregate, a);
                                if (!m) {
                                    undetermined = e.aggregate + "." + *decl->multiplier;
                                    return;
                                }
                                change(*m * *delta);
                            }
                        } else if constexpr (std::is_same_v<T, CreateAggregate>) {
                            if (const Aggregate* tmpl = model.find_template(e.from_template))
                                after += conservation_contribution(*decl, *tmpl);
                        } else if constexpr (std::is_same_v<T, DestroyAggregate>) {
                            auto it = instances.find(e.id);
                            if (it == instances.end()) return;
                            auto m = multiplier_of(e.id, *it->second);
                            if (!m) {
                                undetermined = e.id + "." + *decl->multiplier;
                                return;
                            }
                            before += *m * static_weight(*decl, *it->second).value_or(0);
                        } else if constexpr (std::is_same_v<T, SendMessage>) {
                            bool counts = (decl->multiplier && *decl->multiplier == e.quality) ||
                                          (decl->weight_quality && *decl->weight_quality == e.quality);
                            if (counts) undetermined = e.receiver + "." + e.quality;
                        }
                    },
                    ed.effect);
            }
            if (!undetermined.empty()) {
                out.push_back(make_diag(Severity::Warning, "CONSERVATION_UNDETERMINED",
                                        "cannot decide whether unit '" + u->id + "' conserves " + decl->name +
                                            ": the value of " + undetermined + " before firing is not fixed",
                                        u->span));
            } else if (before != after) {
                out.push_back(make_diag(Severity::Error, "CONSERVATION_VIOLATION",
                                        "unit '" + u->id + "' does not conserve " + decl->name + ": " +
                                            std::to_string(before) + " before, " + std::to_string(after) + " after",
                                        u->span, {{t->span, "transitional '" + t->id + "' declared here"}}));
            }
        }
    }
    return out;
}

}  // namespace mech
