#include "mech/core/operations.hpp"

#include "mech/core/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>

namespace mech {

std::string format_number(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

std::string format_value(const QualityValue& v) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, Symbol>)
                return x.name;
            else if constexpr (std::is_same_v<T, Scalar>)
                return format_number(x.value) + " [" + x.unit + "]";
            else if constexpr (std::is_same_v<T, bool>)
                return x ? "true" : "false";
            else
                return std::to_string(x.value);
        },
        v);
}

std::string format_time(const Time& t) {
    if (t.denominator() == 1) return std::to_string(t.numerator());
    return std::to_string(t.numerator()) + "/" + std::to_string(t.denominator());
}

std::string format_time_fraction(const Time& t) {
    return std::to_string(t.numerator()) + "/" + std::to_string(t.denominator());
}

// ---------------------------------------------------------------------------

std::vector<std::string> find_part_cycle(const std::map<std::string, Aggregate>& aggregates) {
    enum class Mark { White, Grey, Black };
    std::map<std::string, Mark> mark;
    std::vector<std::string> stack;
    std::vector<std::string> cycle;

    std::function<bool(const std::string&)> visit = [&](const std::string& id) {
        mark[id] = Mark::Grey;
        stack.push_back(id);
        auto it = aggregates.find(id);
        if (it != aggregates.end()) {
            for (const auto& link : it->second.parts) {
                if (!aggregates.count(link.child)) continue;
                Mark m = mark[link.child];
                if (m == Mark::Grey) {
                    auto from = std::find(stack.begin(), stack.end(), link.child);
                    cycle.assign(from, stack.end());
                    cycle.push_back(link.child);
                    return true;
                }
                if (m == Mark::White && visit(link.child)) return true;
            }
        }
        stack.pop_back();
        mark[id] = Mark::Black;
        return false;
    };

    for (const auto& [id, _] : aggregates)
        if (mark[id] == Mark::White && visit(id)) return cycle;
    return {};
}

std::set<std::string> part_closure(std::string_view aggregate_id, const std::map<std::string, Aggregate>& aggregates) {
    auto root = aggregates.find(std::string(aggregate_id));
    if (root == aggregates.end())
        throw MechError(ErrorCode::UnknownAggregate, "unknown aggregate '" + std::string(aggregate_id) + "'");

    std::set<std::string> seen;
    std::vector<std::string> path{root->first};
    std::set<std::string> on_path{root->first};

    // Depth-first with an explicit path so a cycle can be reported verbatim.
    std::function<void(const Aggregate&)> walk = [&](const Aggregate& a) {
        for (const auto& link : a.parts) {
            if (on_path.count(link.child)) {
                std::string text;
                auto from = std::find(path.begin(), path.end(), link.child);
                for (auto it = from; it != path.end(); ++it) text += *it + " -> ";
                text += link.child;
                throw MechError(ErrorCode::CycleDetected, "part cycle: " + text);
            }
            auto child = aggregates.find(link.child);
            if (child == aggregates.end())
                throw MechError(ErrorCode::UnknownAggregate,
                                "part '" + link.child + "' of '" + a.id + "' is not declared");
            // A child seen before and not on the current path is fully explored.
            if (seen.insert(link.child).second) {
                path.push_back(link.child);
                on_path.insert(link.child);
                walk(child->second);
                on_path.erase(link.child);
                path.pop_back();
            }
        }
    };
    walk(root->second);
    return seen;
}

std::set<std::string> part_closure(std::string_view aggregate_id, std::span<const Aggregate> aggregates) {
    std::map<std::string, Aggregate> index;
    for (const auto& a : aggregates) index.emplace(a.id, a);
    return part_closure(aggregate_id, index);
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
bool ordered(const T& l, Comparator op, const T& r) {
    switch (op) {
    case Comparator::Eq: return l == r;
    case Comparator::Ne: return l != r;
    case Comparator::Lt: return l < r;
    case Comparator::Le: return l <= r;
    case Comparator::Gt: return l > r;
    case Comparator::Ge: return l >= r;
    }
    return false;
}

}  // namespace

bool compare_values(const QualityValue& lhs, Comparator op, const QualityValue& rhs) {
    if (lhs.index() != rhs.index())
        throw MechError(ErrorCode::TypeMismatch, "cannot compare " + std::string(to_string(kind_of(lhs))) + " with " +
                                                     std::string(to_string(kind_of(rhs))));
    if (!comparator_allowed(op, kind_of(lhs)))
        throw MechError(ErrorCode::TypeMismatch, "comparator " + std::string(to_string(op)) + " is not defined for " +
                                                     std::string(to_string(kind_of(lhs))));
    switch (kind_of(lhs)) {
    case ValueKind::Symbol: return ordered(std::get<Symbol>(lhs).name, op, std::get<Symbol>(rhs).name);
    case ValueKind::Boolean: return ordered(std::get<bool>(lhs), op, std::get<bool>(rhs));
    case ValueKind::Count: return ordered(std::get<Count>(lhs).value, op, std::get<Count>(rhs).value);
    case ValueKind::Scalar: {
        const auto& l = std::get<Scalar>(lhs);
        const auto& r = std::get<Scalar>(rhs);
        if (l.unit != r.unit)
            throw MechError(ErrorCode::UnitMismatch, "unit [" + l.unit + "] compared with [" + r.unit + "]");
        return ordered(l.value, op, r.value);
    }
    }
    return false;
}

namespace {

bool evaluate_depth(const StateExpr& expr, const Microworld& world, int depth);

bool evaluate_atom_depth(const StateAtom& atom, const Microworld& world, int depth) {
    if (const auto* q = std::get_if<QualityState>(&atom)) {
        auto it = world.aggregates.find(q->aggregate);
        if (it == world.aggregates.end())
            throw MechError(ErrorCode::UnresolvedReference, "unknown aggregate '" + q->aggregate + "'");
        const QualityValue* v = it->second.quality(q->quality);
        if (!v)
            throw MechError(ErrorCode::UnresolvedReference,
                            "aggregate '" + q->aggregate + "' has no quality '" + q->quality + "'");
        return compare_values(*v, q->op, q->value);
    }
    if (const auto* c = std::get_if<ConfigurationState>(&atom)) {
        auto it = world.relations.find(c->relation);
        if (it == world.relations.end())
            throw MechError(ErrorCode::UnresolvedReference, "unknown relational quality '" + c->relation + "'");
        return compare_values(it->second.value, c->op, c->value);
    }
    if (const auto* e = std::get_if<EmergentState>(&atom)) {
        auto it = world.emergents.find(e->predicate);
        if (it == world.emergents.end())
            throw MechError(ErrorCode::UnresolvedReference, "unknown emergent predicate '" + e->predicate + "'");
        if (depth > 32)
            throw MechError(ErrorCode::CycleDetected, "emergent predicate '" + e->predicate + "' refers to itself");
        for (const auto& id : it->second.over)
            if (!world.aggregates.count(id)) return false;
        return evaluate_depth(it->second.when, world, depth + 1);
    }
    const auto& t = std::get<TokenState>(atom);
    return world.tokens(t.place) >= t.required;
}

bool evaluate_depth(const StateExpr& expr, const Microworld& world, int depth) {
    switch (expr.kind) {
    case StateExpr::Kind::Atom: return evaluate_atom_depth(expr.atom, world, depth);
    case StateExpr::Kind::Not: return !evaluate_depth(expr.children.at(0), world, depth);
    case StateExpr::Kind::And:
        for (const auto& c : expr.children)
            if (!evaluate_depth(c, world, depth)) return false;
        return true;
    case StateExpr::Kind::Or:
        for (const auto& c : expr.children)
            if (evaluate_depth(c, world, depth)) return true;
        return false;
    }
    return false;
}

}  // namespace

bool evaluate_atom(const StateAtom& atom, const Microworld& world) {
    return evaluate_atom_depth(atom, world, 0);
}

bool evaluate_state(const StateExpr& expr, const Microworld& world) {
    return evaluate_depth(expr, world, 0);
}

// ---------------------------------------------------------------------------

bool tokens_available(const TransitionalUnit& unit, const Microworld& world) {
    std::map<std::string, std::int64_t> need;
    for (const auto& tc : unit.consumes) need[tc.place] += tc.count;
    for (const auto& [place, n] : need)
        if (world.tokens(place) < n) return false;
    return true;
}

std::vector<StateDelta> consume_tokens(const TransitionalUnit& unit, Microworld& world) {
    if (!tokens_available(unit, world))
        throw MechError(ErrorCode::PreconditionNotMet, "unit '" + unit.id + "' lacks required tokens");
    std::vector<StateDelta> out;
    for (const auto& tc : unit.consumes) {
        auto before = world.tokens(tc.place);
        auto after = before - tc.count;
        if (after == 0)
            world.marking.erase(tc.place);
        else
            world.marking[tc.place] = after;
        out.push_back({"place:" + tc.place, std::to_string(before), std::to_string(after)});
    }
    return out;
}

std::vector<StateDelta> produce_tokens(const TransitionalUnit& unit, Microworld& world) {
    std::vector<StateDelta> out;
    for (const auto& tc : unit.produces) {
        auto before = world.tokens(tc.place);
        auto after = before + tc.count;
        if (after == 0)
            world.marking.erase(tc.place);
        else
            world.marking[tc.place] = after;
        out.push_back({"place:" + tc.place, std::to_string(before), std::to_string(after)});
    }
    return out;
}

namespace {

Aggregate& require_aggregate(Microworld& world, const std::string& id) {
    auto it = world.aggregates.find(id);
    if (it == world.aggregates.end()) throw MechError(ErrorCode::UnknownAggregate, "unknown aggregate '" + id + "'");
    return it->second;
}

QualityValue& require_quality(Aggregate& a, const std::string& name) {
    QualityValue* v = a.quality(name);
    if (!v)
        throw MechError(ErrorCode::UnresolvedReference, "aggregate '" + a.id + "' has no quality '" + name + "'");
    return *v;
}

void check_assignable(const QualityValue& current, const QualityValue& next, const std::string& target) {
    if (current.index() != next.index())
        throw MechError(ErrorCode::TypeMismatch, "cannot assign " + std::string(to_string(kind_of(next))) + " to " +
                                                     std::string(to_string(kind_of(current))) + " quality " + target);
    if (const auto* s = std::get_if<Scalar>(&current); s && s->unit != std::get<Scalar>(next).unit)
        throw MechError(ErrorCode::UnitMismatch,
                        target + " has unit [" + s->unit + "], got [" + std::get<Scalar>(next).unit + "]");
    if (const auto* c = std::get_if<Count>(&next); c && c->value < 0)
        throw MechError(ErrorCode::NegativeCount, target + " would become " + std::to_string(c->value));
}

}  // namespace

std::vector<StateDelta> apply_effects(const ModelDocument& model, const Transitional& transitional, Microworld& world) {
    std::vector<StateDelta> out;
    for (const auto& decl : transitional.effects) {
        std::visit(
            [&](const auto& e) {
                using T = std::decay_t<decltype(e)>;
                if constexpr (std::is_same_v<T, SetQuality>) {
                    auto& q = require_quality(require_aggregate(world, e.aggregate), e.quality);
                    std::string target = e.aggregate + "." + e.quality;
                    check_assignable(q, e.value, target);
                    out.push_back({target, format_value(q), format_value(e.value)});
                    q = e.value;
                } else if constexpr (std::is_same_v<T, AdjustQuality>) {
                    auto& q = require_quality(require_aggregate(world, e.aggregate), e.quality);
                    std::string target = e.aggregate + "." + e.quality;
                    QualityValue next = q;
                    if (const auto* d = std::get_if<std::int64_t>(&e.delta)) {
                        auto* c = std::get_if<Count>(&next);
                        if (!c) throw MechError(ErrorCode::TypeMismatch, target + " is not a count");
                        c->value += *d;
                    } else {
                        const auto& d2 = std::get<Scalar>(e.delta);
                        auto* s = std::get_if<Scalar>(&next);
                        if (!s) throw MechError(ErrorCode::TypeMismatch, target + " is not a scalar");
                        if (s->unit != d2.unit)
                            throw MechError(ErrorCode::UnitMismatch,
                                            target + " has unit [" + s->unit + "], got [" + d2.unit + "]");
                        s->value += d2.value;
                    }
                    check_assignable(q, next, target);
                    out.push_back({target, format_value(q), format_value(next)});
                    q = next;
                } else if constexpr (std::is_same_v<T, SetRelation>) {
                    auto it = world.relations.find(e.relation);
                    if (it == world.relations.end())
                        throw MechError(ErrorCode::UnresolvedReference, "unknown relational quality '" + e.relation + "'");
                    std::string target = "rq:" + e.relation;
                    check_assignable(it->second.value, e.value, target);
                    out.push_back({target, format_value(it->second.value), format_value(e.value)});
                    it->second.value = e.value;
                } else if constexpr (std::is_same_v<T, CreateAggregate>) {
                    const Aggregate* tmpl = model.find_template(e.from_template);
                    if (!tmpl)
                        throw MechError(ErrorCode::UnresolvedReference, "unknown template '" + e.from_template + "'");
                    if (world.aggregates.count(e.id))
                        throw MechError(ErrorCode::EffectFailed, "aggregate '" + e.id + "' already exists");
                    Aggregate a = *tmpl;
                    a.id = e.id;
                    a.relational_qualities.clear();
                    world.aggregates.emplace(e.id, std::move(a));
                    out.push_back({"aggregate:" + e.id, "(absent)", e.from_template});
                } else if constexpr (std::is_same_v<T, DestroyAggregate>) {
                    auto it = world.aggregates.find(e.id);
                    if (it == world.aggregates.end())
                        throw MechError(ErrorCode::UnknownAggregate, "unknown aggregate '" + e.id + "'");
                    world.aggregates.erase(it);
                    for (auto& [_, other] : world.aggregates)
                        std::erase_if(other.parts, [&](const PartLink& l) { return l.child == e.id; });
                    std::erase_if(world.relations, [&](const auto& kv) {
                        const auto& ps = kv.second.participants;
                        return std::find(ps.begin(), ps.end(), e.id) != ps.end();
                    });
                    out.push_back({"aggregate:" + e.id, "present", "(absent)"});
                } else if constexpr (std::is_same_v<T, SendMessage>) {
                    require_aggregate(world, e.sender);
                    require_aggregate(world, e.receiver);
                    Message m;
                    m.id = "m" + std::to_string(world.next_message++);
                    m.sender = e.sender;
                    m.receiver = e.receiver;
                    m.quality = e.quality;
                    m.value = e.value;
                    m.deliver_at = world.clock + e.latency;
                    world.message_queue.push_back(std::move(m));
                }
            },
            decl.effect);
    }
    return out;
}

StateDelta deliver_message(const Message& message, Microworld& world) {
    auto& q = require_quality(require_aggregate(world, message.receiver), message.quality);
    std::string target = message.receiver + "." + message.quality;
    check_assignable(q, message.value, target);
    StateDelta d{target, format_value(q), format_value(message.value)};
    q = message.value;
    return d;
}

void check_axioms(const Microworld& world) {
    for (std::size_t i = 0; i < world.axioms.size(); ++i)
        if (!evaluate_state(world.axioms[i], world))
            throw MechError(ErrorCode::AxiomViolated, "axiom #" + std::to_string(i + 1) + " violated at time " +
                                                          format_time(world.clock));
}

Microworld apply_transitional_unit(const ModelDocument& model, const TransitionalUnit& unit, const Microworld& world) {
    const Transitional* t = model.find_transitional(unit.transitional);
    if (!t)
        throw MechError(ErrorCode::UnresolvedReference,
                        "unit '" + unit.id + "' names unknown transitional '" + unit.transitional + "'");
    if (!tokens_available(unit, world))
        throw MechError(ErrorCode::PreconditionNotMet, "unit '" + unit.id + "' lacks required tokens");
    if (!evaluate_state(unit.inputs, world))
        throw MechError(ErrorCode::PreconditionNotMet, "inputs of unit '" + unit.id + "' do not hold");

    Microworld next = world;
    consume_tokens(unit, next);
    apply_effects(model, *t, next);
    produce_tokens(unit, next);
    check_axioms(next);
    if (!evaluate_state(unit.outputs, next))
        throw MechError(ErrorCode::PostconditionNotMet, "outputs of unit '" + unit.id + "' do not hold after firing");
    return next;
}

// ---------------------------------------------------------------------------

bool ontology_pattern_matches(std::string_view pattern, std::string_view curie) {
    if (!pattern.empty() && pattern.back() == '*') {
        auto prefix = pattern.substr(0, pattern.size() - 1);
        return curie.substr(0, prefix.size()) == prefix;
    }
    return pattern == curie;
}

std::int64_t conservation_contribution(const ConservationDecl& decl, const Aggregate& aggregate) {
    std::int64_t multiplier = 1;
    if (decl.multiplier) {
        if (const auto* v = aggregate.quality(*decl.multiplier)) {
            if (const auto* c = std::get_if<Count>(v)) multiplier = c->value;
        }
    }
    std::optional<std::int64_t> weight;
    if (decl.weight_quality) {
        if (const auto* v = aggregate.quality(*decl.weight_quality))
            if (const auto* c = std::get_if<Count>(v)) weight = c->value;
    }
    if (!weight) {
        for (const auto& m : decl.matches) {
            bool hit = std::any_of(aggregate.ontology_refs.begin(), aggregate.ontology_refs.end(),
                                   [&](const std::string& ref) { return ontology_pattern_matches(m.pattern, ref); });
            if (hit) {
                weight = m.weight;
                break;
            }
        }
    }
    return multiplier * weight.value_or(0);
}

std::int64_t conservation_total(const ConservationDecl& decl, const Microworld& world) {
    std::int64_t total = 0;
    for (const auto& [_, a] : world.aggregates) total += conservation_contribution(decl, a);
    return total;
}

bool is_curie(std::string_view text) {
    auto colon = text.find(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) return false;
    auto prefix = text.substr(0, colon);
    auto local = text.substr(colon + 1);
    auto word_char = [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-';
    };
    if (!std::isalpha(static_cast<unsigned char>(prefix.front()))) return false;
    return std::all_of(prefix.begin(), prefix.end(), word_char) && std::all_of(local.begin(), local.end(), word_char);
}

}  // namespace mech
