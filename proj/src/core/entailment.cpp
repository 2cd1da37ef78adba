#include "mech/core/entailment.hpp"

#include "mech/core/errors.hpp"
#include "mech/core/operations.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace mech {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string symbol_text(const QualityValue& v) {
    if (const auto* s = std::get_if<Symbol>(&v)) return s->name;
    return std::get<bool>(v) ? "true" : "false";
}

bool symbolic_kind(const QualityValue& v) {
    return std::holds_alternative<Symbol>(v) || std::holds_alternative<bool>(v);
}

double numeric_of(const QualityValue& v) {
    if (const auto* c = std::get_if<Count>(&v)) return static_cast<double>(c->value);
    return std::get<Scalar>(v).value;
}

std::string unit_of(const QualityValue& v) {
    if (const auto* s = std::get_if<Scalar>(&v)) return s->unit;
    return {};
}

}  // namespace

std::string target_of(const QualityState& s) {
    return s.aggregate + "." + s.quality;
}

std::string place_target(std::string_view place) {
    return "place:" + std::string(place);
}

GroundExpr to_ground(const StateExpr& expr, bool negated) {
    GroundExpr g;
    switch (expr.kind) {
    case StateExpr::Kind::Atom: {
        g.kind = GroundExpr::Kind::Atom;
        std::visit(
            [&](const auto& a) {
                using T = std::decay_t<decltype(a)>;
                if constexpr (std::is_same_v<T, QualityState>) {
                    g.atom = {target_of(a), a.op, a.value};
                } else if constexpr (std::is_same_v<T, ConfigurationState>) {
                    g.atom = {"rq:" + a.relation, a.op, a.value};
                } else if constexpr (std::is_same_v<T, EmergentState>) {
                    g.atom = {"emergent:" + a.predicate, Comparator::Eq, true};
                } else {
                    g.atom = {place_target(a.place), Comparator::Ge, Count{a.required}};
                }
            },
            expr.atom);
        if (negated) g.atom.op = negate(g.atom.op);
        return g;
    }
    case StateExpr::Kind::Not: return to_ground(expr.children.at(0), !negated);
    case StateExpr::Kind::And:
    case StateExpr::Kind::Or: {
        bool conj = (expr.kind == StateExpr::Kind::And) != negated;
        g.kind = conj ? GroundExpr::Kind::And : GroundExpr::Kind::Or;
        for (const auto& c : expr.children) g.children.push_back(to_ground(c, negated));
        return g;
    }
    }
    return g;
}

GroundExpr token_requirements(const TransitionalUnit& unit) {
    std::map<std::string, std::int64_t> need;
    for (const auto& tc : unit.consumes) need[tc.place] += tc.count;
    GroundExpr g;
    g.kind = GroundExpr::Kind::And;
    for (const auto& [place, n] : need) {
        GroundExpr a;
        a.kind = GroundExpr::Kind::Atom;
        a.atom = {place_target(place), Comparator::Ge, Count{n}};
        g.children.push_back(std::move(a));
    }
    return g;
}

// ---------------------------------------------------------------------------
// ValueBox

ValueBox ValueBox::top_for(const QualityValue& sample) {
    ValueBox b;
    if (symbolic_kind(sample)) {
        b.domain_ = Domain::Symbolic;
        b.complement_ = true;
        if (std::holds_alternative<bool>(sample)) {
            b.boolean_ = true;
            b.universe_ = std::set<std::string>{"false", "true"};
        }
    } else {
        b.domain_ = Domain::Numeric;
        b.integral_ = std::holds_alternative<Count>(sample);
        b.lo_ = b.integral_ ? 0.0 : -kInf;
        b.hi_ = kInf;
        b.unit_ = unit_of(sample);
    }
    b.normalize();
    return b;
}

ValueBox ValueBox::point(const QualityValue& v) {
    ValueBox b = top_for(v);
    if (b.domain_ == Domain::Symbolic) {
        b.complement_ = false;
        b.symbols_ = {symbol_text(v)};
    } else {
        b.lo_ = b.hi_ = numeric_of(v);
        b.lo_open_ = b.hi_open_ = false;
    }
    b.normalize();
    return b;
}

ValueBox ValueBox::count_at_least(std::int64_t n) {
    ValueBox b = top_for(Count{0});
    b.lo_ = static_cast<double>(n);
    b.normalize();
    return b;
}

ValueBox ValueBox::over_universe(std::set<std::string> universe) {
    ValueBox b;
    b.domain_ = Domain::Symbolic;
    b.universe_ = std::move(universe);
    b.normalize();
    return b;
}

bool ValueBox::allows(const std::string& s) const {
    bool listed = symbols_.count(s) > 0;
    return complement_ ? !listed : listed;
}

void ValueBox::normalize() {
    if (empty_) return;
    if (domain_ == Domain::Symbolic) {
        if (complement_ && universe_) {
            std::set<std::string> keep;
            for (const auto& s : *universe_)
                if (!symbols_.count(s)) keep.insert(s);
            symbols_ = std::move(keep);
            complement_ = false;
        }
        if (!complement_ && symbols_.empty()) empty_ = true;
        return;
    }
    if (integral_) {
        if (std::isfinite(lo_)) {
            double l = lo_open_ ? std::floor(lo_) + 1 : std::ceil(lo_);
            lo_ = l;
            lo_open_ = false;
        }
        if (std::isfinite(hi_)) {
            double h = hi_open_ ? std::ceil(hi_) - 1 : std::floor(hi_);
            hi_ = h;
            hi_open_ = false;
        }
    }
    if (lo_ > hi_ || (lo_ == hi_ && (lo_open_ || hi_open_))) empty_ = true;
}

bool ValueBox::is_point() const {
    if (empty_) return false;
    if (domain_ == Domain::Symbolic) return !complement_ && symbols_.size() == 1;
    return lo_ == hi_ && !lo_open_ && !hi_open_;
}

void ValueBox::refine(Comparator op, const QualityValue& value) {
    if (empty_) return;
    if (domain_ == Domain::Symbolic) {
        if (!symbolic_kind(value)) {
            empty_ = true;
            return;
        }
        std::string s = symbol_text(value);
        if (op == Comparator::Eq) {
            if (allows(s)) {
                complement_ = false;
                symbols_ = {s};
            } else {
                empty_ = true;
            }
        } else if (op == Comparator::Ne) {
            if (complement_)
                symbols_.insert(s);
            else
                symbols_.erase(s);
        }
        normalize();
        return;
    }
    if (symbolic_kind(value) || unit_of(value) != unit_) {
        empty_ = true;
        return;
    }
    double v = numeric_of(value);
    auto tighten_lo = [&](double x, bool open) {
        if (x > lo_) {
            lo_ = x;
            lo_open_ = open;
        } else if (x == lo_) {
            lo_open_ = lo_open_ || open;
        }
    };
    auto tighten_hi = [&](double x, bool open) {
        if (x < hi_) {
            hi_ = x;
            hi_open_ = open;
        } else if (x == hi_) {
            hi_open_ = hi_open_ || open;
        }
    };
    switch (op) {
    case Comparator::Eq:
        tighten_lo(v, false);
        tighten_hi(v, false);
        break;
    case Comparator::Lt: tighten_hi(v, true); break;
    case Comparator::Le: tighten_hi(v, false); break;
    case Comparator::Gt: tighten_lo(v, true); break;
    case Comparator::Ge: tighten_lo(v, false); break;
    case Comparator::Ne:
        if (is_point() && lo_ == v) {
            empty_ = true;
            return;
        }
        if (lo_ == v) lo_open_ = true;
        if (hi_ == v) hi_open_ = true;
        break;
    }
    normalize();
}

bool ValueBox::definitely(Comparator op, const QualityValue& value) const {
    if (empty_) return true;
    if (domain_ == Domain::Symbolic) {
        if (!symbolic_kind(value)) return false;
        std::string s = symbol_text(value);
        if (op == Comparator::Eq) return !complement_ && symbols_.size() == 1 && *symbols_.begin() == s;
        if (op == Comparator::Ne) return !allows(s);
        return false;
    }
    if (symbolic_kind(value) || unit_of(value) != unit_) return false;
    double v = numeric_of(value);
    switch (op) {
    case Comparator::Eq: return is_point() && lo_ == v;
    case Comparator::Ne: return v < lo_ || v > hi_ || (v == lo_ && lo_open_) || (v == hi_ && hi_open_);
    case Comparator::Lt: return hi_ < v || (hi_ == v && hi_open_);
    case Comparator::Le: return hi_ <= v;
    case Comparator::Gt: return lo_ > v || (lo_ == v && lo_open_);
    case Comparator::Ge: return lo_ >= v;
    }
    return false;
}

bool ValueBox::possibly(Comparator op, const QualityValue& value) const {
    if (empty_) return false;
    ValueBox copy = *this;
    copy.refine(op, value);
    return !copy.empty_;
}

void ValueBox::shift(double delta) {
    if (empty_ || domain_ != Domain::Numeric) return;
    lo_ += delta;
    hi_ += delta;
    normalize();
}

void ValueBox::join(const ValueBox& other) {
    if (other.empty_) return;
    if (empty_) {
        *this = other;
        return;
    }
    if (domain_ != other.domain_) {
        // Incomparable facts: fall back to an unconstrained symbolic box.
        *this = ValueBox{};
        return;
    }
    if (domain_ == Domain::Symbolic) {
        if (!complement_ && !other.complement_) {
            symbols_.insert(other.symbols_.begin(), other.symbols_.end());
        } else if (complement_ && other.complement_) {
            std::set<std::string> both;
            for (const auto& s : symbols_)
                if (other.symbols_.count(s)) both.insert(s);
            symbols_ = std::move(both);
        } else {
            const auto& positive = complement_ ? other.symbols_ : symbols_;
            std::set<std::string> excluded = complement_ ? symbols_ : other.symbols_;
            for (const auto& s : positive) excluded.erase(s);
            symbols_ = std::move(excluded);
            complement_ = true;
        }
        normalize();
        return;
    }
    if (other.lo_ < lo_ || (other.lo_ == lo_ && !other.lo_open_)) {
        lo_open_ = other.lo_ < lo_ ? other.lo_open_ : false;
        lo_ = other.lo_;
    }
    if (other.hi_ > hi_ || (other.hi_ == hi_ && !other.hi_open_)) {
        hi_open_ = other.hi_ > hi_ ? other.hi_open_ : false;
        hi_ = other.hi_;
    }
    normalize();
}

std::optional<QualityValue> ValueBox::point_value() const {
    if (!is_point()) return std::nullopt;
    if (domain_ == Domain::Symbolic) {
        const auto& s = *symbols_.begin();
        if (boolean_) return QualityValue{s == "true"};
        return QualityValue{Symbol{s}};
    }
    if (integral_ && unit_.empty()) return QualityValue{Count{static_cast<std::int64_t>(lo_)}};
    return QualityValue{Scalar{lo_, unit_}};
}

std::string ValueBox::describe() const {
    if (empty_) return "no value";
    if (auto p = point_value()) return "= " + format_value(*p);
    std::ostringstream os;
    if (domain_ == Domain::Symbolic) {
        os << (complement_ ? "not in {" : "in {");
        bool first = true;
        for (const auto& s : symbols_) {
            if (!first) os << ", ";
            first = false;
            os << s;
        }
        os << '}';
        return os.str();
    }
    auto bound = [](double x) { return std::isinf(x) ? std::string(x < 0 ? "-inf" : "inf") : format_number(x); };
    os << "in " << (lo_open_ || std::isinf(lo_) ? '(' : '[') << bound(lo_) << ", " << bound(hi_)
       << (hi_open_ || std::isinf(hi_) ? ')' : ']');
    if (!unit_.empty()) os << " [" << unit_ << ']';
    return os.str();
}

// ---------------------------------------------------------------------------
// Abstract states

AbstractState abstract_of(const Microworld& world) {
    AbstractState s;
    for (const auto& [id, a] : world.aggregates)
        for (const auto& q : a.qualities) s.insert_or_assign(id + "." + q.name, ValueBox::point(q.value));
    for (const auto& [id, r] : world.relations) s.insert_or_assign("rq:" + id, ValueBox::point(r.value));
    for (const auto& [place, n] : world.marking) s.insert_or_assign(place_target(place), ValueBox::point(Count{n}));
    for (const auto& [id, e] : world.emergents) {
        try {
            s.insert_or_assign("emergent:" + id, ValueBox::point(evaluate_state(e.when, world)));
        } catch (const MechError&) {
            // unresolved predicates stay unconstrained
        }
    }
    return s;
}

AbstractState initial_facts(const ModelDocument& model) {
    AbstractState s = abstract_of(initial_world(model));
    for (const auto& p : model.places) s.try_emplace(place_target(p.id), ValueBox::point(Count{0}));
    return s;
}

bool contradictory(const AbstractState& state) {
    return std::any_of(state.begin(), state.end(), [](const auto& kv) { return kv.second.empty(); });
}

namespace {

ValueBox box_for(const AbstractState& state, const GroundAtom& atom) {
    auto it = state.find(atom.target);
    if (it != state.end()) return it->second;
    if (atom.target.rfind("place:", 0) == 0) return ValueBox::count_at_least(0);
    return ValueBox::top_for(atom.value);
}

}  // namespace

void assume(AbstractState& state, const GroundExpr& expr) {
    switch (expr.kind) {
    case GroundExpr::Kind::Atom: {
        ValueBox b = box_for(state, expr.atom);
        b.refine(expr.atom.op, expr.atom.value);
        state.insert_or_assign(expr.atom.target, b);
        return;
    }
    case GroundExpr::Kind::And:
        for (const auto& c : expr.children) assume(state, c);
        return;
    case GroundExpr::Kind::Or: {
        std::optional<AbstractState> joined;
        for (const auto& c : expr.children) {
            AbstractState branch = state;
            assume(branch, c);
            if (contradictory(branch)) continue;
            if (!joined) {
                joined = std::move(branch);
                continue;
            }
            for (auto it = joined->begin(); it != joined->end();) {
                auto other = branch.find(it->first);
                if (other == branch.end()) {
                    it = joined->erase(it);
                } else {
                    it->second.join(other->second);
                    ++it;
                }
            }
        }
        if (joined) {
            state = std::move(*joined);
        } else {
            ValueBox bottom = ValueBox::point(Count{0});
            bottom.refine(Comparator::Ne, Count{0});
            state.insert_or_assign("", bottom);
        }
        return;
    }
    }
}

bool entails(const AbstractState& state, const GroundExpr& expr) {
    if (contradictory(state)) return true;
    switch (expr.kind) {
    case GroundExpr::Kind::Atom: return box_for(state, expr.atom).definitely(expr.atom.op, expr.atom.value);
    case GroundExpr::Kind::And:
        return std::all_of(expr.children.begin(), expr.children.end(),
                           [&](const GroundExpr& c) { return entails(state, c); });
    case GroundExpr::Kind::Or:
        return std::any_of(expr.children.begin(), expr.children.end(),
                           [&](const GroundExpr& c) { return entails(state, c); });
    }
    return false;
}

bool satisfiable(const AbstractState& state, const GroundExpr& expr) {
    AbstractState copy = state;
    assume(copy, expr);
    return !contradictory(copy);
}

std::set<std::string> referenced_targets(const GroundExpr& expr) {
    std::set<std::string> out;
    if (expr.kind == GroundExpr::Kind::Atom) {
        out.insert(expr.atom.target);
        return out;
    }
    for (const auto& c : expr.children) {
        auto sub = referenced_targets(c);
        out.insert(sub.begin(), sub.end());
    }
    return out;
}

std::set<std::string> touched_targets(const ModelDocument& model, const TransitionalUnit& unit) {
    std::set<std::string> out;
    for (const auto& tc : unit.consumes) out.insert(place_target(tc.place));
    for (const auto& tc : unit.produces) out.insert(place_target(tc.place));
    const Transitional* t = model.find_transitional(unit.transitional);
    if (!t) return out;
    for (const auto& decl : t->effects) {
        std::visit(
            [&](const auto& e) {
                using T = std::decay_t<decltype(e)>;
                if constexpr (std::is_same_v<T, SetQuality> || std::is_same_v<T, AdjustQuality>) {
                    out.insert(e.aggregate + "." + e.quality);
                } else if constexpr (std::is_same_v<T, SetRelation>) {
                    out.insert("rq:" + e.relation);
                } else if constexpr (std::is_same_v<T, CreateAggregate>) {
                    if (const Aggregate* tmpl = model.find_template(e.from_template))
                        for (const auto& q : tmpl->qualities) out.insert(e.id + "." + q.name);
                } else if constexpr (std::is_same_v<T, DestroyAggregate>) {
                    if (const Aggregate* a = model.find_aggregate(e.id))
                        for (const auto& q : a->qualities) out.insert(e.id + "." + q.name);
                } else if constexpr (std::is_same_v<T, SendMessage>) {
                    out.insert(e.receiver + "." + e.quality);
                }
            },
            decl.effect);
    }
    return out;
}

AbstractState unit_post_state(const ModelDocument& model, const TransitionalUnit& unit, AbstractState pre) {
    assume(pre, to_ground(unit.inputs));
    assume(pre, token_requirements(unit));
    AbstractState& s = pre;
    auto box_at = [&](const std::string& target, const QualityValue& sample) -> ValueBox& {
        auto it = s.find(target);
        if (it == s.end()) it = s.emplace(target, ValueBox::top_for(sample)).first;
        return it->second;
    };
    if (const Transitional* t = model.find_transitional(unit.transitional)) {
        for (const auto& decl : t->effects) {
            std::visit(
                [&](const auto& e) {
                    using T = std::decay_t<decltype(e)>;
                    if constexpr (std::is_same_v<T, SetQuality>) {
                        box_at(e.aggregate + "." + e.quality, e.value).assign(e.value);
                    } else if constexpr (std::is_same_v<T, AdjustQuality>) {
                        if (const auto* d = std::get_if<std::int64_t>(&e.delta))
                            box_at(e.aggregate + "." + e.quality, Count{0}).shift(static_cast<double>(*d));
                        else {
                            const auto& sc = std::get<Scalar>(e.delta);
                            box_at(e.aggregate + "." + e.quality, sc).shift(sc.value);
                        }
                    } else if constexpr (std::is_same_v<T, SetRelation>) {
                        box_at("rq:" + e.relation, e.value).assign(e.value);
                    } else if constexpr (std::is_same_v<T, CreateAggregate>) {
                        if (const Aggregate* tmpl = model.find_template(e.from_template))
                            for (const auto& q : tmpl->qualities)
                                s.insert_or_assign(e.id + "." + q.name, ValueBox::point(q.value));
                    } else if constexpr (std::is_same_v<T, DestroyAggregate>) {
                        std::string prefix = e.id + ".";
                        std::erase_if(s, [&](const auto& kv) { return kv.first.rfind(prefix, 0) == 0; });
                    } else if constexpr (std::is_same_v<T, SendMessage>) {
                        box_at(e.receiver + "." + e.quality, e.value).assign(e.value);
                    }
                },
                decl.effect);
        }
    }
    for (const auto& tc : unit.consumes) box_at(place_target(tc.place), Count{0}).shift(-static_cast<double>(tc.count));
    for (const auto& tc : unit.produces) box_at(place_target(tc.place), Count{0}).shift(static_cast<double>(tc.count));
    return pre;
}

bool io_compatible(const TransitionalUnit& producer, const TransitionalUnit& consumer, const ModelDocument& model) {
    for (const auto* u : {&producer, &consumer})
        if (!model.find_transitional(u->transitional))
            throw MechError(ErrorCode::UnresolvedReference,
                            "unit '" + u->id + "' names unknown transitional '" + u->transitional + "'");

    GroundExpr outputs = to_ground(producer.outputs);
    std::set<std::string> touched = touched_targets(model, producer);
    auto mentioned = referenced_targets(outputs);
    touched.insert(mentioned.begin(), mentioned.end());

    AbstractState state = initial_facts(model);
    for (const auto& t : touched) state.erase(t);

    std::map<std::string, std::int64_t> produced;
    for (const auto& tc : producer.produces) produced[tc.place] += tc.count;
    for (const auto& tc : producer.consumes) produced.try_emplace(tc.place, 0);
    for (const auto& [place, n] : produced) state.insert_or_assign(place_target(place), ValueBox::count_at_least(n));

    assume(state, outputs);
    return entails(state, to_ground(consumer.inputs)) && entails(state, token_requirements(consumer));
}

}  // namespace mech
