#pragma once

#include "mech/core/model.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace mech {

/// One comparison against a single target, after negations are pushed down.
/// Targets are `agg.quality`, `rq:id`, `place:id` or `emergent:id`.
struct GroundAtom {
    std::string target;
    Comparator op = Comparator::Eq;
    QualityValue value;
    bool operator==(const GroundAtom&) const = default;
};

/// Negation normal form over ground atoms.
struct GroundExpr {
    enum class Kind { Atom, And, Or };
    Kind kind = Kind::And;
    GroundAtom atom;
    std::vector<GroundExpr> children;
};

GroundExpr to_ground(const StateExpr& expr, bool negated = false);

std::string target_of(const QualityState& s);
std::string place_target(std::string_view place);

/// Over-approximation of the values a single target can take: a symbol set
/// (possibly complemented) or a numeric interval.
class ValueBox {
public:
    enum class Domain { Symbolic, Numeric };

    static ValueBox top_for(const QualityValue& sample);
    static ValueBox point(const QualityValue& v);
    static ValueBox count_at_least(std::int64_t n);
    /// Symbolic box restricted to a finite universe.
    static ValueBox over_universe(std::set<std::string> universe);

    Domain domain() const { return domain_; }
    bool empty() const { return empty_; }
    bool is_point() const;

    /// Intersects with the set of values satisfying `op value`.
    void refine(Comparator op, const QualityValue& value);
    /// Every value in the box satisfies `op value`.
    bool definitely(Comparator op, const QualityValue& value) const;
    /// Some value in the box satisfies `op value`.
    bool possibly(Comparator op, const QualityValue& value) const;

    void assign(const QualityValue& v) { *this = point(v); }
    void shift(double delta);
    /// Smallest box containing both.
    void join(const ValueBox& other);

    std::optional<QualityValue> point_value() const;
    std::string describe() const;

    bool operator==(const ValueBox&) const = default;

private:
    Domain domain_ = Domain::Symbolic;
    bool empty_ = false;
    // symbolic
    bool complement_ = true;
    std::set<std::string> symbols_;
    std::optional<std::set<std::string>> universe_;
    bool boolean_ = false;
    // numeric
    double lo_ = 0, hi_ = 0;
    bool lo_open_ = false, hi_open_ = false;
    bool integral_ = false;
    std::string unit_;

    void normalize();
    bool allows(const std::string& s) const;
};

/// Abstract state: one box per target; absent targets are unconstrained.
using AbstractState = std::map<std::string, ValueBox>;

/// Point facts for every quality, relation, emergent predicate and marked
/// place of a snapshot.
AbstractState abstract_of(const Microworld& world);

/// Facts of the model's initial world, including zero-token places.
AbstractState initial_facts(const ModelDocument& model);

/// Some box is empty: the state describes no concrete world.
bool contradictory(const AbstractState& state);

/// Refines `state` by assuming `expr` holds. Disjunctions join their branches.
void assume(AbstractState& state, const GroundExpr& expr);

/// True when `expr` holds for every concrete state described by `state`.
bool entails(const AbstractState& state, const GroundExpr& expr);

/// True when every atom of `expr` could hold somewhere in `state`.
bool satisfiable(const AbstractState& state, const GroundExpr& expr);

/// Targets written by a transitional or a unit's token flow.
std::set<std::string> touched_targets(const ModelDocument& model, const TransitionalUnit& unit);
std::set<std::string> referenced_targets(const GroundExpr& expr);

/// Post-state of a unit computed from its inputs: assumes the inputs and the
/// token requirements, then applies effects and token flow abstractly.
AbstractState unit_post_state(const ModelDocument& model, const TransitionalUnit& unit, AbstractState pre);

/// Consumer inputs (and token needs) are entailed by the producer's outputs
/// plus initial facts the producer leaves alone. Throws UnresolvedReference
/// when either unit names an unknown transitional.
bool io_compatible(const TransitionalUnit& producer, const TransitionalUnit& consumer, const ModelDocument& model);

/// Token requirements of a unit as ground atoms (`place:p >= n`).
GroundExpr token_requirements(const TransitionalUnit& unit);

}  // namespace mech
