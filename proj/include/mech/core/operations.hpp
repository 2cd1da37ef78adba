#pragma once

#include "mech/core/model.hpp"

#include <set>
#include <span>
#include <string>
#include <vector>

namespace mech {

/// Canonical text of a value: `OPEN`, `true`, `2`, `50 [L]`.
std::string format_value(const QualityValue& v);
/// Shortest decimal text that reads back to the same double.
std::string format_number(double x);
/// `n` for integral times, `n/d` otherwise.
std::string format_time(const Time& t);
/// Always `num/den`; used by the trace format.
std::string format_time_fraction(const Time& t);

/// Transitive closure of part links below `aggregate_id`, root excluded.
/// Throws UnknownAggregate, or CycleDetected naming the cycle path.
std::set<std::string> part_closure(std::string_view aggregate_id, const std::map<std::string, Aggregate>& aggregates);
std::set<std::string> part_closure(std::string_view aggregate_id, std::span<const Aggregate> aggregates);

/// Finds one cycle in the part graph, returned as a path whose first and last
/// element coincide. Empty when the graph is acyclic.
std::vector<std::string> find_part_cycle(const std::map<std::string, Aggregate>& aggregates);

/// Compares two values of the same kind. Throws UnitMismatch for scalars with
/// different units and TypeMismatch for kind or comparator errors.
bool compare_values(const QualityValue& lhs, Comparator op, const QualityValue& rhs);

bool evaluate_state(const StateExpr& expr, const Microworld& world);
bool evaluate_atom(const StateAtom& atom, const Microworld& world);

/// One observed change: target path, previous and new value text.
struct StateDelta {
    std::string target;
    std::string old_value;
    std::string new_value;
    bool operator==(const StateDelta&) const = default;
};

/// Token requirements of a unit are met by the marking.
bool tokens_available(const TransitionalUnit& unit, const Microworld& world);

/// Removes consumed tokens. Throws PreconditionNotMet when short.
std::vector<StateDelta> consume_tokens(const TransitionalUnit& unit, Microworld& world);
std::vector<StateDelta> produce_tokens(const TransitionalUnit& unit, Microworld& world);

/// Applies a transitional's effect list in order. Messages are stamped with
/// `world.clock + latency` and appended to the queue.
std::vector<StateDelta> apply_effects(const ModelDocument& model, const Transitional& transitional, Microworld& world);

/// Applies a message payload to its receiver.
StateDelta deliver_message(const Message& message, Microworld& world);

/// Throws AxiomViolated when any axiom fails.
void check_axioms(const Microworld& world);

/// Input-transition-output as one atomic step. The input snapshot is never
/// modified. Throws PreconditionNotMet, AxiomViolated, or
/// PostconditionNotMet when the outputs do not hold afterwards.
Microworld apply_transitional_unit(const ModelDocument& model, const TransitionalUnit& unit, const Microworld& world);

/// Contribution of one aggregate to a conserved quantity.
std::int64_t conservation_contribution(const ConservationDecl& decl, const Aggregate& aggregate);
std::int64_t conservation_total(const ConservationDecl& decl, const Microworld& world);

/// CURIE shape check: `PREFIX:local`, prefix starting with a letter.
bool is_curie(std::string_view text);

/// Exact or `prefix*` match of an ontology pattern.
bool ontology_pattern_matches(std::string_view pattern, std::string_view curie);

}  // namespace mech
