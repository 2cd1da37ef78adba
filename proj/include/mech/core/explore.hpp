#pragma once

#include "mech/core/model.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace mech {

/// Unit is enabled: its tokens are available and its inputs hold. Evaluation
/// errors count as not enabled.
bool unit_enabled(const TransitionalUnit& unit, const Microworld& world);

/// Fires a unit as one untimed step: consume, apply effects, produce, then
/// deliver every queued message. The clock is left unchanged. Throws
/// MechError when the step is impossible or breaks an axiom.
Microworld fire_atomically(const ModelDocument& model, const TransitionalUnit& unit, const Microworld& world);

/// Canonical text of a snapshot's aggregates, relations and marking; equal
/// keys mean equal untimed states.
std::string state_key(const Microworld& world);

struct ExploreLimits {
    std::int64_t token_bound = 64;
    std::size_t max_states = 100000;
};

struct StateGraph {
    /// states[0] is the start state.
    std::vector<Microworld> states;
    /// Per state, the enabled unit indices in the order given.
    std::vector<std::vector<std::size_t>> enabled;
    /// Per state, (unit index, successor state index).
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> successors;
    /// Exploration stopped at max_states.
    bool overflow = false;
    /// Some successor put more than token_bound tokens on a place and was
    /// dropped.
    bool bound_exceeded = false;
};

/// Breadth-first exploration over every enabled-unit choice.
StateGraph explore_states(const ModelDocument& model, const std::vector<const TransitionalUnit*>& units,
                          const Microworld& start, const ExploreLimits& limits = {});

}  // namespace mech
