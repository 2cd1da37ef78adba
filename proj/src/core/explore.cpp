#include "mech/core/explore.hpp"

#include "mech/core/errors.hpp"
#include "mech/core/operations.hpp"

#include <deque>
#include <unordered_map>

namespace mech {

bool unit_enabled(const TransitionalUnit& unit, const Microworld& world) {
    try {
        return tokens_available(unit, world) && evaluate_state(unit.inputs, world);
    } catch (const MechError&) {
        return false;
    }
}

Microworld fire_atomically(const ModelDocument& model, const TransitionalUnit& unit, const Microworld& world) {
    const Transitional* t = model.find_transitional(unit.transitional);
    if (!t) throw MechError(ErrorCode::UnresolvedReference, "unknown transitional '" + unit.transitional + "'");
    Microworld next = world;
    consume_tokens(unit, next);
    apply_effects(model, *t, next);
    produce_tokens(unit, next);
    auto queue = std::move(next.message_queue);
    next.message_queue.clear();
    for (const auto& m : queue) deliver_message(m, next);
    check_axioms(next);
    return next;
}

std::string state_key(const Microworld& world) {
    std::string key;
    for (const auto& [id, a] : world.aggregates) {
        key += id;
        key += '{';
        for (const auto& q : a.qualities) {
            key += q.name;
            key += '=';
            key += format_value(q.value);
            key += ';';
        }
        key += '}';
    }
    key += '|';
    for (const auto& [id, r] : world.relations) {
        key += id;
        key += '=';
        key += format_value(r.value);
        key += ';';
    }
    key += '|';
    key += to_string(normalized(world.marking));
    return key;
}

StateGraph explore_states(const ModelDocument& model, const std::vector<const TransitionalUnit*>& units,
                          const Microworld& start, const ExploreLimits& limits) {
    StateGraph g;
    std::unordered_map<std::string, std::size_t> index;
    g.states.push_back(start);
    index.emplace(state_key(start), 0);
    std::deque<std::size_t> frontier{0};
    while (!frontier.empty()) {
        std::size_t s = frontier.front();
        frontier.pop_front();
        g.enabled.resize(g.states.size());
        g.successors.resize(g.states.size());
        for (std::size_t u = 0; u < units.size(); ++u) {
            if (!unit_enabled(*units[u], g.states[s])) continue;
            g.enabled[s].push_back(u);
            Microworld next;
            try {
                next = fire_atomically(model, *units[u], g.states[s]);
            } catch (const MechError&) {
                continue;
            }
            bool over = false;
            for (const auto& [place, n] : next.marking)
                if (n > limits.token_bound) over = true;
            if (over) {
                g.bound_exceeded = true;
                continue;
            }
            std::string key = state_key(next);
            auto it = index.find(key);
            if (it == index.end()) {
                if (g.states.size() >= limits.max_states) {
                    g.overflow = true;
                    continue;
                }
                it = index.emplace(std::move(key), g.states.size()).first;
                g.states.push_back(std::move(next));
                frontier.push_back(it->second);
            }
            g.successors[s].emplace_back(u, it->second);
        }
    }
    g.enabled.resize(g.states.size());
    g.successors.resize(g.states.size());
    return g;
}

}  // namespace mech
