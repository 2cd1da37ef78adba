#include "mech/engine/engine.hpp"

#include "mech/core/errors.hpp"
#include "mech/core/explore.hpp"
#include "mech/lang/json_export.hpp"

#include <algorithm>

namespace mech {

std::string_view to_string(TieBreak p) {
    return p == TieBreak::Lexicographic ? "lexicographic" : "seeded-random";
}

std::optional<TieBreak> parse_tie_break(std::string_view text) {
    if (text == "lexicographic") return TieBreak::Lexicographic;
    if (text == "seeded-random" || text == "random") return TieBreak::SeededRandom;
    return std::nullopt;
}

std::string_view to_string(TraceKind k) {
    switch (k) {
    case TraceKind::UnitStarted: return "unit-started";
    case TraceKind::UnitCompleted: return "unit-completed";
    case TraceKind::MessageSent: return "message-sent";
    case TraceKind::MessageDelivered: return "message-delivered";
    case TraceKind::StateDelta: return "state-delta";
    case TraceKind::TerminationReached: return "termination-reached";
    case TraceKind::Deadlock: return "deadlock";
    }
    return "state-delta";
}

std::string_view to_string(RunOutcome o) {
    switch (o) {
    case RunOutcome::TerminationReached: return "termination-reached";
    case RunOutcome::HorizonReached: return "horizon-reached";
    case RunOutcome::Deadlock: return "deadlock";
    }
    return "horizon-reached";
}

std::optional<Time> WorldState::next_pending() const {
    std::optional<Time> best;
    for (const auto& c : pending)
        if (!best || c.at < *best) best = c.at;
    for (const auto& m : snapshot.message_queue)
        if (!best || m.deliver_at < *best) best = m.deliver_at;
    return best;
}

namespace {

enum class StepStatus { Progress, Horizon, Deadlock };

bool holds(const StateExpr& e, const Microworld& w) {
    try {
        return evaluate_state(e, w);
    } catch (const MechError&) {
        return false;
    }
}

void deliver_due(WorldState& w, std::vector<TraceEvent>& events) {
    auto& queue = w.snapshot.message_queue;
    std::stable_sort(queue.begin(), queue.end(),
                     [](const Message& a, const Message& b) { return a.deliver_at < b.deliver_at; });
    std::size_t n = 0;
    while (n < queue.size() && queue[n].deliver_at <= w.snapshot.clock) ++n;
    if (n == 0) return;
    std::vector<Message> due(queue.begin(), queue.begin() + static_cast<std::ptrdiff_t>(n));
    queue.erase(queue.begin(), queue.begin() + static_cast<std::ptrdiff_t>(n));
    for (const auto& m : due) {
        StateDelta d = deliver_message(m, w.snapshot);
        events.push_back({w.snapshot.clock, TraceKind::MessageDelivered, m.id, {d}});
    }
}

void complete(WorldState& w, const CompiledModel& c, const TransitionalUnit& unit, std::vector<TraceEvent>& events) {
    const Transitional* t = c.model.find_transitional(unit.transitional);
    if (!t) throw MechError(ErrorCode::UnresolvedReference, "unit '" + unit.id + "' has no transitional");
    std::size_t queued = w.snapshot.message_queue.size();
    std::vector<StateDelta> delta = apply_effects(c.model, *t, w.snapshot);
    auto produced = produce_tokens(unit, w.snapshot);
    delta.insert(delta.end(), produced.begin(), produced.end());
    events.push_back({w.snapshot.clock, TraceKind::UnitCompleted, unit.id, std::move(delta)});
    for (std::size_t i = queued; i < w.snapshot.message_queue.size(); ++i) {
        const Message& m = w.snapshot.message_queue[i];
        events.push_back({w.snapshot.clock,
                          TraceKind::MessageSent,
                          m.id,
                          {{m.receiver + "." + m.quality, "", format_value(m.value)}}});
    }
}

void complete_due(WorldState& w, const CompiledModel& c, std::vector<TraceEvent>& events) {
    std::stable_sort(w.pending.begin(), w.pending.end(), [](const Completion& a, const Completion& b) {
        return a.at < b.at || (a.at == b.at && a.seq < b.seq);
    });
    while (!w.pending.empty() && w.pending.front().at <= w.snapshot.clock) {
        Completion done = w.pending.front();
        w.pending.erase(w.pending.begin());
        const TransitionalUnit* u = c.model.find_unit(done.unit);
        if (!u) throw MechError(ErrorCode::UnresolvedReference, "unknown unit '" + done.unit + "'");
        complete(w, c, *u, events);
    }
}

void fire(WorldState& w, const CompiledModel& c, const std::string& id, std::vector<TraceEvent>& events) {
    const TransitionalUnit* u = c.model.find_unit(id);
    const Transitional* t = u ? c.model.find_transitional(u->transitional) : nullptr;
    if (!u || !t) throw MechError(ErrorCode::UnresolvedReference, "unknown unit '" + id + "'");
    auto consumed = consume_tokens(*u, w.snapshot);
    events.push_back({w.snapshot.clock, TraceKind::UnitStarted, u->id, std::move(consumed)});
    if (t->delay == Time(0)) {
        complete(w, c, *u, events);
    } else {
        w.pending.push_back({u->id, w.snapshot.clock + t->delay, w.next_seq++});
    }
}

StepStatus step_impl(WorldState& w, const CompiledModel& c, TieBreak policy, const Time* max_time,
                     std::vector<TraceEvent>& events) {
    deliver_due(w, events);
    complete_due(w, c, events);
    auto ready = enabled(w, c);
    if (!ready.empty()) {
        if (max_time && w.snapshot.clock >= *max_time) return StepStatus::Horizon;
        std::size_t pick = 0;
        if (policy == TieBreak::SeededRandom) pick = static_cast<std::size_t>(w.rng() % ready.size());
        fire(w, c, ready[pick], events);
    } else if (auto next = w.next_pending()) {
        if (max_time && *next > *max_time) return StepStatus::Horizon;
        w.snapshot.clock = *next;
        deliver_due(w, events);
        complete_due(w, c, events);
    } else {
        return events.empty() ? StepStatus::Deadlock : StepStatus::Progress;
    }
    check_axioms(w.snapshot);
    return StepStatus::Progress;
}

std::vector<const ConservationDecl*> active_conservation(const ModelDocument& model) {
    std::vector<const ConservationDecl*> out;
    auto add = [&](const ConservationDecl* d) {
        if (d && std::find(out.begin(), out.end(), d) == out.end()) out.push_back(d);
    };
    for (const auto& id : model.active_mechanisms()) {
        const Mechanism* m = model.find_mechanism(id);
        if (!m) continue;
        if (m->conserved.empty())
            for (const auto& d : model.conservation) add(&d);
        for (const auto& name : m->conserved) add(model.find_conservation(name));
    }
    return out;
}

}  // namespace

WorldState init_world(const CompiledModel& compiled, std::uint64_t seed) {
    WorldState w;
    w.snapshot = initial_world(compiled.model);
    w.rng_seed = seed;
    w.rng.seed(seed);
    if (!holds(active_setup(compiled.model), w.snapshot))
        throw MechError(ErrorCode::InitError, "the initial state does not satisfy the setup condition");
    check_axioms(w.snapshot);
    return w;
}

std::vector<std::string> enabled(const WorldState& world, const CompiledModel& compiled) {
    std::vector<std::string> out;
    for (const auto* u : active_units(compiled.model)) {
        bool busy = std::any_of(world.pending.begin(), world.pending.end(),
                                [&](const Completion& p) { return p.unit == u->id; });
        if (!busy && unit_enabled(*u, world.snapshot)) out.push_back(u->id);
    }
    std::sort(out.begin(), out.end());
    return out;
}

StepResult step(const WorldState& world, const CompiledModel& compiled, TieBreak policy) {
    StepResult r{world, {}};
    if (step_impl(r.world, compiled, policy, nullptr, r.events) == StepStatus::Deadlock)
        throw MechError(ErrorCode::Deadlock, "no unit is enabled and nothing is pending");
    return r;
}

ObservableState observe(const Microworld& snapshot, const CompiledModel& compiled) {
    ObservableState s;
    const ModelDocument& m = compiled.model;
    s.setup = holds(active_setup(m), snapshot);
    s.termination = holds(active_termination(m), snapshot);
    std::set<std::string> seen;
    for (const auto& id : m.active_mechanisms()) {
        const Mechanism* mech = m.find_mechanism(id);
        if (!mech) continue;
        for (const auto& path : mech->observables) {
            if (!seen.insert(path).second) continue;
            auto dot = path.find('.');
            std::string value = "(absent)";
            auto it = snapshot.aggregates.find(path.substr(0, dot));
            if (it != snapshot.aggregates.end() && dot != std::string::npos)
                if (const QualityValue* q = it->second.quality(path.substr(dot + 1))) value = format_value(*q);
            s.values.emplace_back(path, value);
        }
    }
    return s;
}

RunResult run(WorldState world, const CompiledModel& compiled, const Horizon& horizon, const RunOptions& options) {
    RunResult r;
    const ModelDocument& model = compiled.model;
    StateExpr termination = active_termination(model);
    auto conserved = active_conservation(model);
    std::vector<std::int64_t> totals;
    for (const auto* d : conserved) totals.push_back(conservation_total(*d, world.snapshot));

    auto note_state = [&](const WorldState& w) {
        if (w.pending.empty()) r.visited.push_back(normalized(w.snapshot.marking));
        ObservableState o = observe(w.snapshot, compiled);
        if (r.observables.empty() || !(r.observables.back() == o)) r.observables.push_back(std::move(o));
    };
    note_state(world);

    const Time* max_time = horizon.kind == Horizon::Kind::MaxTime ? &horizon.max_time : nullptr;
    std::size_t limit = horizon.kind == Horizon::Kind::MaxSteps ? horizon.max_steps : horizon.step_cap;
    bool finished = false;
    while (!finished) {
        if (r.steps >= limit) {
            r.outcome = RunOutcome::HorizonReached;
            break;
        }
        std::vector<TraceEvent> events;
        StepStatus status = step_impl(world, compiled, options.policy, max_time, events);
        if (!events.empty()) {
            for (std::size_t i = 0; i < conserved.size(); ++i) {
                std::int64_t now = conservation_total(*conserved[i], world.snapshot);
                if (now == totals[i]) continue;
                bool exempt = false;
                for (const auto& e : events) {
                    if (e.kind != TraceKind::UnitCompleted) continue;
                    const TransitionalUnit* u = model.find_unit(e.subject);
                    if (u && u->exempt_from(conserved[i]->name)) exempt = true;
                }
                if (!exempt)
                    throw MechError(ErrorCode::ConservationBroken,
                                    conserved[i]->name + " changed from " + std::to_string(totals[i]) + " to " +
                                        std::to_string(now) + " at time " + format_time(world.snapshot.clock));
                totals[i] = now;
            }
        }
        r.trace.insert(r.trace.end(), events.begin(), events.end());
        if (status == StepStatus::Progress) {
            ++r.steps;
            note_state(world);
            if (options.on_step) options.on_step(events, world);
            if (horizon.kind == Horizon::Kind::UntilTermination && holds(termination, world.snapshot)) {
                r.trace.push_back({world.snapshot.clock, TraceKind::TerminationReached, "", {}});
                r.outcome = RunOutcome::TerminationReached;
                finished = true;
            }
            continue;
        }
        if (status == StepStatus::Horizon) {
            r.outcome = RunOutcome::HorizonReached;
        } else if (holds(termination, world.snapshot)) {
            r.outcome = RunOutcome::TerminationReached;
        } else {
            r.trace.push_back({world.snapshot.clock, TraceKind::Deadlock, "", {}});
            r.outcome = RunOutcome::Deadlock;
        }
        finished = true;
    }
    bool ended_on_termination = !r.trace.empty() && r.trace.back().kind == TraceKind::TerminationReached;
    if (r.outcome != RunOutcome::Deadlock && r.steps > 0 && !ended_on_termination && holds(termination, world.snapshot))
        r.trace.push_back({world.snapshot.clock, TraceKind::TerminationReached, "", {}});
    r.final = std::move(world);
    return r;
}

WorldState send_message(const WorldState& world, const std::string& sender, const std::string& receiver,
                        const std::string& quality, const QualityValue& value, Time deliver_at) {
    const auto& aggs = world.snapshot.aggregates;
    if (!aggs.count(sender)) throw MechError(ErrorCode::UnknownAggregate, "unknown sender '" + sender + "'");
    if (!aggs.count(receiver)) throw MechError(ErrorCode::UnknownAggregate, "unknown receiver '" + receiver + "'");
    if (deliver_at < world.snapshot.clock)
        throw MechError(ErrorCode::TimeInPast, "delivery time " + format_time(deliver_at) + " is before the clock " +
                                                   format_time(world.snapshot.clock));
    WorldState w = world;
    Message m;
    m.id = "m" + std::to_string(w.snapshot.next_message++);
    m.sender = sender;
    m.receiver = receiver;
    m.quality = quality;
    m.value = value;
    m.deliver_at = deliver_at;
    w.snapshot.message_queue.push_back(std::move(m));
    return w;
}

ReachabilityResult reachable_markings(const CompiledModel& compiled, std::int64_t bound, std::size_t max_states) {
    ReachabilityResult r;
    Microworld start = initial_world(compiled.model);
    StateGraph g = explore_states(compiled.model, active_units(compiled.model), start, {bound, max_states});
    for (const auto& s : g.states) r.markings.insert(normalized(s.marking));
    r.overflow = g.overflow;
    r.bound_exceeded = g.bound_exceeded;
    return r;
}

std::string trace_to_jsonl(const std::vector<TraceEvent>& trace) {
    std::string out;
    for (const auto& e : trace) {
        Json delta = Json::array();
        for (const auto& d : e.delta) delta.push_back(Json{{"target", d.target}, {"old", d.old_value}, {"new", d.new_value}});
        Json j{{"time", format_time_fraction(e.time)},
               {"kind", to_string(e.kind)},
               {"unit", e.subject},
               {"delta", delta}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

}  // namespace mech
