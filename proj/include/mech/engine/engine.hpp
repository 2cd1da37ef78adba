#pragma once

#include "mech/compiler/compiler.hpp"
#include "mech/core/operations.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace mech {

enum class TieBreak { Lexicographic, SeededRandom };

std::string_view to_string(TieBreak p);
std::optional<TieBreak> parse_tie_break(std::string_view text);

struct Completion {
    std::string unit;
    Time at{0};
    std::uint64_t seq = 0;
    bool operator==(const Completion&) const = default;
};

struct WorldState {
    Microworld snapshot;
    /// Scheduled unit completions, sorted by (at, seq).
    std::vector<Completion> pending;
    std::uint64_t rng_seed = 0;
    std::mt19937_64 rng;
    std::uint64_t next_seq = 1;

    const Time& clock() const { return snapshot.clock; }
    bool idle() const { return pending.empty() && snapshot.message_queue.empty(); }
    /// Earliest scheduled completion or message delivery.
    std::optional<Time> next_pending() const;
};

enum class TraceKind {
    UnitStarted,
    UnitCompleted,
    MessageSent,
    MessageDelivered,
    StateDelta,
    TerminationReached,
    Deadlock,
};

std::string_view to_string(TraceKind k);

struct TraceEvent {
    Time time{0};
    TraceKind kind = TraceKind::StateDelta;
    /// Unit id, message id, or empty.
    std::string subject;
    std::vector<StateDelta> delta;
    bool operator==(const TraceEvent&) const = default;
};

/// Throws InitError when the setup of the active mechanisms does not hold and
/// AxiomViolated when an axiom fails in the initial snapshot.
WorldState init_world(const CompiledModel& compiled, std::uint64_t seed = 0);

/// Active units enabled now, sorted by id. A unit whose completion is still
/// pending is not enabled again.
std::vector<std::string> enabled(const WorldState& world, const CompiledModel& compiled);

struct StepResult {
    WorldState world;
    std::vector<TraceEvent> events;
};

/// One scheduler step: deliver due messages, apply due completions, then start
/// one enabled unit or advance the clock to the next pending item. Throws
/// Deadlock when nothing can happen.
StepResult step(const WorldState& world, const CompiledModel& compiled, TieBreak policy = TieBreak::Lexicographic);

struct Horizon {
    enum class Kind { UntilTermination, MaxSteps, MaxTime };
    Kind kind = Kind::UntilTermination;
    std::size_t max_steps = 0;
    Time max_time{0};
    /// Safety cap for until-termination.
    std::size_t step_cap = 100000;

    static Horizon until_termination() { return {}; }
    static Horizon steps(std::size_t n) { return {Kind::MaxSteps, n, Time(0)}; }
    static Horizon time(Time t) { return {Kind::MaxTime, 0, t}; }
};

enum class RunOutcome { TerminationReached, HorizonReached, Deadlock };

std::string_view to_string(RunOutcome o);

/// Mechanism-level view of a snapshot: setup, termination and observables of
/// the active mechanisms.
struct ObservableState {
    bool setup = false;
    bool termination = false;
    std::vector<std::pair<std::string, std::string>> values;
    bool operator==(const ObservableState&) const = default;
};

ObservableState observe(const Microworld& snapshot, const CompiledModel& compiled);

struct RunOptions {
    TieBreak policy = TieBreak::Lexicographic;
    /// Called after every step with the events it produced.
    std::function<void(const std::vector<TraceEvent>&, const WorldState&)> on_step;
};

struct RunResult {
    WorldState final;
    std::vector<TraceEvent> trace;
    RunOutcome outcome = RunOutcome::HorizonReached;
    std::size_t steps = 0;
    /// Markings seen whenever no completion was in flight, in visit order.
    std::vector<Marking> visited;
    /// Observable states starting with the initial one, consecutive repeats
    /// removed.
    std::vector<ObservableState> observables;
};

/// Steps until the horizon. Axiom and conservation violations throw.
RunResult run(WorldState world, const CompiledModel& compiled, const Horizon& horizon, const RunOptions& options = {});

/// Queues a quality assignment for `receiver`. Throws UnknownAggregate or
/// TimeInPast.
WorldState send_message(const WorldState& world, const std::string& sender, const std::string& receiver,
                        const std::string& quality, const QualityValue& value, Time deliver_at);

struct ReachabilityResult {
    std::set<Marking> markings;
    /// Exploration stopped at max_states.
    bool overflow = false;
    /// Some marking exceeded the per-place bound and was not explored.
    bool bound_exceeded = false;
};

/// Markings reachable by firing active units atomically in any order.
ReachabilityResult reachable_markings(const CompiledModel& compiled, std::int64_t bound = 64,
                                      std::size_t max_states = 100000);

/// One JSON object per line: time, kind, unit, delta.
std::string trace_to_jsonl(const std::vector<TraceEvent>& trace);

}  // namespace mech
