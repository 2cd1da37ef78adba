#include "support.hpp"

#include "mech/core/errors.hpp"
#include "mech/core/operations.hpp"
#include "mech/engine/engine.hpp"

#include <algorithm>
#include <deque>

using namespace mech;
using namespace mech::test;

namespace {

ErrorCode error_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const MechError& e) {
        return e.code();
    }
    FAIL("no MechError thrown");
    return ErrorCode::Io;
}

std::int64_t count_of(const WorldState& w, const std::string& agg) {
    return std::get<Count>(*w.snapshot.aggregates.at(agg).quality("count")).value;
}

std::size_t count_kind(const std::vector<TraceEvent>& trace, TraceKind kind) {
    return static_cast<std::size_t>(
        std::count_if(trace.begin(), trace.end(), [&](const TraceEvent& e) { return e.kind == kind; }));
}

using Vec = std::vector<int>;

Marking marking_of(const RandomNet& net, const Vec& v) {
    Marking m;
    for (int p = 0; p < net.places; ++p)
        if (v[static_cast<std::size_t>(p)]) m["p" + std::to_string(p)] = v[static_cast<std::size_t>(p)];
    return m;
}

/// Breadth-first closure of the incidence matrices; vectors over the bound are
/// dropped.
std::set<Marking> enumerate_markings(const RandomNet& net, int bound) {
    std::set<Vec> seen{net.initial};
    std::deque<Vec> todo{net.initial};
    while (!todo.empty()) {
        Vec v = todo.front();
        todo.pop_front();
        for (std::size_t t = 0; t < net.consume.size(); ++t) {
            Vec next = v;
            bool ok = true;
            for (std::size_t p = 0; p < v.size(); ++p) {
                next[p] -= net.consume[t][p];
                if (next[p] < 0) ok = false;
                next[p] += net.produce[t][p];
                if (next[p] > bound) ok = false;
            }
            if (ok && seen.insert(next).second) todo.push_back(next);
        }
    }
    std::set<Marking> out;
    for (const auto& v : seen) out.insert(marking_of(net, v));
    return out;
}

}  // namespace

TEST_SUITE("engine") {

TEST_CASE("initial world of the water model") {
    CompiledModel cm = compile_corpus("water.mech");
    WorldState w = init_world(cm, 5);
    CHECK(w.clock() == Time(0));
    CHECK(w.idle());
    CHECK(w.rng_seed == 5);
    CHECK(enabled(w, cm) == std::vector<std::string>{"decomposition"});
    CHECK(observe(w.snapshot, cm).setup);
    CHECK_FALSE(observe(w.snapshot, cm).termination);
}

TEST_CASE("init fails when the setup does not hold") {
    std::string text = mutate(corpus_text("water.mech"), "mechanism water-synthesis", "setup: H2.count == 2",
                              "setup: H2.count == 3");
    CompileResult r = compile(parse_ok(text));
    REQUIRE(r.ok());
    CHECK(r.diagnostics.size() == 1);
    CHECK(r.diagnostics[0].code == "SETUP_UNSATISFIED");
    CHECK(error_of([&] { init_world(*r.compiled); }) == ErrorCode::InitError);
}

TEST_CASE("stepping water consumes the spark and completes at once") {
    CompiledModel cm = compile_corpus("water.mech");
    WorldState w = init_world(cm);
    StepResult s = step(w, cm);
    REQUIRE(s.events.size() == 2);
    CHECK(s.events[0].kind == TraceKind::UnitStarted);
    CHECK(s.events[0].subject == "decomposition");
    CHECK(s.events[0].delta == std::vector<StateDelta>{{"place:spark", "1", "0"}});
    CHECK(s.events[1].kind == TraceKind::UnitCompleted);
    CHECK(count_of(s.world, "H_plus") == 4);
    CHECK(count_of(w, "H_plus") == 0);
    CHECK(enabled(s.world, cm) == std::vector<std::string>{"combination"});
}

TEST_CASE("water runs to termination") {
    CompiledModel cm = compile_corpus("water.mech");
    RunResult r = run(init_world(cm), cm, Horizon::until_termination());
    CHECK(r.outcome == RunOutcome::TerminationReached);
    CHECK(r.steps == 2);
    CHECK(count_of(r.final, "H2O") == 2);
    CHECK(count_kind(r.trace, TraceKind::UnitStarted) + count_kind(r.trace, TraceKind::UnitCompleted) == 4);
    CHECK(r.trace.back().kind == TraceKind::TerminationReached);
    CHECK(r.observables.size() == 3);
    CHECK(r.observables.back().values == std::vector<std::pair<std::string, std::string>>{{"H2O.count", "2"}});
}

TEST_CASE("step limits and an exhausted run") {
    CompiledModel cm = compile_corpus("water.mech");
    RunResult zero = run(init_world(cm), cm, Horizon::steps(0));
    CHECK(zero.steps == 0);
    CHECK(zero.trace.empty());
    CHECK(zero.outcome == RunOutcome::HorizonReached);
    RunResult one = run(init_world(cm), cm, Horizon::steps(1));
    CHECK(one.steps == 1);
    CHECK(count_of(one.final, "H_plus") == 4);
    RunResult past = run(init_world(cm), cm, Horizon::steps(10));
    CHECK(past.outcome == RunOutcome::TerminationReached);
}

TEST_CASE("traffic light and car interact through a delayed message") {
    CompiledModel cm = compile_corpus("traffic.mech");
    RunResult r = run(init_world(cm), cm, Horizon::until_termination());
    CHECK(r.outcome == RunOutcome::TerminationReached);
    CHECK(r.final.clock() == Time(3));
    bool red_at_2 = false, delivered_at_3 = false;
    for (const auto& e : r.trace) {
        if (e.kind == TraceKind::UnitCompleted && e.subject == "light_turns_red") red_at_2 = e.time == Time(2);
        if (e.kind == TraceKind::MessageDelivered)
            delivered_at_3 = e.time == Time(3) && e.delta == std::vector<StateDelta>{{"car.signal", "GREEN", "RED"}};
    }
    CHECK(red_at_2);
    CHECK(delivered_at_3);
    CHECK(format_value(*r.final.snapshot.aggregates.at("car").quality("moving")) == "false");
    std::string jsonl = trace_to_jsonl(r.trace);
    CHECK(jsonl.rfind("{\"time\":\"0/1\",\"kind\":\"unit-started\",\"unit\":\"light_turns_red\",\"delta\":[]}\n", 0) == 0);
}

TEST_CASE("messages are validated and delivered in order") {
    CompiledModel cm = compile_corpus("traffic.mech");
    WorldState w = init_world(cm);
    CHECK(error_of([&] { send_message(w, "light", "ghost", "signal", Symbol{"RED"}, Time(1)); }) ==
          ErrorCode::UnknownAggregate);
    WorldState later = run(w, cm, Horizon::steps(2)).final;
    REQUIRE(later.clock() > Time(0));
    CHECK(error_of([&] { send_message(later, "light", "car", "signal", Symbol{"RED"}, Time(0)); }) ==
          ErrorCode::TimeInPast);

    WorldState q = send_message(w, "light", "car", "moving", false, Time(1, 2));
    q = send_message(q, "light", "car", "moving", true, Time(1, 2));
    CHECK(q.snapshot.message_queue.size() == 2);
    CHECK(q.next_pending() == Time(1, 2));
    CHECK(w.snapshot.message_queue.empty());
    RunResult r = run(q, cm, Horizon::time(Time(1, 2)));
    std::vector<std::string> delivered;
    for (const auto& e : r.trace)
        if (e.kind == TraceKind::MessageDelivered) delivered.push_back(e.delta.at(0).new_value);
    CHECK(delivered == std::vector<std::string>{"false", "true"});
}

TEST_CASE("tank runs forty starts and forty completions in 80 time units") {
    CompiledModel cm = compile_corpus("tank.mech");
    RunResult r = run(init_world(cm), cm, Horizon::time(Time(80)));
    CHECK(count_kind(r.trace, TraceKind::UnitStarted) == 40);
    CHECK(count_kind(r.trace, TraceKind::UnitCompleted) == 40);
    CHECK(r.final.clock() == Time(80));
    CHECK(r.outcome == RunOutcome::HorizonReached);

    Time last(0);
    std::map<std::string, int> open;
    for (const auto& e : r.trace) {
        CHECK(e.time >= last);
        last = e.time;
        if (e.kind == TraceKind::UnitStarted) CHECK(++open[e.subject] == 1);
        if (e.kind == TraceKind::UnitCompleted) CHECK(--open[e.subject] == 0);
    }
}

TEST_CASE("policies are deterministic per seed") {
    CompiledModel cm = compile_corpus("tank.mech");
    for (TieBreak policy : {TieBreak::Lexicographic, TieBreak::SeededRandom}) {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            RunResult a = run(init_world(cm, seed), cm, Horizon::time(Time(40)), {policy, {}});
            RunResult b = run(init_world(cm, seed), cm, Horizon::time(Time(40)), {policy, {}});
            CHECK(trace_to_jsonl(a.trace) == trace_to_jsonl(b.trace));
        }
    }
    CHECK(parse_tie_break("seeded-random") == TieBreak::SeededRandom);
    CHECK(parse_tie_break("lexicographic") == TieBreak::Lexicographic);
    CHECK_FALSE(parse_tie_break("fifo").has_value());
}

TEST_CASE("a blocked model deadlocks") {
    CompiledModel cm = compile_ok(parse_ok(read_file(fixture_path("deadlock.mech"))));
    WorldState w = init_world(cm);
    CHECK(enabled(w, cm).empty());
    CHECK(error_of([&] { step(w, cm); }) == ErrorCode::Deadlock);
    RunResult r = run(w, cm, Horizon::until_termination());
    CHECK(r.outcome == RunOutcome::Deadlock);
    REQUIRE_FALSE(r.trace.empty());
    CHECK(r.trace.back().kind == TraceKind::Deadlock);
}

TEST_CASE("axioms are checked after every step") {
    std::string text = mutate(corpus_text("traffic.mech"), "microworld intersection",
                              "axiom: car.signal == GREEN || light.color == RED", "axiom: car.moving == true");
    CompiledModel cm = compile_ok(parse_ok(text));
    CHECK(error_of([&] { run(init_world(cm), cm, Horizon::until_termination()); }) == ErrorCode::AxiomViolated);
}

TEST_CASE("conserved totals hold at every step and breaks are caught") {
    CompiledModel cm = compile_corpus("water.mech");
    const ConservationDecl& h = *cm.model.find_conservation("atom:H");
    const ConservationDecl& o = *cm.model.find_conservation("atom:O");
    int checked = 0;
    RunOptions options;
    options.on_step = [&](const std::vector<TraceEvent>&, const WorldState& w) {
        CHECK(conservation_total(h, w.snapshot) == 4);
        CHECK(conservation_total(o, w.snapshot) == 2);
        ++checked;
    };
    run(init_world(cm), cm, Horizon::until_termination(), options);
    CHECK(checked == 2);

    CompiledModel tampered = cm;
    for (auto& t : tampered.model.transitionals)
        if (t.id == "recombine")
            for (auto& e : t.effects)
                if (auto* a = std::get_if<AdjustQuality>(&e.effect); a && a->aggregate == "H2O") a->delta = std::int64_t{3};
    CHECK(error_of([&] { run(init_world(tampered), tampered, Horizon::until_termination()); }) ==
          ErrorCode::ConservationBroken);
}

TEST_CASE("reachable markings") {
    CHECK(reachable_markings(compile_corpus("tank.mech")).markings.size() == 4);
    CHECK(reachable_markings(compile_corpus("water.mech")).markings.size() == 2);

    Rng rng(1);
    RandomNet idle = random_net(rng, 3, 0);
    auto r = reachable_markings(compile_ok(idle.model));
    CHECK(r.markings == std::set<Marking>{marking_of(idle, idle.initial)});
}

TEST_CASE("reachable markings match a matrix enumerator on random nets") {
    Rng rng(2024);
    for (int round = 0; round < 100; ++round) {
        RandomNet net = random_net(rng, 4, 5);
        CAPTURE(serialize_mech(net.model));
        CompiledModel cm = compile_ok(net.model);
        ReachabilityResult r = reachable_markings(cm, 3);
        CHECK_FALSE(r.overflow);
        CHECK(r.markings == enumerate_markings(net, 3));
    }
}

TEST_CASE("enabled units match token availability") {
    Rng rng(77);
    for (int round = 0; round < 100; ++round) {
        RandomNet net = random_net(rng, 4, 5, 3);
        CompiledModel cm = compile_ok(net.model);
        WorldState w = init_world(cm, static_cast<std::uint64_t>(round));
        for (int s = 0; s < 10; ++s) {
            std::vector<std::string> expected;
            for (std::size_t t = 0; t < net.consume.size(); ++t) {
                bool ok = true;
                for (int p = 0; p < net.places; ++p)
                    if (w.snapshot.tokens("p" + std::to_string(p)) < net.consume[t][static_cast<std::size_t>(p)]) ok = false;
                if (ok) expected.push_back("t" + std::to_string(t));
            }
            std::sort(expected.begin(), expected.end());
            CHECK(enabled(w, cm) == expected);
            if (expected.empty()) break;
            w = step(w, cm, TieBreak::SeededRandom).world;
        }
    }
}

TEST_CASE("units flagged unreachable are never enabled") {
    Rng rng(404);
    int flagged = 0;
    for (int round = 0; round < 200; ++round) {
        RandomNet net = random_net(rng, 4, 5);
        CompiledModel cm = compile_ok(net.model);
        if (reachable_markings(cm, 8).bound_exceeded) continue;
        auto markings = enumerate_markings(net, 8);
        for (const auto& d : cm.warnings) {
            if (d.code != "UNREACHABLE_UNIT") continue;
            ++flagged;
            std::string unit = d.message.substr(6);
            unit = unit.substr(0, unit.find('\''));
            auto t = static_cast<std::size_t>(std::stoi(unit.substr(1)));
            for (const auto& m : markings) {
                bool ok = true;
                for (int p = 0; p < net.places; ++p) {
                    auto it = m.find("p" + std::to_string(p));
                    if ((it == m.end() ? 0 : it->second) < net.consume[t][static_cast<std::size_t>(p)]) ok = false;
                }
                CHECK_FALSE(ok);
            }
        }
    }
    CHECK(flagged > 0);
}

}
