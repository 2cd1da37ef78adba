#include "generators.hpp"

#include "mech/compiler/compiler.hpp"
#include "mech/core/errors.hpp"
#include "mech/core/operations.hpp"
#include "mech/engine/engine.hpp"
#include "mech/kb/knowledgebase.hpp"
#include "mech/lang/mech_format.hpp"
#include "mech/lang/rules.hpp"

#include <chrono>
#include <deque>
#include <functional>
#include <iostream>
#include <sstream>

using namespace mech;
using namespace mech::test;

namespace {

/// Failed expectation inside a criterion.
struct Failure {
    std::string what;
};

void expect(bool ok, const std::string& what) {
    if (!ok) throw Failure{what};
}

std::string corpus(const std::string& name) {
    for (const auto& f : builtin_corpus_files())
        if (f.name == name) return f.text;
    throw Failure{"no corpus file " + name};
}

ModelDocument parse(const std::string& text, const std::string& file = "<input>") {
    ParseResult r = parse_mech(text, file);
    if (!r.ok()) throw Failure{"parse failed: " + render_text(r.diagnostics)};
    return *r.document;
}

CompiledModel compiled(const ModelDocument& doc, const CompileOptions& options = {}) {
    CompileResult r = compile(doc, options);
    if (!r.ok()) throw Failure{"compile failed: " + render_text(r.diagnostics)};
    return *r.compiled;
}

std::string replace_after(const std::string& text, const std::string& anchor, const std::string& from,
                          const std::string& to) {
    auto a = text.find(anchor);
    auto f = a == std::string::npos ? a : text.find(from, a);
    if (f == std::string::npos) throw Failure{"mutation anchor missing"};
    return text.substr(0, f) + to + text.substr(f + from.size());
}

std::int64_t count_of(const Microworld& w, const std::string& agg) {
    return std::get<Count>(*w.aggregates.at(agg).quality("count")).value;
}

void water_synthesis() {
    CompileResult cr = compile(parse(corpus("water.mech"), "water.mech"));
    expect(cr.ok() && count_errors(cr.diagnostics) == 0, "water model has compile errors");
    const CompiledModel& cm = *cr.compiled;
    const ConservationDecl& h = *cm.model.find_conservation("atom:H");
    const ConservationDecl& o = *cm.model.find_conservation("atom:O");
    std::size_t events = 0;
    RunOptions options;
    options.on_step = [&](const std::vector<TraceEvent>& step_events, const WorldState& w) {
        for (const auto& e : step_events)
            events += e.kind == TraceKind::UnitStarted || e.kind == TraceKind::UnitCompleted;
        expect(conservation_total(h, w.snapshot) == 4, "atom:H drifted from 4");
        expect(conservation_total(o, w.snapshot) == 2, "atom:O drifted from 2");
    };
    RunResult r = run(init_world(cm), cm, Horizon::until_termination(), options);
    std::vector<std::string> chain;
    for (const auto& e : r.trace)
        if (e.kind == TraceKind::UnitStarted) chain.push_back(e.subject);
    expect(chain == std::vector<std::string>{"decomposition", "combination"}, "unexpected unit chain");
    expect(r.outcome == RunOutcome::TerminationReached, "termination not reached");
    const Microworld& f = r.final.snapshot;
    expect(count_of(f, "H2O") == 2 && count_of(f, "H2") == 0 && count_of(f, "O2") == 0 && count_of(f, "H_plus") == 0 &&
               count_of(f, "O_minus") == 0,
           "unexpected final species counts");
    expect(events == 4, "conservation was not checked after all four unit events");
}

void chain_mismatch() {
    std::string text = replace_after(corpus("water.mech"), "unit combination", "H_plus.count >= 4", "H_plus.count >= 5");
    CompileResult r = compile(parse(text, "broken_water.mech"));
    std::size_t mismatches = 0;
    for (const auto& d : r.diagnostics) {
        if (d.code != "CHAIN_MISMATCH") continue;
        ++mismatches;
        bool consumer = false, producer = false;
        for (const auto& rel : d.related) {
            consumer |= rel.note.find("'combination'") != std::string::npos;
            producer |= rel.note.find("'decomposition'") != std::string::npos;
        }
        expect(consumer && producer, "related spans do not name both units");
    }
    expect(!r.ok(), "mutated model compiled");
    expect(count_errors(r.diagnostics) == 1 && mismatches == 1, "expected exactly one CHAIN_MISMATCH error");
}

void tank_cycles() {
    CompiledModel cm = compiled(parse(corpus("tank.mech"), "tank.mech"));
    const Classification& c = cm.classification.at("tank-cycle");
    expect(c.inferred == MechanismType::Concurrent && c.cyclic, "tank not classified Concurrent with a cyclic structure");
    WorldState start = init_world(cm);
    Marking initial = normalized(start.snapshot.marking);
    int cycles = 0;
    RunOptions options;
    options.on_step = [&](const std::vector<TraceEvent>& events, const WorldState& w) {
        for (const auto& e : events)
            if (e.kind == TraceKind::UnitCompleted && e.subject == "refill_complete") {
                ++cycles;
                expect(normalized(w.snapshot.marking) == initial, "marking after a cycle differs from the initial one");
            }
    };
    RunResult r = run(start, cm, Horizon::time(Time(80)), options);
    std::size_t started = 0, completed = 0;
    for (const auto& e : r.trace) {
        started += e.kind == TraceKind::UnitStarted;
        completed += e.kind == TraceKind::UnitCompleted;
        expect(e.kind != TraceKind::Deadlock, "deadlock event");
    }
    expect(r.outcome != RunOutcome::Deadlock, "tank deadlocked");
    expect(cycles == 10, "expected 10 completed cycles, saw " + std::to_string(cycles));
    expect(r.final.clock() == Time(80), "final clock is not 80");
    expect(started == 40 && completed == 40, "expected 40 unit events");
}

using Vec = std::vector<int>;

std::set<Marking> enumerate(const RandomNet& net, int bound) {
    auto as_marking = [&](const Vec& v) {
        Marking m;
        for (int p = 0; p < net.places; ++p)
            if (v[static_cast<std::size_t>(p)]) m["p" + std::to_string(p)] = v[static_cast<std::size_t>(p)];
        return m;
    };
    std::set<Vec> seen{net.initial};
    std::deque<Vec> todo{net.initial};
    while (!todo.empty()) {
        Vec v = todo.front();
        todo.pop_front();
        for (std::size_t t = 0; t < net.consume.size(); ++t) {
            Vec next = v;
            bool ok = true;
            for (std::size_t p = 0; p < v.size(); ++p) {
                next[p] += net.produce[t][p] - net.consume[t][p];
                if (v[p] < net.consume[t][p] || next[p] > bound) ok = false;
            }
            if (ok && seen.insert(next).second) todo.push_back(next);
        }
    }
    std::set<Marking> out;
    for (const auto& v : seen) out.insert(as_marking(v));
    return out;
}

void reachability() {
    CompiledModel tank = compiled(parse(corpus("tank.mech"), "tank.mech"));
    ReachabilityResult reach = reachable_markings(tank);
    expect(reach.markings.size() == 4, "tank has " + std::to_string(reach.markings.size()) + " reachable markings");
    for (TieBreak policy : {TieBreak::Lexicographic, TieBreak::SeededRandom}) {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            RunResult r = run(init_world(tank, seed), tank, Horizon::time(Time(80)), {policy, {}});
            expect(!r.visited.empty(), "no visited markings recorded");
            for (const auto& m : r.visited)
                expect(reach.markings.count(normalized(m)) == 1, "run visited an unreachable marking " + to_string(m));
        }
    }
    Rng rng(4);
    for (int i = 0; i < 100; ++i) {
        RandomNet net = random_net(rng, 4, 4);
        CompiledModel cm = compiled(net.model);
        ReachabilityResult r = reachable_markings(cm, 3);
        expect(r.markings == enumerate(net, 3), "random net " + std::to_string(i) + " disagrees with the enumerator");
    }
}

void preference_rules() {
    RulesParseResult parsed = parse_rules(builtin_nad_rules(), "nad.rules");
    expect(parsed.rules.has_value(), "rules do not parse");
    const RuleSet& rules = *parsed.rules;
    expect(evaluate_rules(rules, {{"NAD", "LOW"}, {"Degeneration", "LOW"}}) == "ConceptualModel1", "LOW/LOW");
    expect(evaluate_rules(rules, {{"NAD", "LOW"}, {"Degeneration", "NORMAL"}}) == "ConceptualModel2", "LOW/NORMAL");
    for (const char* a : {"LOW", "NORMAL", "HIGH"})
        for (const char* b : {"LOW", "NORMAL", "HIGH"}) {
            std::string nad = a, deg = b;
            if (nad == "LOW" && deg != "HIGH") continue;
            expect(!evaluate_rules(rules, {{"NAD", nad}, {"Degeneration", deg}}), nad + "/" + deg + " matched");
        }
}

void refinement_flattening() {
    ModelDocument doc = parse(corpus("vehicle.mech"), "vehicle.mech");
    CompileResult flat = compile(doc);
    expect(flat.ok() && flat.diagnostics.empty(), "vehicle flattening produced diagnostics");
    expect(!flat.compiled->refinements.empty(), "no refinement was flattened");
    CompileOptions atomic_options;
    atomic_options.flatten = false;
    CompiledModel atomic = compiled(doc, atomic_options);
    RunResult a = run(init_world(*flat.compiled), *flat.compiled, Horizon::until_termination());
    RunResult b = run(init_world(atomic), atomic, Horizon::until_termination());
    expect(a.outcome == RunOutcome::TerminationReached && b.outcome == RunOutcome::TerminationReached,
           "a vehicle run did not terminate");
    expect(a.observables == b.observables, "observable traces differ");
}

void round_trip() {
    for (const auto& f : builtin_corpus_files()) {
        ModelDocument first = parse(f.text, f.name);
        expect(parse(serialize_mech(first), f.name) == first, f.name + " does not round-trip");
    }
    Rng rng(42);
    for (int i = 0; i < 200; ++i) {
        ModelDocument doc = random_document(rng);
        std::string text = serialize_mech(doc);
        ModelDocument again = parse(text);
        expect(again == doc && parse(serialize_mech(again)) == again, "generated document " + std::to_string(i));
    }
    std::vector<std::string> seeds;
    for (const auto& f : builtin_corpus_files()) seeds.push_back(f.text);
    for (int i = 0; i < 10000; ++i) {
        std::string text;
        if (i % 2 == 0) {
            int n = rng.range(0, 256);
            for (int k = 0; k < n; ++k) text += static_cast<char>(rng.range(0, 255));
        } else {
            text = rng.pick(seeds);
            for (int k = rng.range(1, 8); k > 0 && !text.empty(); --k) {
                auto pos = static_cast<std::size_t>(rng.range(0, static_cast<int>(text.size()) - 1));
                if (rng.coin()) text.erase(pos, static_cast<std::size_t>(rng.range(1, 20)));
                else text.insert(pos, 1, static_cast<char>(rng.range(0, 255)));
            }
        }
        ParseResult r = parse_mech(text, "fuzz");
        expect(r.document.has_value() != !r.diagnostics.empty(), "fuzz input " + std::to_string(i));
    }
}

void determinism() {
    for (const auto& f : builtin_corpus_files()) {
        CompiledModel cm = compiled(parse(f.text, f.name));
        for (TieBreak policy : {TieBreak::Lexicographic, TieBreak::SeededRandom}) {
            auto trace = [&] {
                return trace_to_jsonl(run(init_world(cm, 7), cm, Horizon::time(Time(80)), {policy, {}}).trace);
            };
            std::string first = trace();
            expect(!first.empty(), f.name + " produced an empty trace");
            expect(first == trace(), f.name + " traces differ");
        }
    }
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<void()> body;
        double budget_seconds;
    };
    const std::vector<Criterion> criteria = {
        {"water synthesis chain, final counts and conservation", water_synthesis, 1},
        {"chain mismatch on a 5 H+ combination input", chain_mismatch, 1},
        {"tank drain/refill: 10 cycles, 40 unit events by clock 80", tank_cycles, 1},
        {"reachability oracle equivalence", reachability, 30},
        {"preference rule reproduction", preference_rules, 1},
        {"refinement flattening preserves observables", refinement_flattening, 0},
        {"parser round-trip and fuzzing", round_trip, 0},
        {"byte-identical traces for identical seeds", determinism, 0},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const Criterion& c = criteria[i];
        auto start = std::chrono::steady_clock::now();
        std::string problem;
        try {
            c.body();
        } catch (const Failure& f) {
            problem = f.what;
        } catch (const std::exception& e) {
            problem = std::string("exception: ") + e.what();
        }
        double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (problem.empty() && c.budget_seconds > 0 && seconds > c.budget_seconds)
            problem = "took longer than " + std::to_string(c.budget_seconds) + " s";
        std::ostringstream line;
        line.setf(std::ios::fixed);
        line.precision(3);
        line << (problem.empty() ? "PASS" : "FAIL") << " criterion " << i + 1 << ": " << c.name << " (" << seconds << " s)";
        if (!problem.empty()) line << ": " << problem;
        std::cout << line.str() << '\n';
        failed += !problem.empty();
    }
    std::cout << criteria.size() - static_cast<std::size_t>(failed) << "/" << criteria.size() << " criteria passed\n";
    return failed == 0 ? 0 : 1;
}
