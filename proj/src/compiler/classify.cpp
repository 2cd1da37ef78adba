#include "internal.hpp"

#include "mech/core/explore.hpp"

#include <algorithm>

namespace mech {

using detail::make_diag;

bool DependencyGraph::is_path() const {
    if (nodes.size() <= 1) return edges.empty();
    if (edges.size() != nodes.size() - 1) return false;
    std::map<std::string, int> in, out;
    std::map<std::string, std::string> next;
    for (const auto& [a, b] : edges) {
        if (++out[a] > 1 || ++in[b] > 1) return false;
        next[a] = b;
    }
    std::vector<std::string> starts;
    for (const auto& n : nodes)
        if (!in.count(n)) starts.push_back(n);
    if (starts.size() != 1) return false;
    std::set<std::string> seen;
    std::string cur = starts.front();
    while (true) {
        if (!seen.insert(cur).second) return false;
        auto it = next.find(cur);
        if (it == next.end()) break;
        cur = it->second;
    }
    return seen.size() == nodes.size();
}

DependencyGraph dependency_graph(const ModelDocument& model, const std::vector<std::string>& units) {
    DependencyGraph g;
    std::vector<const TransitionalUnit*> list;
    for (const auto& id : units) {
        if (std::find(g.nodes.begin(), g.nodes.end(), id) != g.nodes.end()) continue;
        if (const TransitionalUnit* u = model.find_unit(id)) {
            g.nodes.push_back(id);
            list.push_back(u);
        }
    }
    for (const auto* p : list) {
        auto touched = touched_targets(model, *p);
        for (const auto* c : list) {
            if (p == c) continue;
            bool shared_place = false;
            for (const auto& out : p->produces)
                for (const auto& in : c->consumes)
                    if (out.place == in.place) shared_place = true;
            bool chained = false;
            if (!shared_place) {
                GroundExpr need;
                need.kind = GroundExpr::Kind::And;
                need.children.push_back(to_ground(c->inputs));
                need.children.push_back(token_requirements(*c));
                auto refs = referenced_targets(need);
                bool overlap = std::any_of(touched.begin(), touched.end(),
                                           [&](const std::string& t) { return refs.count(t) > 0; });
                chained = overlap && io_compatible(*p, *c, model);
            }
            if (shared_place || chained) g.edges.insert({p->id, c->id});
        }
    }
    return g;
}

constexpr ExploreLimits kClassifyLimits{16, 20000};

ClassifyResult classify_mechanism(const Mechanism& mechanism, const ModelDocument& model,
                                  const DependencyGraph& graph) {
    ClassifyResult result;
    Classification& c = result.classification;
    c.path = graph.is_path();

    auto units = detail::units_of(mechanism, model);
    Microworld start = initial_world(model);
    StateGraph sg = explore_states(model, units, start, kClassifyLimits);
    c.truncated = sg.overflow || sg.bound_exceeded;

    for (std::size_t s = 0; s < sg.states.size(); ++s) {
        const auto& enabled = sg.enabled[s];
        if (enabled.size() >= 2) c.concurrent = true;
        for (std::size_t i : enabled) {
            std::set<std::string> from;
            for (const auto& tc : units[i]->consumes) from.insert(tc.place);
            if (from.size() >= 2) c.concurrent = true;
        }
        for (const auto& [unit, succ] : sg.successors[s])
            if (succ == 0) c.cyclic = true;
    }

    if (c.concurrent)
        c.inferred = MechanismType::Concurrent;
    else if (c.cyclic)
        c.inferred = MechanismType::Cyclic;
    else if (c.path)
        c.inferred = MechanismType::SimpleLinear;

    auto declared = mechanism.metadata.mechanism_type;
    bool inferable = declared && (*declared == MechanismType::SimpleLinear || *declared == MechanismType::Cyclic ||
                                  *declared == MechanismType::Concurrent);
    if (inferable) {
        bool consistent = c.inferred == declared || (*declared == MechanismType::Cyclic && c.cyclic);
        if (!consistent) {
            std::string inferred = c.inferred ? std::string(to_string(*c.inferred)) : "no recognised structure";
            const SourceSpan& span = mechanism.metadata.span.valid() ? mechanism.metadata.span : mechanism.span;
            result.diagnostics.push_back(make_diag(Severity::Warning, "TYPE_MISMATCH",
                                                   "mechanism '" + mechanism.id + "' is declared " +
                                                       std::string(to_string(*declared)) + " but its structure is " +
                                                       inferred,
                                                   span));
        }
    }
    return result;
}

}  // namespace mech
