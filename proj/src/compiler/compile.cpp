#include "internal.hpp"

#include "mech/core/errors.hpp"
#include "mech/core/operations.hpp"

#include <algorithm>

namespace mech {

using detail::make_diag;

namespace {

bool has_errors(const std::vector<Diagnostic>& diags) { return count_errors(diags) > 0; }

void append(std::vector<Diagnostic>& into, std::vector<Diagnostic> from) {
    into.insert(into.end(), std::make_move_iterator(from.begin()), std::make_move_iterator(from.end()));
}

std::vector<Diagnostic> check_part_cycles(const ModelDocument& model) {
    std::map<std::string, Aggregate> all;
    for (const auto& a : model.aggregates) all.emplace(a.id, a);
    auto cycle = find_part_cycle(all);
    if (cycle.empty()) return {};
    std::string path;
    for (const auto& id : cycle) path += (path.empty() ? "" : " -> ") + id;
    const Aggregate* first = model.find_aggregate(cycle.front());
    std::vector<RelatedSpan> related;
    for (std::size_t i = 1; i < cycle.size(); ++i)
        if (const Aggregate* a = model.find_aggregate(cycle[i]); a && cycle[i] != cycle.front())
            related.push_back({a->span, "'" + a->id + "' is part of the cycle"});
    return {make_diag(Severity::Error, "PART_CYCLE", "aggregate parts form a cycle: " + path,
                      first ? first->span : SourceSpan{}, std::move(related))};
}

std::vector<Diagnostic> check_metadata(const ModelDocument& model) {
    std::vector<Diagnostic> out;
    for (const auto& m : model.mechanisms) {
        MechanismMetadata md = m.metadata.merged_over(model.metadata);
        std::vector<std::string> missing;
        if (!md.author) missing.push_back("author");
        if (!md.date) missing.push_back("date");
        if (!md.version) missing.push_back("version");
        if (!md.mechanism_type) missing.push_back("mechanism_type");
        if (!md.function_type) missing.push_back("function_type");
        if (missing.empty()) continue;
        std::string list;
        for (const auto& f : missing) list += (list.empty() ? "" : ", ") + f;
        const SourceSpan& span = m.metadata.span.valid() ? m.metadata.span : m.span;
        out.push_back(make_diag(Severity::Error, "METADATA_MISSING",
                                "mechanism '" + m.id + "' is missing required metadata: " + list, span));
    }
    return out;
}

StateExpr conjunction_of(const ModelDocument& model, bool termination) {
    std::vector<StateExpr> terms;
    for (const auto& id : model.active_mechanisms())
        if (const Mechanism* m = model.find_mechanism(id))
            terms.push_back(termination ? m->phenomenon.termination : m->phenomenon.setup);
    if (terms.size() == 1) return terms.front();
    return StateExpr::conj(std::move(terms));
}

}  // namespace

StateExpr active_setup(const ModelDocument& model) { return conjunction_of(model, false); }

StateExpr active_termination(const ModelDocument& model) { return conjunction_of(model, true); }

std::vector<const TransitionalUnit*> active_units(const ModelDocument& model) {
    std::vector<const TransitionalUnit*> out;
    for (const auto& id : model.active_mechanisms())
        if (const Mechanism* m = model.find_mechanism(id))
            for (const auto* u : detail::units_of(*m, model))
                if (std::find(out.begin(), out.end(), u) == out.end()) out.push_back(u);
    return out;
}

CompileResult compile(const ModelDocument& document, const CompileOptions& options) {
    CompileResult result;
    auto& diags = result.diagnostics;
    ModelDocument source = import_refinements(document, options.kb);

    append(diags, resolve_references(source));
    append(diags, check_part_cycles(source));
    if (has_errors(diags)) {
        sort_diagnostics(diags);
        return result;
    }

    append(diags, check_outputs(source));
    for (const auto& m : source.mechanisms) append(diags, check_chain(m, source));
    for (const auto& m : source.mechanisms) append(diags, check_conservation(m, source));

    FlattenResult flat = resolve_refinements(source, options.kb, options.max_depth);
    append(diags, std::move(flat.diagnostics));
    append(diags, check_metadata(source));
    if (has_errors(diags) || !flat.model) {
        sort_diagnostics(diags);
        return result;
    }

    CompiledModel cm;
    cm.source = source;
    cm.model = options.flatten ? std::move(*flat.model) : source;
    cm.refinements = options.flatten ? std::move(flat.tree) : std::vector<RefinementNode>{};

    std::vector<std::string> all_units;
    for (const auto& u : cm.model.units) all_units.push_back(u.id);
    cm.graph = dependency_graph(cm.model, all_units);
    for (const auto& m : cm.model.mechanisms) {
        DependencyGraph g = dependency_graph(cm.model, m.organization);
        ClassifyResult cr = classify_mechanism(m, cm.model, g);
        cm.classification[m.id] = cr.classification;
        cm.mechanism_graphs[m.id] = std::move(g);
        append(diags, std::move(cr.diagnostics));
    }

    try {
        Microworld w = initial_world(cm.model);
        if (!evaluate_state(active_setup(cm.model), w)) {
            std::string ids;
            for (const auto& id : cm.model.active_mechanisms()) ids += (ids.empty() ? "'" : ", '") + id + "'";
            const SourceSpan span =
                cm.model.microworld ? cm.model.microworld->span
                                    : (cm.model.mechanisms.empty() ? SourceSpan{} : cm.model.mechanisms.front().span);
            diags.push_back(make_diag(Severity::Warning, "SETUP_UNSATISFIED",
                                      "the initial state does not satisfy the setup of " +
                                          (ids.empty() ? std::string("the active mechanisms") : ids),
                                      span));
        }
    } catch (const MechError&) {
    }

    sort_diagnostics(diags);
    for (const auto& d : diags)
        if (d.severity == Severity::Warning) cm.warnings.push_back(d);
    result.compiled = std::move(cm);
    return result;
}

}  // namespace mech
