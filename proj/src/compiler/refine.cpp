#include "internal.hpp"

#include "mech/lang/mech_format.hpp"

#include <algorithm>
#include <functional>

namespace mech {

using detail::make_diag;

namespace {

template <class T>
void merge_by_id(std::vector<T>& into, const std::vector<T>& from) {
    for (const auto& item : from) {
        bool present = std::any_of(into.begin(), into.end(), [&](const T& x) { return x.id == item.id; });
        if (!present) into.push_back(item);
    }
}

void merge_document(ModelDocument& into, const ModelDocument& from) {
    merge_by_id(into.domains, from.domains);
    merge_by_id(into.aggregates, from.aggregates);
    merge_by_id(into.templates, from.templates);
    merge_by_id(into.relations, from.relations);
    merge_by_id(into.emergents, from.emergents);
    merge_by_id(into.places, from.places);
    merge_by_id(into.transitionals, from.transitionals);
    merge_by_id(into.units, from.units);
    merge_by_id(into.mechanisms, from.mechanisms);
    for (const auto& c : from.conservation)
        if (!into.find_conservation(c.name)) into.conservation.push_back(c);
    into.link_relations();
}

std::string rename_place(const std::string& place, const std::string& prefix, const std::set<std::string>& local) {
    return local.count(place) ? prefix + place : place;
}

void rename_tokens(StateExpr& e, const std::string& prefix, const std::set<std::string>& local) {
    if (e.kind == StateExpr::Kind::Atom) {
        if (auto* t = std::get_if<TokenState>(&e.atom)) t->place = rename_place(t->place, prefix, local);
        return;
    }
    for (auto& c : e.children) rename_tokens(c, prefix, local);
}

/// a ⇒ b and b ⇒ a over the model's value domains.
bool equivalent(const StateExpr& a, const StateExpr& b, const AbstractState& base) {
    auto implies = [&](const StateExpr& x, const StateExpr& y) {
        AbstractState s = base;
        assume(s, to_ground(x));
        return contradictory(s) || entails(s, to_ground(y));
    };
    return implies(a, b) && implies(b, a);
}

}  // namespace

ModelDocument import_refinements(const ModelDocument& model, const RefinementSource* kb) {
    ModelDocument out = model;
    if (!kb) return out;
    std::set<std::string> tried;
    bool changed = true;
    while (changed) {
        changed = false;
        std::vector<std::string> wanted;
        for (const auto& t : out.transitionals)
            if (t.refinement && !out.find_mechanism(*t.refinement) && !tried.count(*t.refinement))
                wanted.push_back(*t.refinement);
        for (const auto& id : wanted) {
            if (!tried.insert(id).second) continue;
            if (auto doc = kb->refinement_document(id)) {
                merge_document(out, *doc);
                changed = true;
            }
        }
    }
    return out;
}

FlattenResult resolve_refinements(const ModelDocument& model, const RefinementSource* kb, int max_depth) {
    FlattenResult result;
    ModelDocument source = import_refinements(model, kb);
    AbstractState base = detail::widened_facts(source);

    std::set<std::string> unbounded_reported;
    std::set<std::pair<std::string, std::string>> signature_checked;
    std::vector<TransitionalUnit> generated;
    std::vector<Place> new_places;
    std::map<std::string, std::vector<std::string>> replacement;

    std::function<std::vector<std::string>(const TransitionalUnit&, int)> expand;
    expand = [&](const TransitionalUnit& unit, int depth) -> std::vector<std::string> {
        const Transitional* t = source.find_transitional(unit.transitional);
        if (!t || !t->refinement) return {unit.id};
        const Mechanism* r = source.find_mechanism(*t->refinement);
        if (!r) {
            result.diagnostics.push_back(make_diag(Severity::Error, "UNRESOLVED_REFERENCE",
                                                   "transitional '" + t->id + "' is refined by unknown mechanism '" +
                                                       *t->refinement + "'",
                                                   t->span));
            return {unit.id};
        }
        if (depth > max_depth) {
            if (unbounded_reported.insert(t->id).second)
                result.diagnostics.push_back(make_diag(
                    Severity::Error, "UNBOUNDED_REFINEMENT",
                    "refinement of transitional '" + t->id + "' by '" + r->id + "' does not bottom out within " +
                        std::to_string(max_depth) + " levels",
                    t->span, {{r->span, "refining mechanism '" + r->id + "' declared here"}}));
            return {unit.id};
        }
        if (signature_checked.insert({unit.id, r->id}).second) {
            bool in_ok = equivalent(r->phenomenon.setup, unit.inputs, base);
            bool out_ok = equivalent(r->phenomenon.termination, unit.outputs, base);
            if (!in_ok || !out_ok) {
                std::string what = !in_ok ? "setup " + format_expr(r->phenomenon.setup) + " differs from inputs " +
                                                format_expr(unit.inputs)
                                          : "termination " + format_expr(r->phenomenon.termination) +
                                                " differs from outputs " + format_expr(unit.outputs);
                result.diagnostics.push_back(make_diag(
                    Severity::Error, "REFINEMENT_SIGNATURE_MISMATCH",
                    "mechanism '" + r->id + "' cannot refine unit '" + unit.id + "': " + what, unit.span,
                    {{r->span, "refining mechanism '" + r->id + "' declared here"}}));
                return {unit.id};
            }
        }

        std::string prefix = unit.id + "__";
        std::set<std::string> local(r->places.begin(), r->places.end());
        for (const auto& p : r->places) {
            const Place* decl = source.find_place(p);
            if (!decl) continue;
            Place clone = *decl;
            clone.id = prefix + p;
            if (std::none_of(new_places.begin(), new_places.end(), [&](const Place& x) { return x.id == clone.id; }))
                new_places.push_back(clone);
        }

        RefinementNode node{unit.id, t->id, r->id, depth, {}};
        std::vector<std::string> leaves;
        for (std::size_t i = 0; i < r->organization.size(); ++i) {
            const TransitionalUnit* inner = source.find_unit(r->organization[i]);
            if (!inner) continue;
            TransitionalUnit clone = *inner;
            clone.id = prefix + inner->id;
            for (auto& tc : clone.consumes) tc.place = rename_place(tc.place, prefix, local);
            for (auto& tc : clone.produces) tc.place = rename_place(tc.place, prefix, local);
            rename_tokens(clone.inputs, prefix, local);
            rename_tokens(clone.outputs, prefix, local);
            if (i == 0) clone.consumes.insert(clone.consumes.begin(), unit.consumes.begin(), unit.consumes.end());
            if (i + 1 == r->organization.size())
                clone.produces.insert(clone.produces.end(), unit.produces.begin(), unit.produces.end());
            node.replaced_by.push_back(clone.id);
            auto sub = expand(clone, depth + 1);
            if (sub.size() == 1 && sub.front() == clone.id) generated.push_back(clone);
            leaves.insert(leaves.end(), sub.begin(), sub.end());
        }
        result.tree.push_back(std::move(node));
        replacement[unit.id] = leaves;
        return leaves;
    };

    for (const auto& u : source.units) expand(u, 1);

    bool has_error = std::any_of(result.diagnostics.begin(), result.diagnostics.end(),
                                 [](const Diagnostic& d) { return d.severity == Severity::Error; });
    if (has_error) return result;

    ModelDocument flat = source;
    if (!replacement.empty()) {
        flat.units.clear();
        for (const auto& u : source.units)
            if (!replacement.count(u.id)) flat.units.push_back(u);
        for (const auto& g : generated)
            if (!flat.find_unit(g.id)) flat.units.push_back(g);
        for (const auto& p : new_places)
            if (!flat.find_place(p.id)) flat.places.push_back(p);
        for (auto& m : flat.mechanisms) {
            std::vector<std::string> org;
            for (const auto& id : m.organization) {
                auto it = replacement.find(id);
                if (it == replacement.end()) {
                    org.push_back(id);
                    continue;
                }
                org.insert(org.end(), it->second.begin(), it->second.end());
                for (const auto& p : new_places)
                    if (p.id.rfind(id + "__", 0) == 0 &&
                        std::find(m.places.begin(), m.places.end(), p.id) == m.places.end())
                        m.places.push_back(p.id);
            }
            m.organization = std::move(org);
        }
    }
    result.model = std::move(flat);
    return result;
}

}  // namespace mech
