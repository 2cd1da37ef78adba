#pragma once

#include "mech/core/diagnostic.hpp"
#include "mech/core/model.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace mech {

/// Supplies detailing mechanisms that are not declared in the document being
/// compiled, e.g. from a knowledgebase.
class RefinementSource {
public:
    virtual ~RefinementSource() = default;
    /// A document holding mechanism `id` together with everything it needs.
    virtual std::optional<ModelDocument> refinement_document(const std::string& id) const = 0;
};

struct CompileOptions {
    const RefinementSource* kb = nullptr;
    int max_depth = 16;
    /// When false the compiled model keeps refined transitionals atomic.
    bool flatten = true;
};

struct DependencyGraph {
    std::vector<std::string> nodes;
    std::set<std::pair<std::string, std::string>> edges;

    /// The edges form one simple directed path through every node.
    bool is_path() const;
};

struct Classification {
    std::optional<MechanismType> inferred;
    bool concurrent = false;
    /// The initial state can be reached again.
    bool cyclic = false;
    bool path = false;
    /// State exploration hit its limits; the flags may be incomplete.
    bool truncated = false;
};

/// One replaced unit of the flattened refinement tree.
struct RefinementNode {
    std::string unit;
    std::string transitional;
    std::string mechanism;
    int depth = 1;
    std::vector<std::string> replaced_by;
};

struct CompiledModel {
    /// The document as written, plus refinements imported from the kb.
    ModelDocument source;
    /// Executable model: refined units replaced by their detailing units.
    ModelDocument model;
    /// Unit dependency graph over every unit of `model`.
    DependencyGraph graph;
    std::map<std::string, DependencyGraph> mechanism_graphs;
    std::map<std::string, Classification> classification;
    std::vector<RefinementNode> refinements;
    std::vector<Diagnostic> warnings;
};

struct CompileResult {
    std::optional<CompiledModel> compiled;
    /// Errors and warnings, sorted.
    std::vector<Diagnostic> diagnostics;

    bool ok() const { return compiled.has_value(); }
};

CompileResult compile(const ModelDocument& document, const CompileOptions& options = {});

/// Reference, kind, unit and symbol checks.
std::vector<Diagnostic> resolve_references(const ModelDocument& model);

/// Units whose outputs do not follow from their inputs and effects.
std::vector<Diagnostic> check_outputs(const ModelDocument& model);

std::vector<Diagnostic> check_chain(const Mechanism& mechanism, const ModelDocument& model);

std::vector<Diagnostic> check_conservation(const Mechanism& mechanism, const ModelDocument& model);

struct FlattenResult {
    std::optional<ModelDocument> model;
    std::vector<Diagnostic> diagnostics;
    std::vector<RefinementNode> tree;
};

/// Replaces every unit whose transitional has a refinement by the detailing
/// mechanism's units. Refinements missing from `model` are looked up in `kb`.
FlattenResult resolve_refinements(const ModelDocument& model, const RefinementSource* kb, int max_depth);

/// Adds refinement mechanisms from `kb` that `model` references but does not
/// declare, together with their dependencies.
ModelDocument import_refinements(const ModelDocument& model, const RefinementSource* kb);

DependencyGraph dependency_graph(const ModelDocument& model, const std::vector<std::string>& units);

struct ClassifyResult {
    Classification classification;
    std::vector<Diagnostic> diagnostics;
};

ClassifyResult classify_mechanism(const Mechanism& mechanism, const ModelDocument& model, const DependencyGraph& graph);

/// Conjunction of the setup (or termination) conditions of the active
/// mechanisms.
StateExpr active_setup(const ModelDocument& model);
StateExpr active_termination(const ModelDocument& model);

/// Units run by the active mechanisms, in organization order without repeats.
std::vector<const TransitionalUnit*> active_units(const ModelDocument& model);

}  // namespace mech
