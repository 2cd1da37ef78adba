#pragma once

#include "mech/compiler/compiler.hpp"
#include "mech/core/entailment.hpp"

namespace mech::detail {

Diagnostic make_diag(Severity severity, std::string code, std::string message, const SourceSpan& span,
                     std::vector<RelatedSpan> related = {});

/// Initial facts with every target some unit can change widened to its
/// kind's full range (counts stay nonnegative).
AbstractState widened_facts(const ModelDocument& model);

std::vector<const TransitionalUnit*> units_of(const Mechanism& mechanism, const ModelDocument& model);

}  // namespace mech::detail
