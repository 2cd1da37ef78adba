#pragma once

#include "mech/core/diagnostic.hpp"
#include "mech/core/model.hpp"

#include <json.hpp>

#include <vector>

namespace mech {

using Json = nlohmann::ordered_json;

Json to_json(const SourceSpan& span);
Json to_json(const QualityValue& value);
Json to_json(const StateExpr& expr);
Json to_json(const MechanismMetadata& metadata);
Json to_json(const ModelDocument& document);

/// Array of {code, severity, message, file, line, column, end_line,
/// end_column, related}.
Json to_json(const std::vector<Diagnostic>& diagnostics);

}  // namespace mech
