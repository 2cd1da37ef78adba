#pragma once

#include "mech/core/diagnostic.hpp"
#include "mech/core/model.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mech {

/// Exactly one of `document` and `diagnostics` is populated.
struct ParseResult {
    std::optional<ModelDocument> document;
    std::vector<Diagnostic> diagnostics;

    bool ok() const { return document.has_value(); }
};

ParseResult parse_mech(std::string_view text, const std::string& file_name = "<input>");

struct ExprParseResult {
    std::optional<StateExpr> expr;
    std::vector<Diagnostic> diagnostics;
};

/// Parses a standalone state expression such as `vehicle.moving == true`.
ExprParseResult parse_state_expr(std::string_view text, const std::string& file_name = "<expr>");

/// Canonical text. Starts with a header comment; an empty document is the
/// header alone.
std::string serialize_mech(const ModelDocument& document);

std::string format_expr(const StateExpr& expr);
std::string format_atom(const StateAtom& atom);
std::string format_effect(const Effect& effect);

/// `"text"` with backslash escapes.
std::string quote(std::string_view text);

}  // namespace mech
