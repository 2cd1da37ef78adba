#pragma once

#include "mech/core/model.hpp"

#include <string>
#include <vector>

namespace mech {

enum class Severity { Error, Warning };

std::string_view to_string(Severity s);

struct RelatedSpan {
    SourceSpan span;
    std::string note;
};

/// A located message from the parser or the compiler. `code` is a stable
/// short identifier such as CHAIN_MISMATCH or SYNTAX_ERROR.
struct Diagnostic {
    Severity severity = Severity::Error;
    std::string code;
    std::string message;
    SourceSpan span;
    std::vector<RelatedSpan> related;
};

std::size_t count_errors(const std::vector<Diagnostic>& diags);
std::size_t count_warnings(const std::vector<Diagnostic>& diags);

/// Orders by file, position, then code and message.
void sort_diagnostics(std::vector<Diagnostic>& diags);

/// `file:line:col: error[CODE]: message` plus indented related notes.
std::string render_text(const std::vector<Diagnostic>& diags);

}  // namespace mech
