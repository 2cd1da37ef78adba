#pragma once

#include "mech/core/diagnostic.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace mech {

enum class TokenKind { Ident, Number, String, Unit, Punct, Newline, End, Invalid };

struct Token {
    TokenKind kind = TokenKind::End;
    /// Identifier or punctuation text; unescaped string contents; raw number
    /// text; unit text without brackets.
    std::string text;
    int line = 1;
    int column = 1;
    int end_column = 1;  // inclusive
    /// No whitespace between this token and the previous one.
    bool glued = false;
};

/// Splits .mech and .rules text into tokens. `#` and `//` start comments.
/// CRLF is accepted. Malformed input becomes Invalid tokens carrying a
/// message in `text`; the lexer never throws.
std::vector<Token> tokenize(std::string_view text);

SourceSpan span_of(const Token& t, const std::string& file);
SourceSpan span_between(const Token& first, const Token& last, const std::string& file);

}  // namespace mech
