#include "mech/lang/lexer.hpp"

#include <cctype>

namespace mech {

namespace {

bool is_alpha(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }
bool is_alnum(char c) { return is_alpha(c) || is_digit(c); }

class Lexer {
public:
    explicit Lexer(std::string_view text) : src_(text) {}

    std::vector<Token> run() {
        bool glued = false;
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
                advance();
                glued = false;
                continue;
            }
            if (c == '#' || (c == '/' && peek(1) == '/')) {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
                glued = false;
                continue;
            }
            Token t;
            t.line = line_;
            t.column = col_;
            t.glued = glued;
            if (c == '\n') {
                t.kind = TokenKind::Newline;
                t.text = "\\n";
                advance();
                t.end_column = t.column;
                out_.push_back(t);
                line_++;
                col_ = 1;
                glued = false;
                continue;
            }
            if (c == '"')
                lex_string(t);
            else if (c == '[')
                lex_unit(t);
            else if (is_digit(c) || (c == '-' && is_digit(peek(1))) || (c == '.' && is_digit(peek(1))))
                lex_number(t);
            else if (is_alpha(c))
                lex_ident(t);
            else
                lex_punct(t);
            t.end_column = col_ - 1 < t.column ? t.column : col_ - 1;
            out_.push_back(std::move(t));
            glued = true;
        }
        Token end;
        end.kind = TokenKind::End;
        end.line = line_;
        end.column = col_;
        end.end_column = col_;
        out_.push_back(end);
        return std::move(out_);
    }

private:
    std::string_view src_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
    std::vector<Token> out_;

    char peek(std::size_t ahead) const { return pos_ + ahead < src_.size() ? src_[pos_ + ahead] : '\0'; }

    void advance() {
        ++pos_;
        ++col_;
    }

    void lex_string(Token& t) {
        advance();
        std::string value;
        while (true) {
            if (pos_ >= src_.size() || src_[pos_] == '\n') {
                t.kind = TokenKind::Invalid;
                t.text = "unterminated string";
                return;
            }
            char c = src_[pos_];
            if (c == '"') {
                advance();
                break;
            }
            if (c == '\\') {
                char n = peek(1);
                switch (n) {
                case '"': value += '"'; break;
                case '\\': value += '\\'; break;
                case 'n': value += '\n'; break;
                case 't': value += '\t'; break;
                case 'r': value += '\r'; break;
                default:
                    t.kind = TokenKind::Invalid;
                    t.text = "unknown escape sequence";
                    while (pos_ < src_.size() && src_[pos_] != '\n' && src_[pos_] != '"') advance();
                    if (pos_ < src_.size() && src_[pos_] == '"') advance();
                    return;
                }
                advance();
                advance();
                continue;
            }
            value += c;
            advance();
        }
        t.kind = TokenKind::String;
        t.text = std::move(value);
    }

    void lex_unit(Token& t) {
        advance();
        std::string value;
        while (pos_ < src_.size() && src_[pos_] != ']' && src_[pos_] != '\n') {
            value += src_[pos_];
            advance();
        }
        if (pos_ >= src_.size() || src_[pos_] != ']') {
            t.kind = TokenKind::Invalid;
            t.text = "unterminated unit, expected ']'";
            return;
        }
        advance();
        auto first = value.find_first_not_of(' ');
        auto last = value.find_last_not_of(' ');
        value = first == std::string::npos ? std::string() : value.substr(first, last - first + 1);
        if (value.empty()) {
            t.kind = TokenKind::Invalid;
            t.text = "empty unit";
            return;
        }
        t.kind = TokenKind::Unit;
        t.text = std::move(value);
    }

    void lex_number(Token& t) {
        std::string value;
        if (src_[pos_] == '-') {
            value += '-';
            advance();
        }
        auto digits = [&] {
            while (pos_ < src_.size() && is_digit(src_[pos_])) {
                value += src_[pos_];
                advance();
            }
        };
        digits();
        if (pos_ < src_.size() && src_[pos_] == '.' && is_digit(peek(1))) {
            value += '.';
            advance();
            digits();
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            char n = peek(1);
            if (is_digit(n) || ((n == '+' || n == '-') && is_digit(peek(2)))) {
                value += 'e';
                advance();
                if (n == '+' || n == '-') {
                    value += n;
                    advance();
                }
                digits();
            }
        }
        if (pos_ < src_.size() && src_[pos_] == '/' && is_digit(peek(1))) {
            value += '/';
            advance();
            digits();
        }
        t.kind = TokenKind::Number;
        if (pos_ < src_.size() && is_alpha(src_[pos_])) {
            while (pos_ < src_.size() && is_alnum(src_[pos_])) {
                value += src_[pos_];
                advance();
            }
            t.kind = TokenKind::Invalid;
            t.text = "malformed number '" + value + "'";
            return;
        }
        t.text = std::move(value);
    }

    void lex_ident(Token& t) {
        std::string value;
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (is_alnum(c) || (c == '-' && is_alnum(peek(1)))) {
                value += c;
                advance();
            } else {
                break;
            }
        }
        t.kind = TokenKind::Ident;
        t.text = std::move(value);
    }

    void lex_punct(Token& t) {
        static constexpr std::string_view two[] = {"==", "!=", "<=", ">=", "&&", "||", "->", "+=", "-="};
        for (auto op : two) {
            if (src_.substr(pos_, 2) == op) {
                t.kind = TokenKind::Punct;
                t.text = std::string(op);
                advance();
                advance();
                return;
            }
        }
        char c = src_[pos_];
        static constexpr std::string_view single = "{}(),:.=<>!*;";
        if (single.find(c) != std::string_view::npos) {
            t.kind = TokenKind::Punct;
            t.text = std::string(1, c);
            advance();
            return;
        }
        t.kind = TokenKind::Invalid;
        unsigned char u = static_cast<unsigned char>(c);
        if (u >= 0x20 && u < 0x7f)
            t.text = std::string("unexpected character '") + c + "'";
        else
            t.text = "unexpected byte 0x" + std::string(1, "0123456789abcdef"[u >> 4]) +
                     std::string(1, "0123456789abcdef"[u & 15]);
        advance();
    }
};

}  // namespace

std::vector<Token> tokenize(std::string_view text) {
    return Lexer(text).run();
}

SourceSpan span_of(const Token& t, const std::string& file) {
    return SourceSpan{file, t.line, t.column, t.line, t.end_column};
}

SourceSpan span_between(const Token& first, const Token& last, const std::string& file) {
    return SourceSpan{file, first.line, first.column, last.line, last.end_column};
}

}  // namespace mech
