#include <cctype>
#include <charconv>
#include <optional>

#include "glrd/psl.hpp"

namespace glrd::psl {

ParseError::ParseError(const std::string& message, SourcePos pos)
    : std::runtime_error("line " + std::to_string(pos.line) + ", column " + std::to_string(pos.column) + ": " +
                         message),
      pos_(pos) {}

namespace {

enum class Tok { Number, Ident, Colon, And, Or, Not, Arrow, LParen, RParen, Minus, End };

struct Token {
    Tok kind;
    std::string_view text;
    SourcePos pos;
};

std::string describe(const Token& t) {
    if (t.kind == Tok::End) return "end of line";
    return "'" + std::string(t.text) + "'";
}

std::vector<Token> tokenize(std::string_view line, int lineNo) {
    std::vector<Token> out;
    std::size_t i = 0;
    auto at = [&](std::size_t col) { return SourcePos{lineNo, static_cast<int>(col) + 1}; };
    while (i < line.size()) {
        const char c = line[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (c == '#') break;
        const std::size_t start = i;
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            while (i < line.size() && (std::isdigit(static_cast<unsigned char>(line[i])) || line[i] == '.')) ++i;
            if (i < line.size() && (line[i] == 'e' || line[i] == 'E')) {
                std::size_t j = i + 1;
                if (j < line.size() && (line[j] == '+' || line[j] == '-')) ++j;
                if (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) {
                    i = j;
                    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
                }
            }
            out.push_back({Tok::Number, line.substr(start, i - start), at(start)});
            continue;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            while (i < line.size() && (std::isalnum(static_cast<unsigned char>(line[i])) || line[i] == '_')) ++i;
            out.push_back({Tok::Ident, line.substr(start, i - start), at(start)});
            continue;
        }
        if (c == '-' && i + 1 < line.size() && line[i + 1] == '>') {
            out.push_back({Tok::Arrow, line.substr(i, 2), at(start)});
            i += 2;
            continue;
        }
        Tok kind;
        switch (c) {
            case ':':
                kind = Tok::Colon;
                break;
            case '&':
                kind = Tok::And;
                break;
            case '|':
                kind = Tok::Or;
                break;
            case '!':
                kind = Tok::Not;
                break;
            case '(':
                kind = Tok::LParen;
                break;
            case ')':
                kind = Tok::RParen;
                break;
            case '-':
                kind = Tok::Minus;
                break;
            default:
                throw ParseError(std::string("unexpected character '") + c + "'", at(start));
        }
        out.push_back({kind, line.substr(i, 1), at(start)});
        ++i;
    }
    out.push_back({Tok::End, {}, at(line.size())});
    return out;
}

double parseNumber(const Token& t) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
    if (ec != std::errc() || ptr != t.text.data() + t.text.size()) {
        throw ParseError("malformed number " + describe(t), t.pos);
    }
    return v;
}

class LineParser {
  public:
    explicit LineParser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

    Rule parseRule() {
        Rule rule{SoftExpr::constant(0.0), 0.0, peek().pos};
        bool negative = false;
        if (peek().kind == Tok::Minus) {
            negative = true;
            advance();
        }
        const Token& w = expect(Tok::Number, "rule weight");
        rule.weight = parseNumber(w);
        if (negative && rule.weight != 0.0) throw ParseError("rule weight must be nonnegative", rule.pos);
        expect(Tok::Colon, "':' after weight");
        rule.expr = parseImplication();
        if (peek().kind != Tok::End) throw ParseError("unexpected " + describe(peek()), peek().pos);
        return rule;
    }

  private:
    const Token& peek() const { return toks_[idx_]; }
    const Token& advance() { return toks_[idx_ < toks_.size() - 1 ? idx_++ : idx_]; }

    const Token& expect(Tok kind, const char* what) {
        if (peek().kind != kind) throw ParseError(std::string("expected ") + what + ", found " + describe(peek()), peek().pos);
        return advance();
    }

    // An operand is missing right after a binary operator: point at the operator.
    SoftExpr operandAfter(const Token& op, SoftExpr (LineParser::*next)()) {
        if (peek().kind == Tok::End) {
            throw ParseError("dangling operator " + describe(op) + " has no right operand", op.pos);
        }
        return (this->*next)();
    }

    SoftExpr parseImplication() {
        SoftExpr lhs = parseDisjunction();
        if (peek().kind == Tok::Arrow) {
            const Token op = advance();
            SoftExpr rhs = operandAfter(op, &LineParser::parseImplication);
            return SoftExpr::implies(std::move(lhs), std::move(rhs), op.pos);
        }
        return lhs;
    }

    SoftExpr parseDisjunction() {
        SoftExpr lhs = parseConjunction();
        while (peek().kind == Tok::Or) {
            const Token op = advance();
            SoftExpr rhs = operandAfter(op, &LineParser::parseConjunction);
            lhs = SoftExpr::disj(std::move(lhs), std::move(rhs), op.pos);
        }
        return lhs;
    }

    SoftExpr parseConjunction() {
        SoftExpr lhs = parseUnary();
        while (peek().kind == Tok::And) {
            const Token op = advance();
            SoftExpr rhs = operandAfter(op, &LineParser::parseUnary);
            lhs = SoftExpr::conj(std::move(lhs), std::move(rhs), op.pos);
        }
        return lhs;
    }

    SoftExpr parseUnary() {
        if (peek().kind == Tok::Not) {
            const Token op = advance();
            return SoftExpr::negate(operandAfter(op, &LineParser::parseUnary), op.pos);
        }
        return parseAtom();
    }

    SoftExpr parseAtom() {
        const Token& t = peek();
        switch (t.kind) {
            case Tok::Ident:
                advance();
                return SoftExpr::var(std::string(t.text), t.pos);
            case Tok::Number: {
                advance();
                const double v = parseNumber(t);
                if (v < 0.0 || v > 1.0) throw ParseError("constant " + describe(t) + " outside [0,1]", t.pos);
                return SoftExpr::constant(v, t.pos);
            }
            case Tok::LParen: {
                advance();
                SoftExpr inner = parseImplication();
                expect(Tok::RParen, "')'");
                return inner;
            }
            default:
                throw ParseError("expected operand, found " + describe(t), t.pos);
        }
    }

    std::vector<Token> toks_;
    std::size_t idx_ = 0;
};

}  // namespace

RuleSet parseRules(std::string_view text) {
    RuleSet out;
    int lineNo = 0;
    while (!text.empty()) {
        ++lineNo;
        const std::size_t nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        auto tokens = tokenize(line, lineNo);
        if (tokens.size() == 1) continue;  // blank or comment
        out.rules.push_back(LineParser(std::move(tokens)).parseRule());
    }
    return out;
}

}  // namespace glrd::psl
