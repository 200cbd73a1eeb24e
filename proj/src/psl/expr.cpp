#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "glrd/psl.hpp"

namespace glrd::psl {

struct SoftExpr::Node {
    Kind kind;
    double value = 0.0;
    std::string name;
    std::vector<SoftExpr> children;
    SourcePos pos;
};

SoftExpr SoftExpr::constant(double value, SourcePos pos) {
    if (!(value >= 0.0 && value <= 1.0)) {
        throw std::invalid_argument("soft-logic constant outside [0,1]");
    }
    return SoftExpr(std::make_shared<const Node>(Node{Kind::Const, value, {}, {}, pos}));
}

SoftExpr SoftExpr::var(std::string name, SourcePos pos) {
    if (name.empty()) throw std::invalid_argument("empty variable name");
    return SoftExpr(std::make_shared<const Node>(Node{Kind::Var, 0.0, std::move(name), {}, pos}));
}

SoftExpr SoftExpr::negate(SoftExpr operand, SourcePos pos) {
    return SoftExpr(std::make_shared<const Node>(Node{Kind::Not, 0.0, {}, {std::move(operand)}, pos}));
}

SoftExpr SoftExpr::conj(SoftExpr lhs, SoftExpr rhs, SourcePos pos) {
    return SoftExpr(
        std::make_shared<const Node>(Node{Kind::And, 0.0, {}, {std::move(lhs), std::move(rhs)}, pos}));
}

SoftExpr SoftExpr::disj(SoftExpr lhs, SoftExpr rhs, SourcePos pos) {
    return SoftExpr(
        std::make_shared<const Node>(Node{Kind::Or, 0.0, {}, {std::move(lhs), std::move(rhs)}, pos}));
}

SoftExpr SoftExpr::implies(SoftExpr lhs, SoftExpr rhs, SourcePos pos) {
    return disj(negate(std::move(lhs), pos), std::move(rhs), pos);
}

SoftExpr::Kind SoftExpr::kind() const { return node_->kind; }
double SoftExpr::value() const { return node_->value; }
const std::string& SoftExpr::name() const { return node_->name; }
const SoftExpr& SoftExpr::operand() const { return node_->children.at(0); }
const SoftExpr& SoftExpr::lhs() const { return node_->children.at(0); }
const SoftExpr& SoftExpr::rhs() const { return node_->children.at(1); }
SourcePos SoftExpr::pos() const { return node_->pos; }

bool SoftExpr::operator==(const SoftExpr& other) const {
    if (node_ == other.node_) return true;
    if (kind() != other.kind()) return false;
    switch (kind()) {
        case Kind::Const:
            return value() == other.value();
        case Kind::Var:
            return name() == other.name();
        case Kind::Not:
            return operand() == other.operand();
        case Kind::And:
        case Kind::Or:
            return lhs() == other.lhs() && rhs() == other.rhs();
    }
    return false;
}

double evalExpr(const SoftExpr& expr, const Bindings& bindings) {
    switch (expr.kind()) {
        case SoftExpr::Kind::Const:
            return expr.value();
        case SoftExpr::Kind::Var: {
            auto it = bindings.find(expr.name());
            if (it == bindings.end()) throw UnboundVariable(expr.name());
            return it->second;
        }
        case SoftExpr::Kind::Not:
            return lukNot(evalExpr(expr.operand(), bindings));
        case SoftExpr::Kind::And:
            return lukAnd(evalExpr(expr.lhs(), bindings), evalExpr(expr.rhs(), bindings));
        case SoftExpr::Kind::Or:
            return lukOr(evalExpr(expr.lhs(), bindings), evalExpr(expr.rhs(), bindings));
    }
    return 0.0;
}

namespace {

void collectVars(const SoftExpr& e, std::vector<std::string>& out) {
    switch (e.kind()) {
        case SoftExpr::Kind::Const:
            return;
        case SoftExpr::Kind::Var:
            if (std::find(out.begin(), out.end(), e.name()) == out.end()) out.push_back(e.name());
            return;
        case SoftExpr::Kind::Not:
            collectVars(e.operand(), out);
            return;
        case SoftExpr::Kind::And:
        case SoftExpr::Kind::Or:
            collectVars(e.lhs(), out);
            collectVars(e.rhs(), out);
            return;
    }
}

int precedence(const SoftExpr& e) {
    switch (e.kind()) {
        case SoftExpr::Kind::Or:
            return 1;
        case SoftExpr::Kind::And:
            return 2;
        case SoftExpr::Kind::Not:
            return 3;
        default:
            return 4;
    }
}

std::string formatNumber(double v) {
    // Shortest representation that parses back to the same double.
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    std::string s(buf, end);
    if (s.find_first_of(".e") == std::string::npos) s += ".0";
    return s;
}

void render(const SoftExpr& e, std::ostringstream& os) {
    auto child = [&](const SoftExpr& c, bool parens) {
        if (parens) os << '(';
        render(c, os);
        if (parens) os << ')';
    };
    switch (e.kind()) {
        case SoftExpr::Kind::Const:
            os << formatNumber(e.value());
            return;
        case SoftExpr::Kind::Var:
            os << e.name();
            return;
        case SoftExpr::Kind::Not:
            os << '!';
            child(e.operand(), precedence(e.operand()) < 3);
            return;
        case SoftExpr::Kind::And:
        case SoftExpr::Kind::Or: {
            const int p = precedence(e);
            // Left-associative: the right operand needs parens at equal precedence.
            child(e.lhs(), precedence(e.lhs()) < p);
            os << (e.kind() == SoftExpr::Kind::And ? " & " : " | ");
            child(e.rhs(), precedence(e.rhs()) <= p);
            return;
        }
    }
}

}  // namespace

std::vector<std::string> variablesOf(const SoftExpr& expr) {
    std::vector<std::string> out;
    collectVars(expr, out);
    return out;
}

std::string toString(const SoftExpr& expr) {
    std::ostringstream os;
    render(expr, os);
    return os.str();
}

RuleSet& RuleSet::bind(const std::string& name, double value) {
    bindings[name] = value;
    return *this;
}

RuleSet& RuleSet::setFree(std::vector<std::string> names) {
    freeVars = std::move(names);
    return *this;
}

void RuleSet::validate() const {
    for (const auto& fv : freeVars) {
        if (bindings.contains(fv)) throw std::invalid_argument("variable '" + fv + "' is both free and bound");
        if (std::count(freeVars.begin(), freeVars.end(), fv) > 1) {
            throw std::invalid_argument("free variable '" + fv + "' listed twice");
        }
    }
    for (const auto& [name, v] : bindings) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("binding '" + name + "' outside [0,1]");
    }
    for (const auto& rule : rules) {
        if (!(rule.weight >= 0.0) || !std::isfinite(rule.weight)) {
            throw std::invalid_argument("rule weight must be a nonnegative finite number");
        }
        for (const auto& v : variablesOf(rule.expr)) {
            const bool isFree = std::find(freeVars.begin(), freeVars.end(), v) != freeVars.end();
            if (!isFree && !bindings.contains(v)) {
                throw std::invalid_argument("variable '" + v + "' is neither free nor bound");
            }
        }
    }
}

std::string printRules(const RuleSet& rules) {
    std::ostringstream os;
    for (const auto& r : rules.rules) {
        os << formatNumber(r.weight) << " : " << toString(r.expr) << '\n';
    }
    return os.str();
}

std::string toString(SelectionPolicy policy) {
    switch (policy) {
        case SelectionPolicy::MaxKeepMinRecls:
            return "max-keep-min-recls";
        case SelectionPolicy::MinKeep:
            return "min-keep";
        case SelectionPolicy::SceneConservative:
            return "scene-conservative";
    }
    return "?";
}

SelectionPolicy parsePolicy(std::string_view name) {
    if (name == "max-keep-min-recls" || name == "MaxKeepMinRecls") return SelectionPolicy::MaxKeepMinRecls;
    if (name == "min-keep" || name == "MinKeep") return SelectionPolicy::MinKeep;
    if (name == "scene-conservative" || name == "SceneConservative") return SelectionPolicy::SceneConservative;
    throw std::invalid_argument("unknown selection policy '" + std::string(name) + "'");
}

std::string toString(Decision d) {
    switch (d) {
        case Decision::Keep:
            return "keep";
        case Decision::Remove:
            return "remove";
        case Decision::Reclassify:
            return "reclassify";
    }
    return "?";
}

}  // namespace glrd::psl
