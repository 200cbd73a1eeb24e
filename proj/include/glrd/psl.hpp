#pragma once

#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "glrd/geometry.hpp"

namespace glrd::psl {

struct SourcePos {
    int line = 0;
    int column = 0;
};

/// Lukasiewicz soft-logic expression. Nodes are immutable and shared.
///
/// Implication is not a node kind: `implies(a, b)` builds `!a | b`, so the
/// evaluator only handles negation, conjunction and disjunction.
class SoftExpr {
  public:
    enum class Kind { Const, Var, Not, And, Or };

    static SoftExpr constant(double value, SourcePos pos = {});
    static SoftExpr var(std::string name, SourcePos pos = {});
    static SoftExpr negate(SoftExpr operand, SourcePos pos = {});
    static SoftExpr conj(SoftExpr lhs, SoftExpr rhs, SourcePos pos = {});
    static SoftExpr disj(SoftExpr lhs, SoftExpr rhs, SourcePos pos = {});
    static SoftExpr implies(SoftExpr lhs, SoftExpr rhs, SourcePos pos = {});

    Kind kind() const;
    double value() const;             // Const only
    const std::string& name() const;  // Var only
    const SoftExpr& operand() const;  // Not only
    const SoftExpr& lhs() const;      // And / Or
    const SoftExpr& rhs() const;      // And / Or
    SourcePos pos() const;

    /// Structural equality; source positions are ignored.
    bool operator==(const SoftExpr& other) const;

  private:
    struct Node;
    explicit SoftExpr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
    std::shared_ptr<const Node> node_;
};

inline SoftExpr operator&(SoftExpr a, SoftExpr b) { return SoftExpr::conj(std::move(a), std::move(b)); }
inline SoftExpr operator|(SoftExpr a, SoftExpr b) { return SoftExpr::disj(std::move(a), std::move(b)); }
inline SoftExpr operator!(SoftExpr a) { return SoftExpr::negate(std::move(a)); }

// Lukasiewicz connectives on plain values.
inline double lukAnd(double x, double y) { return x + y - 1.0 > 0.0 ? x + y - 1.0 : 0.0; }
inline double lukOr(double x, double y) { return x + y < 1.0 ? x + y : 1.0; }
inline double lukNot(double x) { return 1.0 - x; }
inline double lukImplies(double x, double y) { return lukOr(lukNot(x), y); }

using Bindings = std::map<std::string, double, std::less<>>;

class UnboundVariable : public std::runtime_error {
  public:
    explicit UnboundVariable(const std::string& name)
        : std::runtime_error("unbound variable '" + name + "'"), name_(name) {}
    const std::string& variable() const { return name_; }

  private:
    std::string name_;
};

double evalExpr(const SoftExpr& expr, const Bindings& bindings);

/// Collects variable names in first-occurrence order.
std::vector<std::string> variablesOf(const SoftExpr& expr);

/// Renders with the minimal parentheses needed to parse back to the same tree.
std::string toString(const SoftExpr& expr);

struct Rule {
    SoftExpr expr;
    double weight = 1.0;
    SourcePos pos;

    bool operator==(const Rule& o) const { return weight == o.weight && expr == o.expr; }
};

/// Weighted rules plus the split of their variables into free and bound.
struct RuleSet {
    std::vector<Rule> rules;
    std::vector<std::string> freeVars;
    Bindings bindings;

    RuleSet& bind(const std::string& name, double value);
    RuleSet& setFree(std::vector<std::string> names);

    /// Throws std::invalid_argument when a variable is neither free nor bound,
    /// is both, a weight is negative, or a binding/constant leaves [0,1].
    void validate() const;

    bool operator==(const RuleSet& o) const {
        return rules == o.rules && freeVars == o.freeVars && bindings == o.bindings;
    }
};

class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string& message, SourcePos pos);
    SourcePos pos() const { return pos_; }

  private:
    SourcePos pos_;
};

/// Parses `weight : expr` lines. Blank lines and `#` comments are skipped.
/// Operators by increasing precedence: `->` (right assoc), `|`, `&`, `!`.
RuleSet parseRules(std::string_view text);

/// Inverse of parseRules for the rule list (bindings are not printed).
std::string printRules(const RuleSet& rules);

struct ConstraintVector {
    double xConf = 0.0;
    double xSize = 0.0;
    double xScene = 0.0;
};

struct RuleWeights {
    double alpha1 = 1.0;
    double alpha2 = 1.0;
    double alpha3 = 1.0;
};

inline constexpr std::string_view kKeepVar = "yKeep";
inline constexpr std::string_view kReclsVar = "yRecls";

/// The three keep/remove/reclassify rules over free yKeep, yRecls with the
/// constraint values bound to xConf, xSize, xScene.
RuleSet buildGlrdRules(const ConstraintVector& x, const RuleWeights& weights = {});

/// Rule-DSL source equivalent to buildGlrdRules (before binding).
std::string glrdRuleText(const RuleWeights& weights = {});

enum class SelectionPolicy { MaxKeepMinRecls, MinKeep, SceneConservative };

std::string toString(SelectionPolicy policy);
SelectionPolicy parsePolicy(std::string_view name);

/// Convex cell of (yKeep, yRecls) space; each half-plane reads
/// a*yKeep + b*yRecls >= c.
struct LinearCell {
    std::vector<HalfPlane> constraints;
    Polygon2 polygon;  // x = yKeep, y = yRecls

    bool contains(double yKeep, double yRecls, double tol = 1e-9) const;
};

struct SolverOutput {
    double yKeep = 0.0;
    double yRecls = 0.0;
    double objective = 0.0;
    std::vector<LinearCell> maximizerDescription;
};

/// Exact maximization of the weighted rule sum over [0,1]^2 for the
/// keep/recls variable pair. The objective is piecewise linear, so its
/// maximum sits on a vertex of the arrangement of all clamp breakpoints;
/// flat optima are resolved by `policy`.
SolverOutput solve(const RuleSet& rules, SelectionPolicy policy = SelectionPolicy::SceneConservative);

/// Grid scan over [0,1]^k (k = number of free variables, at most 2) with step
/// at most `resolution`. Test oracle for `solve`.
SolverOutput bruteForceSolve(const RuleSet& rules, double resolution);

enum class Decision { Keep, Remove, Reclassify };

std::string toString(Decision d);

struct DecisionThresholds {
    double phiKeep = 0.01;
    double phiRecls = 0.2;
};

Decision decide(const SolverOutput& sol, const DecisionThresholds& thresholds = {});

}  // namespace glrd::psl
