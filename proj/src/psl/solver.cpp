#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <tuple>

#include "glrd/psl.hpp"

namespace glrd::psl {

RuleSet buildGlrdRules(const ConstraintVector& x, const RuleWeights& weights) {
    const auto conf = SoftExpr::var("xConf");
    const auto size = SoftExpr::var("xSize");
    const auto scene = SoftExpr::var("xScene");
    const auto keep = SoftExpr::var(std::string(kKeepVar));
    const auto recls = SoftExpr::var(std::string(kReclsVar));

    RuleSet rs;
    rs.rules.push_back({SoftExpr::implies(conf & size & scene, keep & !recls), weights.alpha1, {}});
    rs.rules.push_back({SoftExpr::implies(conf & !(size & scene), SoftExpr::disj(!keep, recls)), weights.alpha2, {}});
    rs.rules.push_back({SoftExpr::implies(!conf, !keep), weights.alpha3, {}});
    rs.setFree({std::string(kKeepVar), std::string(kReclsVar)});
    rs.bind("xConf", x.xConf).bind("xSize", x.xSize).bind("xScene", x.xScene);
    rs.validate();
    return rs;
}

std::string glrdRuleText(const RuleWeights& weights) {
    RuleSet rs = buildGlrdRules({1.0, 1.0, 1.0}, weights);
    return printRules(rs);
}

bool LinearCell::contains(double yKeep, double yRecls, double tol) const {
    return std::all_of(constraints.begin(), constraints.end(),
                       [&](const HalfPlane& h) { return h.a * yKeep + h.b * yRecls >= h.c - tol; });
}

namespace {

// k*yKeep + r*yRecls + c
struct Affine {
    double k = 0.0;
    double r = 0.0;
    double c = 0.0;

    Affine operator+(const Affine& o) const { return {k + o.k, r + o.r, c + o.c}; }
    Affine shifted(double d) const { return {k, r, c + d}; }
    Affine negated() const { return {-k, -r, -c}; }
};

constexpr std::size_t kMaxForms = 4096;
constexpr double kKeyScale = 1e11;

using FormKey = std::tuple<long long, long long, long long>;

FormKey keyOf(const Affine& a) {
    return {std::llround(a.k * kKeyScale), std::llround(a.r * kKeyScale), std::llround(a.c * kKeyScale)};
}

class FormCollector {
  public:
    FormCollector(const Bindings& bound, std::vector<Affine>& lines) : bound_(bound), lines_(lines) {}

    std::vector<Affine> forms(const SoftExpr& e) {
        switch (e.kind()) {
            case SoftExpr::Kind::Const:
                return {{0.0, 0.0, e.value()}};
            case SoftExpr::Kind::Var: {
                if (e.name() == kKeepVar) return {{1.0, 0.0, 0.0}};
                if (e.name() == kReclsVar) return {{0.0, 1.0, 0.0}};
                auto it = bound_.find(e.name());
                if (it == bound_.end()) throw UnboundVariable(e.name());
                return {{0.0, 0.0, it->second}};
            }
            case SoftExpr::Kind::Not: {
                std::vector<Affine> out;
                for (const auto& f : forms(e.operand())) out.push_back(f.negated().shifted(1.0));
                return out;
            }
            case SoftExpr::Kind::And:
            case SoftExpr::Kind::Or: {
                const bool isAnd = e.kind() == SoftExpr::Kind::And;
                const auto lf = forms(e.lhs());
                const auto rf = forms(e.rhs());
                std::vector<Affine> out;
                std::set<FormKey> seen;
                auto add = [&](const Affine& a) {
                    if (seen.insert(keyOf(a)).second) out.push_back(a);
                };
                add({0.0, 0.0, isAnd ? 0.0 : 1.0});
                for (const auto& a : lf) {
                    for (const auto& b : rf) {
                        const Affine sum = a + b;
                        // Both connectives clamp exactly where sum - 1 crosses zero.
                        addLine(sum.shifted(-1.0));
                        add(isAnd ? sum.shifted(-1.0) : sum);
                    }
                }
                if (out.size() > kMaxForms) throw std::invalid_argument("rule set too large for exact solving");
                return out;
            }
        }
        return {};
    }

  private:
    void addLine(Affine a) {
        const double n = std::hypot(a.k, a.r);
        if (n < 1e-12) return;
        a = {a.k / n, a.r / n, a.c / n};
        // Canonical orientation so opposite normals dedupe.
        if (a.k < 0.0 || (a.k == 0.0 && a.r < 0.0)) a = a.negated();
        if (lineKeys_.insert(keyOf(a)).second) lines_.push_back(a);
    }

    const Bindings& bound_;
    std::vector<Affine>& lines_;
    std::set<FormKey> lineKeys_;
};

double objectiveAt(const RuleSet& rs, Bindings& scratch, double yKeep, double yRecls) {
    scratch[std::string(kKeepVar)] = yKeep;
    scratch[std::string(kReclsVar)] = yRecls;
    double total = 0.0;
    for (const auto& rule : rs.rules) total += rule.weight * evalExpr(rule.expr, scratch);
    return total;
}

SelectionPolicy effectivePolicy(SelectionPolicy p, const Bindings& bindings) {
    if (p != SelectionPolicy::SceneConservative) return p;
    auto it = bindings.find("xScene");
    const bool sceneRejects = it != bindings.end() && it->second <= 1e-12;
    return sceneRejects ? SelectionPolicy::MinKeep : SelectionPolicy::MaxKeepMinRecls;
}

constexpr double kCoordTol = 1e-12;

// True when `a` is preferred over `b` under the policy.
bool preferred(const Point2& a, const Point2& b, SelectionPolicy p) {
    if (std::abs(a.x - b.x) > kCoordTol) {
        return p == SelectionPolicy::MaxKeepMinRecls ? a.x > b.x : a.x < b.x;
    }
    return a.y < b.y - kCoordTol;
}

void requireGlrdVariables(const RuleSet& rs) {
    std::vector<std::string> fv = rs.freeVars;
    std::sort(fv.begin(), fv.end());
    const std::vector<std::string> expected{std::string(kKeepVar), std::string(kReclsVar)};
    if (fv != expected) {
        throw std::invalid_argument("exact solver requires free variables exactly {yKeep, yRecls}");
    }
}

const std::vector<HalfPlane>& unitSquare() {
    static const std::vector<HalfPlane> sq{{1, 0, 0}, {-1, 0, -1}, {0, 1, 0}, {0, -1, -1}};
    return sq;
}

Polygon2 unitSquarePolygon() { return {{0, 0}, {1, 0}, {1, 1}, {0, 1}}; }

LinearCell buildCell(const std::vector<HalfPlane>& sides) {
    LinearCell cell;
    Polygon2 poly = unitSquarePolygon();
    for (const auto& h : sides) poly = clipPolygon(poly, h);
    cell.polygon = poly;

    std::vector<HalfPlane> candidates = sides;
    candidates.insert(candidates.end(), unitSquare().begin(), unitSquare().end());
    for (const auto& h : candidates) {
        int onLine = 0;
        for (const auto& v : poly) {
            if (std::abs(h.a * v.x + h.b * v.y - h.c) <= 1e-9) ++onLine;
        }
        if (onLine < 2) continue;
        const bool dup = std::any_of(cell.constraints.begin(), cell.constraints.end(), [&](const HalfPlane& o) {
            return std::abs(o.a - h.a) < 1e-12 && std::abs(o.b - h.b) < 1e-12 && std::abs(o.c - h.c) < 1e-12;
        });
        if (!dup) cell.constraints.push_back(h);
    }
    return cell;
}

LinearCell pointCell(const Point2& p) {
    LinearCell cell;
    cell.constraints = {{1, 0, p.x}, {-1, 0, -p.x}, {0, 1, p.y}, {0, -1, -p.y}};
    cell.polygon = {p};
    return cell;
}

}  // namespace

SolverOutput solve(const RuleSet& rules, SelectionPolicy policy) {
    rules.validate();
    requireGlrdVariables(rules);

    std::vector<Affine> lines;
    {
        FormCollector collector(rules.bindings, lines);
        for (const auto& rule : rules.rules) collector.forms(rule.expr);
    }

    // Arrangement vertices: pairwise intersections of breakpoint and border lines.
    std::vector<Affine> all = lines;
    all.push_back({1, 0, 0});
    all.push_back({1, 0, -1});
    all.push_back({0, 1, 0});
    all.push_back({0, 1, -1});

    std::vector<Point2> vertices;
    std::set<std::pair<long long, long long>> seen;
    auto addVertex = [&](double x, double y) {
        if (x < -1e-12 || x > 1.0 + 1e-12 || y < -1e-12 || y > 1.0 + 1e-12) return;
        x = std::clamp(x, 0.0, 1.0);
        y = std::clamp(y, 0.0, 1.0);
        if (seen.insert({std::llround(x * 1e10), std::llround(y * 1e10)}).second) vertices.push_back({x, y});
    };
    for (std::size_t i = 0; i < all.size(); ++i) {
        for (std::size_t j = i + 1; j < all.size(); ++j) {
            const Affine& p = all[i];
            const Affine& q = all[j];
            const double det = p.k * q.r - p.r * q.k;
            if (std::abs(det) < 1e-14) continue;
            addVertex((-p.c * q.r + q.c * p.r) / det, (-p.k * q.c + q.k * p.c) / det);
        }
    }

    Bindings scratch = rules.bindings;
    std::vector<double> values(vertices.size());
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < vertices.size(); ++i) {
        values[i] = objectiveAt(rules, scratch, vertices[i].x, vertices[i].y);
        best = std::max(best, values[i]);
    }

    double weightSum = 0.0;
    for (const auto& r : rules.rules) weightSum += r.weight;
    const double tol = 1e-9 * std::max(1.0, weightSum);
    const SelectionPolicy eff = effectivePolicy(policy, rules.bindings);

    std::optional<Point2> chosen;
    for (std::size_t i = 0; i < vertices.size(); ++i) {
        if (values[i] < best - tol) continue;
        if (!chosen || preferred(vertices[i], *chosen, eff)) chosen = vertices[i];
    }

    SolverOutput out;
    // Adding 0.0 turns a -0.0 from the intersection arithmetic into 0.0.
    out.yKeep = std::clamp(chosen->x, 0.0, 1.0) + 0.0;
    out.yRecls = std::clamp(chosen->y, 0.0, 1.0) + 0.0;
    out.objective = objectiveAt(rules, scratch, out.yKeep, out.yRecls);

    // Full-dimensional maximizing cells, found by sweeping vertical slabs.
    std::vector<double> xs;
    for (const auto& v : vertices) xs.push_back(v.x);
    std::sort(xs.begin(), xs.end());
    std::set<std::vector<bool>> visited;
    for (std::size_t s = 0; s + 1 < xs.size(); ++s) {
        if (xs[s + 1] - xs[s] < 1e-9) continue;
        const double xm = 0.5 * (xs[s] + xs[s + 1]);
        std::vector<double> ys{0.0, 1.0};
        for (const auto& l : lines) {
            if (std::abs(l.r) < 1e-12) continue;
            const double y = -(l.k * xm + l.c) / l.r;
            if (y > 0.0 && y < 1.0) ys.push_back(y);
        }
        std::sort(ys.begin(), ys.end());
        for (std::size_t t = 0; t + 1 < ys.size(); ++t) {
            if (ys[t + 1] - ys[t] < 1e-9) continue;
            const double ym = 0.5 * (ys[t] + ys[t + 1]);
            std::vector<bool> signs(lines.size());
            for (std::size_t i = 0; i < lines.size(); ++i) {
                signs[i] = lines[i].k * xm + lines[i].r * ym + lines[i].c > 0.0;
            }
            if (!visited.insert(signs).second) continue;
            if (objectiveAt(rules, scratch, xm, ym) < best - tol) continue;

            std::vector<HalfPlane> sides;
            for (std::size_t i = 0; i < lines.size(); ++i) {
                const Affine& l = lines[i];
                sides.push_back(signs[i] ? HalfPlane{l.k, l.r, -l.c} : HalfPlane{-l.k, -l.r, l.c});
            }
            out.maximizerDescription.push_back(buildCell(sides));
        }
    }
    const bool covered = std::any_of(out.maximizerDescription.begin(), out.maximizerDescription.end(),
                                     [&](const LinearCell& c) { return c.contains(out.yKeep, out.yRecls); });
    if (!covered) out.maximizerDescription.push_back(pointCell(*chosen));
    return out;
}

namespace {

// Row-vectorized evaluator for the grid oracle: the first free variable is
// constant along a row, the second varies along it.
class GridProgram {
  public:
    GridProgram(const SoftExpr& expr, const Bindings& bound, const std::string* rowVar, const std::string* colVar)
        : bound_(bound), rowVar_(rowVar), colVar_(colVar) {
        compile(expr);
    }

    // Adds weight * value(row, cols) into `acc`.
    void accumulate(double weight, double rowValue, const std::vector<double>& cols, std::vector<double>& acc) {
        const std::size_t n = cols.size();
        for (std::size_t i = 0; i < code_.size(); ++i) {
            Instr& in = code_[i];
            if (!in.vector) {
                in.scalar = scalarOf(in, rowValue);
                continue;
            }
            in.buf.resize(n);
            double* out = in.buf.data();
            switch (in.op) {
                case Op::Col:
                    std::copy(cols.begin(), cols.end(), out);
                    break;
                case Op::Not: {
                    const double* a = code_[in.lhs].buf.data();
                    for (std::size_t j = 0; j < n; ++j) out[j] = 1.0 - a[j];
                    break;
                }
                case Op::And:
                case Op::Or:
                    binary(in, n, out);
                    break;
                default:
                    break;
            }
        }
        const Instr& root = code_.back();
        if (root.vector) {
            const double* v = root.buf.data();
            for (std::size_t j = 0; j < n; ++j) acc[j] += weight * v[j];
        } else {
            for (std::size_t j = 0; j < n; ++j) acc[j] += weight * root.scalar;
        }
    }

  private:
    enum class Op { Const, Row, Col, Not, And, Or };
    struct Instr {
        Op op = Op::Const;
        int lhs = -1;
        int rhs = -1;
        double scalar = 0.0;
        bool vector = false;
        std::vector<double> buf;
    };

    int compile(const SoftExpr& e) {
        Instr in;
        in.op = Op::Const;
        switch (e.kind()) {
            case SoftExpr::Kind::Const:
                in.scalar = e.value();
                break;
            case SoftExpr::Kind::Var:
                if (rowVar_ && e.name() == *rowVar_) {
                    in.op = Op::Row;
                } else if (colVar_ && e.name() == *colVar_) {
                    in.op = Op::Col;
                    in.vector = true;
                } else {
                    auto it = bound_.find(e.name());
                    if (it == bound_.end()) throw UnboundVariable(e.name());
                    in.scalar = it->second;
                }
                break;
            case SoftExpr::Kind::Not:
                in.op = Op::Not;
                in.lhs = compile(e.operand());
                in.vector = code_[in.lhs].vector;
                break;
            case SoftExpr::Kind::And:
            case SoftExpr::Kind::Or:
                in.op = e.kind() == SoftExpr::Kind::And ? Op::And : Op::Or;
                in.lhs = compile(e.lhs());
                in.rhs = compile(e.rhs());
                in.vector = code_[in.lhs].vector || code_[in.rhs].vector;
                break;
        }
        code_.push_back(std::move(in));
        return static_cast<int>(code_.size()) - 1;
    }

    double scalarOf(const Instr& in, double rowValue) const {
        switch (in.op) {
            case Op::Const:
                return in.scalar;
            case Op::Row:
                return rowValue;
            case Op::Not:
                return lukNot(code_[in.lhs].scalar);
            case Op::And:
                return lukAnd(code_[in.lhs].scalar, code_[in.rhs].scalar);
            case Op::Or:
                return lukOr(code_[in.lhs].scalar, code_[in.rhs].scalar);
            default:
                return 0.0;
        }
    }

    void binary(const Instr& in, std::size_t n, double* out) const {
        const Instr& l = code_[in.lhs];
        const Instr& r = code_[in.rhs];
        const bool isAnd = in.op == Op::And;
        if (l.vector && r.vector) {
            const double* a = l.buf.data();
            const double* b = r.buf.data();
            if (isAnd) {
                for (std::size_t j = 0; j < n; ++j) out[j] = std::max(a[j] + b[j] - 1.0, 0.0);
            } else {
                for (std::size_t j = 0; j < n; ++j) out[j] = std::min(a[j] + b[j], 1.0);
            }
            return;
        }
        const double* a = l.vector ? l.buf.data() : r.buf.data();
        const double s = l.vector ? r.scalar : l.scalar;
        if (isAnd) {
            for (std::size_t j = 0; j < n; ++j) out[j] = std::max(a[j] + s - 1.0, 0.0);
        } else {
            for (std::size_t j = 0; j < n; ++j) out[j] = std::min(a[j] + s, 1.0);
        }
    }

    const Bindings& bound_;
    const std::string* rowVar_;
    const std::string* colVar_;
    std::vector<Instr> code_;
};

}  // namespace

SolverOutput bruteForceSolve(const RuleSet& rules, double resolution) {
    if (!(resolution > 0.0 && resolution <= 0.1)) {
        throw std::invalid_argument("bruteForceSolve: resolution must lie in (0, 0.1]");
    }
    rules.validate();
    if (rules.freeVars.size() > 2) throw std::invalid_argument("bruteForceSolve: at most two free variables");

    const std::string* rowVar = rules.freeVars.size() > 0 ? &rules.freeVars[0] : nullptr;
    const std::string* colVar = rules.freeVars.size() > 1 ? &rules.freeVars[1] : nullptr;

    const auto intervals = static_cast<std::size_t>(std::ceil(1.0 / resolution - 1e-9));
    std::vector<double> grid(intervals + 1);
    for (std::size_t i = 0; i <= intervals; ++i) grid[i] = static_cast<double>(i) / static_cast<double>(intervals);

    std::vector<GridProgram> programs;
    programs.reserve(rules.rules.size());
    for (const auto& rule : rules.rules) programs.emplace_back(rule.expr, rules.bindings, rowVar, colVar);

    const std::vector<double> cols = colVar ? grid : std::vector<double>{0.0};
    const std::size_t rows = rowVar ? grid.size() : 1;
    std::vector<double> acc(cols.size());

    SolverOutput out;
    out.objective = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rows; ++i) {
        const double rowValue = rowVar ? grid[i] : 0.0;
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t r = 0; r < programs.size(); ++r) {
            programs[r].accumulate(rules.rules[r].weight, rowValue, cols, acc);
        }
        const auto it = std::max_element(acc.begin(), acc.end());
        if (*it > out.objective) {
            out.objective = *it;
            out.yKeep = rowValue;
            out.yRecls = cols[static_cast<std::size_t>(it - acc.begin())];
        }
    }
    return out;
}

Decision decide(const SolverOutput& sol, const DecisionThresholds& thresholds) {
    if (sol.yKeep <= thresholds.phiKeep) return Decision::Remove;
    if (sol.yRecls > thresholds.phiRecls) return Decision::Reclassify;
    return Decision::Keep;
}

}  // namespace glrd::psl
