#include "glrd/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace glrd {

double normalizeAngle(double theta) {
    constexpr double kTwoPi = 2.0 * std::numbers::pi;
    double t = std::fmod(theta + std::numbers::pi, kTwoPi);
    if (t < 0.0) t += kTwoPi;
    t -= std::numbers::pi;
    // fmod can land exactly on +pi after the shift back.
    if (t >= std::numbers::pi) t -= kTwoPi;
    return t;
}

Box7DoF::Box7DoF(double cx, double cy, double cz, double l, double w, double h, double theta)
    : cx_(cx), cy_(cy), cz_(cz), l_(l), w_(w), h_(h), theta_(normalizeAngle(theta)) {
    if (!(l > 0.0 && w > 0.0 && h > 0.0)) {
        throw std::invalid_argument("box extents must be positive");
    }
    if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(cz) || !std::isfinite(theta)) {
        throw std::invalid_argument("box parameters must be finite");
    }
}

bool Box7DoF::contains(double x, double y, double z) const {
    if (z < zMin() || z > zMax()) return false;
    const double dx = x - cx_;
    const double dy = y - cy_;
    const double c = std::cos(theta_);
    const double s = std::sin(theta_);
    const double u = c * dx + s * dy;
    const double v = -s * dx + c * dy;
    return std::abs(u) <= 0.5 * l_ && std::abs(v) <= 0.5 * w_;
}

Box7DoF Box7DoF::scaled(double factor) const {
    return {cx_, cy_, cz_, l_ * factor, w_ * factor, h_ * factor, theta_};
}

Polygon2 bevCorners(const Box7DoF& box) {
    const double c = std::cos(box.theta());
    const double s = std::sin(box.theta());
    const double hl = 0.5 * box.l();
    const double hw = 0.5 * box.w();
    constexpr double kSigns[4][2] = {{1, 1}, {-1, 1}, {-1, -1}, {1, -1}};
    Polygon2 out;
    out.reserve(4);
    for (const auto& sg : kSigns) {
        const double u = sg[0] * hl;
        const double v = sg[1] * hw;
        out.push_back({box.cx() + c * u - s * v, box.cy() + s * u + c * v});
    }
    return out;
}

Polygon2 clipPolygon(const Polygon2& subject, const HalfPlane& keep) {
    Polygon2 out;
    if (subject.empty()) return out;
    out.reserve(subject.size() + 1);
    auto side = [&](const Point2& p) { return keep.a * p.x + keep.b * p.y - keep.c; };
    for (std::size_t i = 0; i < subject.size(); ++i) {
        const Point2& cur = subject[i];
        const Point2& nxt = subject[(i + 1) % subject.size()];
        const double sc = side(cur);
        const double sn = side(nxt);
        if (sc >= 0.0) out.push_back(cur);
        if ((sc >= 0.0) != (sn >= 0.0)) {
            const double t = sc / (sc - sn);
            out.push_back({cur.x + t * (nxt.x - cur.x), cur.y + t * (nxt.y - cur.y)});
        }
    }
    return out;
}

Polygon2 intersectConvex(const Polygon2& subject, const Polygon2& clip) {
    Polygon2 result = subject;
    for (std::size_t i = 0; i < clip.size() && !result.empty(); ++i) {
        const Point2& p = clip[i];
        const Point2& q = clip[(i + 1) % clip.size()];
        // Left of the directed edge p->q is inside for a CCW polygon.
        const HalfPlane hp{-(q.y - p.y), q.x - p.x, -(q.y - p.y) * p.x + (q.x - p.x) * p.y};
        result = clipPolygon(result, hp);
    }
    return result;
}

double polygonArea(const Polygon2& poly) {
    if (poly.size() < 3) return 0.0;
    double twice = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Point2& p = poly[i];
        const Point2& q = poly[(i + 1) % poly.size()];
        twice += p.x * q.y - q.x * p.y;
    }
    return 0.5 * std::abs(twice);
}

double iou3d(const Box7DoF& a, const Box7DoF& b) {
    const double zOverlap = std::min(a.zMax(), b.zMax()) - std::max(a.zMin(), b.zMin());
    if (zOverlap <= 0.0) return 0.0;

    // Cheap reject on circumscribed circles.
    const double ra = 0.5 * std::hypot(a.l(), a.w());
    const double rb = 0.5 * std::hypot(b.l(), b.w());
    if (std::hypot(a.cx() - b.cx(), a.cy() - b.cy()) >= ra + rb) return 0.0;

    const double area = polygonArea(intersectConvex(bevCorners(a), bevCorners(b)));
    const double inter = area * zOverlap;
    if (inter <= 0.0) return 0.0;
    const double uni = a.volume() + b.volume() - inter;
    return std::clamp(inter / uni, 0.0, 1.0);
}

std::vector<ScoredBox> softNms(std::span<const ScoredBox> boxes, const SoftNmsParams& params) {
    if (!(params.sigma > 0.0)) throw std::invalid_argument("softNms: sigma must be positive");
    std::vector<ScoredBox> pending(boxes.begin(), boxes.end());
    std::vector<ScoredBox> kept;
    kept.reserve(pending.size());

    while (!pending.empty()) {
        // First max wins, so equal scores keep input order.
        auto best = std::max_element(pending.begin(), pending.end(),
                                     [](const ScoredBox& x, const ScoredBox& y) { return x.score < y.score; });
        ScoredBox chosen = *best;
        pending.erase(best);
        if (chosen.score < params.scoreFloor) continue;

        for (auto& other : pending) {
            if (other.classId != chosen.classId) continue;
            const double ov = iou3d(chosen.box, other.box);
            other.score *= std::exp(-(ov * ov) / params.sigma);
        }
        std::erase_if(pending, [&](const ScoredBox& s) { return s.score < params.scoreFloor; });
        kept.push_back(chosen);
    }
    std::stable_sort(kept.begin(), kept.end(),
                     [](const ScoredBox& x, const ScoredBox& y) { return x.score > y.score; });
    return kept;
}

}  // namespace glrd
