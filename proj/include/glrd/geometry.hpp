#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace glrd {

/// Oriented 3D box: center, extents along the local axes and heading about +z.
///
/// The heading is normalized to [-pi, pi) on construction; extents must be
/// strictly positive.
class Box7DoF {
  public:
    Box7DoF(double cx, double cy, double cz, double l, double w, double h, double theta);

    double cx() const { return cx_; }
    double cy() const { return cy_; }
    double cz() const { return cz_; }
    double l() const { return l_; }
    double w() const { return w_; }
    double h() const { return h_; }
    double theta() const { return theta_; }

    double volume() const { return l_ * w_ * h_; }
    double zMin() const { return cz_ - 0.5 * h_; }
    double zMax() const { return cz_ + 0.5 * h_; }

    /// True when the point lies inside the closed box.
    bool contains(double x, double y, double z) const;

    /// Same box with every extent multiplied by `factor`.
    Box7DoF scaled(double factor) const;

    bool operator==(const Box7DoF&) const = default;

  private:
    double cx_, cy_, cz_, l_, w_, h_, theta_;
};

/// Wraps an angle into [-pi, pi).
double normalizeAngle(double theta);

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

using Polygon2 = std::vector<Point2>;

/// Half-plane a*x + b*y >= c.
struct HalfPlane {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
};

/// Counter-clockwise corners of the box footprint in the ground plane.
Polygon2 bevCorners(const Box7DoF& box);

/// Sutherland-Hodgman clip of a convex polygon against one half-plane.
Polygon2 clipPolygon(const Polygon2& subject, const HalfPlane& keep);

/// Intersection of two convex counter-clockwise polygons.
Polygon2 intersectConvex(const Polygon2& subject, const Polygon2& clip);

/// Shoelace area (absolute value).
double polygonArea(const Polygon2& poly);

/// Exact 3D IoU of two oriented boxes: BEV overlap area times z overlap,
/// over the union volume.
double iou3d(const Box7DoF& a, const Box7DoF& b);

struct ScoredBox {
    Box7DoF box;
    double score = 0.0;
    int classId = 0;
};

struct SoftNmsParams {
    double sigma = 0.5;
    double scoreFloor = 0.01;
};

/// Gaussian Soft-NMS, applied within each class. Output is sorted by final
/// score, descending; boxes decayed below the floor are dropped.
std::vector<ScoredBox> softNms(std::span<const ScoredBox> boxes, const SoftNmsParams& params = {});

}  // namespace glrd
