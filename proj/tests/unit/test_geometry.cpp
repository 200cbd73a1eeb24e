#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "glrd/geometry.hpp"
#include "oracles.hpp"

using namespace glrd;

TEST_CASE("box construction normalizes heading and rejects bad extents") {
    CHECK(Box7DoF(0, 0, 0, 1, 1, 1, std::numbers::pi).theta() == doctest::Approx(-std::numbers::pi));
    CHECK(Box7DoF(0, 0, 0, 1, 1, 1, 1.5 * std::numbers::pi).theta() == doctest::Approx(-0.5 * std::numbers::pi));
    CHECK(Box7DoF(0, 0, 0, 1, 1, 1, -std::numbers::pi).theta() == doctest::Approx(-std::numbers::pi));
    CHECK_THROWS_AS(Box7DoF(0, 0, 0, 0, 1, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS(Box7DoF(0, 0, 0, 1, -1, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS(Box7DoF(0, 0, 0, 1, 1, NAN, 0), std::invalid_argument);
}

TEST_CASE("box containment follows the heading") {
    const Box7DoF b(0, 0, 0, 4, 1, 1, std::numbers::pi / 2);
    CHECK(b.contains(0, 1.9, 0));
    CHECK_FALSE(b.contains(1.9, 0, 0));
    CHECK_FALSE(b.contains(0, 0, 0.6));
}

TEST_CASE("footprint corners and polygon clipping") {
    const auto sq = bevCorners(Box7DoF(0, 0, 0, 2, 2, 1, 0));
    REQUIRE(sq.size() == 4);
    CHECK(polygonArea(sq) == doctest::Approx(4.0));
    // Counter-clockwise: positive signed area.
    double twice = 0.0;
    for (std::size_t i = 0; i < sq.size(); ++i) {
        const auto& p = sq[i];
        const auto& q = sq[(i + 1) % sq.size()];
        twice += p.x * q.y - q.x * p.y;
    }
    CHECK(twice > 0.0);

    CHECK(polygonArea(clipPolygon(sq, {1, 0, 0.5})) == doctest::Approx(1.0));
    CHECK(clipPolygon(sq, {1, 0, 5}).empty());
    const auto rotated = bevCorners(Box7DoF(0, 0, 0, 2, 2, 1, std::numbers::pi / 4));
    CHECK(polygonArea(intersectConvex(sq, rotated)) == doctest::Approx(8.0 * (std::sqrt(2.0) - 1.0)));
}

TEST_CASE("iou3d analytic cases") {
    const Box7DoF cube(0, 0, 0, 1, 1, 1, 0);
    CHECK(std::abs(iou3d(cube, cube) - 1.0) < 1e-9);
    CHECK(iou3d(cube, Box7DoF(10, 0, 0, 1, 1, 1, 0)) == 0.0);
    CHECK(std::abs(iou3d(cube, Box7DoF(0.5, 0, 0, 1, 1, 1, 0)) - 1.0 / 3.0) < 1e-9);
    CHECK(std::abs(iou3d(cube, Box7DoF(0, 0, 0.5, 1, 1, 1, 0)) - 1.0 / 3.0) < 1e-9);
    // Touching faces share no volume.
    CHECK(iou3d(cube, Box7DoF(1, 0, 0, 1, 1, 1, 0)) == doctest::Approx(0.0));
    // A quarter turn of a cube is the same cube.
    CHECK(std::abs(iou3d(cube, Box7DoF(0, 0, 0, 1, 1, 1, std::numbers::pi / 2)) - 1.0) < 1e-9);
    // Nested boxes: inner volume over outer volume.
    CHECK(iou3d(Box7DoF(0, 0, 0, 2, 2, 2, 0.3), Box7DoF(0, 0, 0, 1, 1, 1, 1.1)) == doctest::Approx(1.0 / 8.0));
}

TEST_CASE("iou3d symmetry and rigid-motion invariance") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> shift(-5.0, 5.0);
    std::uniform_real_distribution<double> turn(-std::numbers::pi, std::numbers::pi);
    for (int i = 0; i < 300; ++i) {
        const Box7DoF a = testing::randomBox(rng);
        const Box7DoF b = testing::randomBox(rng);
        const double v = iou3d(a, b);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        CHECK(std::abs(v - iou3d(b, a)) < 1e-12);

        const double dx = shift(rng), dy = shift(rng), dz = shift(rng);
        const Box7DoF ta(a.cx() + dx, a.cy() + dy, a.cz() + dz, a.l(), a.w(), a.h(), a.theta());
        const Box7DoF tb(b.cx() + dx, b.cy() + dy, b.cz() + dz, b.l(), b.w(), b.h(), b.theta());
        CHECK(std::abs(v - iou3d(ta, tb)) < 1e-9);

        // Same heading change for both boxes, centers rotated with them.
        const double t = turn(rng);
        const double c = std::cos(t), s = std::sin(t);
        auto rot = [&](const Box7DoF& x) {
            return Box7DoF(c * x.cx() - s * x.cy(), s * x.cx() + c * x.cy(), x.cz(), x.l(), x.w(), x.h(),
                           x.theta() + t);
        };
        CHECK(std::abs(v - iou3d(rot(a), rot(b))) < 1e-9);
    }
}

TEST_CASE("iou3d agrees with sampling") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 20; ++i) {
        const Box7DoF a = testing::randomBox(rng, 0.6);
        const Box7DoF b = testing::randomBox(rng, 0.6);
        CHECK(std::abs(iou3d(a, b) - testing::monteCarloIou(a, b, 47, 1000 + i)) <= 5e-3);
    }
}

TEST_CASE("softNms examples") {
    const Box7DoF cube(0, 0, 0, 1, 1, 1, 0);
    CHECK(softNms(std::vector<ScoredBox>{}).empty());

    const std::vector<ScoredBox> one{{cube, 0.7, 0}};
    const auto single = softNms(one);
    REQUIRE(single.size() == 1);
    CHECK(single[0].score == 0.7);

    const std::vector<ScoredBox> dup{{cube, 1.0, 0}, {cube, 1.0, 0}};
    const auto decayed = softNms(dup, {0.5, 0.01});
    REQUIRE(decayed.size() == 2);
    CHECK(decayed[0].score == 1.0);
    CHECK(std::abs(decayed[1].score - std::exp(-2.0)) < 1e-9);

    const std::vector<ScoredBox> classes{{cube, 1.0, 0}, {cube, 0.9, 1}};
    const auto kept = softNms(classes);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].score == 1.0);
    CHECK(kept[1].score == 0.9);

    // Below the floor after decay: dropped.
    const std::vector<ScoredBox> weak{{cube, 1.0, 0}, {cube, 0.05, 0}};
    CHECK(softNms(weak, {0.5, 0.01}).size() == 1);
    CHECK_THROWS_AS(softNms(weak, {0.0, 0.01}), std::invalid_argument);
}

TEST_CASE("softNms never raises scores and keeps the top box") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> score(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<ScoredBox> boxes;
        for (int i = 0; i < 12; ++i) boxes.push_back({testing::randomBox(rng, 1.5), score(rng), i % 3});
        const auto out = softNms(boxes);
        REQUIRE_FALSE(out.empty());
        const auto top = std::max_element(boxes.begin(), boxes.end(),
                                          [](const auto& a, const auto& b) { return a.score < b.score; });
        CHECK(out[0].score == top->score);
        for (std::size_t i = 1; i < out.size(); ++i) CHECK(out[i - 1].score >= out[i].score);
        for (const auto& o : out) {
            const bool fromInput = std::any_of(boxes.begin(), boxes.end(), [&](const ScoredBox& b) {
                return b.box == o.box && b.classId == o.classId && o.score <= b.score;
            });
            CHECK(fromInput);
        }
    }
}
