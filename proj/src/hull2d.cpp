#include "sfset/hull2d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sfset/errors.hpp"

namespace sfs {

namespace {

double cross(const Point2& o, const Point2& a, const Point2& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

double segment_distance(const Point2& p, const Point2& a, const Point2& b) {
    const Point2 ab = b - a;
    const double len2 = ab.squaredNorm();
    double t = len2 > 0.0 ? (p - a).dot(ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return (p - (a + t * ab)).norm();
}

std::vector<Point2> columns(const Eigen::MatrixXd& m) {
    if (m.rows() != 2) throw DimensionUnsupported("exact hulls need d = 2");
    std::vector<Point2> out;
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.emplace_back(m(0, j), m(1, j));
    return out;
}

}  // namespace

std::vector<Point2> convex_hull_2d(std::vector<Point2> points) {
    std::sort(points.begin(), points.end(), [](const Point2& a, const Point2& b) {
        return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
    });
    points.erase(std::unique(points.begin(), points.end()), points.end());
    if (points.size() < 3) return points;
    std::vector<Point2> hull(2 * points.size());
    std::size_t n = 0;
    for (const Point2& p : points) {
        while (n >= 2 && cross(hull[n - 2], hull[n - 1], p) <= 0.0) --n;
        hull[n++] = p;
    }
    const std::size_t lower = n + 1;
    for (auto it = points.rbegin() + 1; it != points.rend(); ++it) {
        while (n >= lower && cross(hull[n - 2], hull[n - 1], *it) <= 0.0) --n;
        hull[n++] = *it;
    }
    hull.resize(n - 1);
    return hull;
}

std::vector<Point2> minkowski_sum_2d(const std::vector<Point2>& a, const std::vector<Point2>& b) {
    if (a.empty() || b.empty()) return {};
    std::vector<Point2> sums;
    sums.reserve(a.size() * b.size());
    for (const Point2& p : a)
        for (const Point2& q : b) sums.push_back(p + q);
    return convex_hull_2d(std::move(sums));
}

double point_polygon_distance(const Point2& p, const std::vector<Point2>& hull) {
    if (hull.empty()) throw EmptySet("empty polygon");
    if (hull.size() == 1) return (p - hull[0]).norm();
    if (hull.size() == 2) return segment_distance(p, hull[0], hull[1]);
    bool inside = true;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < hull.size(); ++i) {
        const Point2& a = hull[i];
        const Point2& b = hull[(i + 1) % hull.size()];
        if (cross(a, b, p) < 0.0) inside = false;
        best = std::min(best, segment_distance(p, a, b));
    }
    return inside ? 0.0 : best;
}

double hausdorff_2d(const std::vector<Point2>& a, const std::vector<Point2>& b) {
    const std::vector<Point2> ha = convex_hull_2d(a);
    const std::vector<Point2> hb = convex_hull_2d(b);
    if (ha.empty() || hb.empty()) throw EmptySet("empty point cloud");
    // Distance to a convex set is convex, so the largest value sits at a vertex.
    double out = 0.0;
    for (const Point2& p : ha) out = std::max(out, point_polygon_distance(p, hb));
    for (const Point2& p : hb) out = std::max(out, point_polygon_distance(p, ha));
    return out;
}

double hausdorff_2d(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return hausdorff_2d(columns(a), columns(b));
}

}  // namespace sfs
