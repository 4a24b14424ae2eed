#pragma once

#include <vector>

#include <Eigen/Core>

namespace sfs {

using Point2 = Eigen::Vector2d;

/// Vertices of the convex hull in counter-clockwise order, collinear points dropped.
std::vector<Point2> convex_hull_2d(std::vector<Point2> points);

/// Hull of {a + b}: the Minkowski sum of two convex polygons.
std::vector<Point2> minkowski_sum_2d(const std::vector<Point2>& a, const std::vector<Point2>& b);

/// Euclidean distance from p to a convex polygon (0 inside).
double point_polygon_distance(const Point2& p, const std::vector<Point2>& hull);

/// Hausdorff distance between the convex hulls of two point clouds.
double hausdorff_2d(const std::vector<Point2>& a, const std::vector<Point2>& b);

/// Same for d x n matrices of column points; throws DimensionUnsupported unless d = 2.
double hausdorff_2d(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

}  // namespace sfs
