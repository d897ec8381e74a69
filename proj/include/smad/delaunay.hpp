#pragma once

#include <array>
#include <vector>

#include "smad/geometry.hpp"

namespace smad {

/// Vertex indices of one triangle, counter-clockwise (positive signed area).
using Triangle = std::array<int, 3>;

/// Positive when d lies strictly inside the circumcircle of the CCW triangle abc.
double incircle(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
                const Eigen::Vector2d& d);

/// Scale of the incircle determinant's terms, for relative tolerances.
double incircle_magnitude(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
                          const Eigen::Vector2d& d);

/// Delaunay triangulation (Bowyer-Watson). Exactly repeated points are ignored.
/// Throws DegenerateInputError for fewer than 3 distinct or all-collinear points.
std::vector<Triangle> triangulate(const Points2<double>& points);

/// The four corners and four edge midpoints of a width x height pixel grid, in
/// pixel-centre coordinates (corners at 0 and width-1 / height-1).
Points2<double> frame_points(ImageSize size);

}  // namespace smad
