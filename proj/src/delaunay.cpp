#include "smad/delaunay.hpp"

#include <algorithm>
#include <map>

namespace smad {
namespace {

constexpr double kIncircleTolerance = 1e-12;

double orient(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

}  // namespace

double incircle(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
                const Eigen::Vector2d& d) {
  const Eigen::Vector2d ad = a - d, bd = b - d, cd = c - d;
  const double alift = ad.squaredNorm(), blift = bd.squaredNorm(), clift = cd.squaredNorm();
  return alift * (bd.x() * cd.y() - cd.x() * bd.y()) + blift * (cd.x() * ad.y() - ad.x() * cd.y()) +
         clift * (ad.x() * bd.y() - bd.x() * ad.y());
}

double incircle_magnitude(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
                          const Eigen::Vector2d& d) {
  const Eigen::Vector2d ad = a - d, bd = b - d, cd = c - d;
  const double alift = ad.squaredNorm(), blift = bd.squaredNorm(), clift = cd.squaredNorm();
  return alift * (std::abs(bd.x() * cd.y()) + std::abs(cd.x() * bd.y())) +
         blift * (std::abs(cd.x() * ad.y()) + std::abs(ad.x() * cd.y())) +
         clift * (std::abs(ad.x() * bd.y()) + std::abs(bd.x() * ad.y()));
}

std::vector<Triangle> triangulate(const Points2<double>& points) {
  const int n = static_cast<int>(points.cols());
  if (n < 3) throw DegenerateInputError("triangulate: need at least 3 points");
  if (!points.allFinite()) throw DomainError("triangulate: non-finite point");

  const Eigen::Vector2d lo = points.rowwise().minCoeff(), hi = points.rowwise().maxCoeff();
  const double extent = std::max((hi - lo).maxCoeff(), 0.0);
  if (!(extent > 0)) throw DegenerateInputError("triangulate: all points coincide");

  // Reject all-collinear input.
  {
    const Eigen::Vector2d p0 = points.col(0);
    int far = 0;
    for (int i = 1; i < n; ++i)
      if ((points.col(i) - p0).squaredNorm() > (points.col(far) - p0).squaredNorm()) far = i;
    bool collinear = true;
    for (int i = 0; i < n && collinear; ++i)
      if (std::abs(orient(p0, points.col(far), points.col(i))) > 1e-12 * extent * extent) collinear = false;
    if (collinear) throw DegenerateInputError("triangulate: all points are collinear");
  }

  // Working vertex list: inputs followed by a large enclosing triangle.
  std::vector<Eigen::Vector2d> v(n + 3);
  for (int i = 0; i < n; ++i) v[i] = points.col(i);
  const Eigen::Vector2d mid = 0.5 * (lo + hi);
  const double big = 1e3 * extent;
  v[n] = mid + Eigen::Vector2d(-big, -big);
  v[n + 1] = mid + Eigen::Vector2d(big, -big);
  v[n + 2] = mid + Eigen::Vector2d(0.0, big);

  std::vector<Triangle> tris{{n, n + 1, n + 2}};
  if (orient(v[n], v[n + 1], v[n + 2]) < 0) std::swap(tris[0][1], tris[0][2]);

  std::vector<Eigen::Vector2d> inserted;
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d& p = v[i];
    if (std::find(inserted.begin(), inserted.end(), p) != inserted.end()) continue;
    inserted.push_back(p);

    std::vector<Triangle> keep, bad;
    keep.reserve(tris.size());
    for (const auto& t : tris) {
      const double det = incircle(v[t[0]], v[t[1]], v[t[2]], p);
      if (det > kIncircleTolerance * incircle_magnitude(v[t[0]], v[t[1]], v[t[2]], p))
        bad.push_back(t);
      else
        keep.push_back(t);
    }
    if (bad.empty()) continue;

    // Cavity boundary: edges of bad triangles that are not shared between two of them.
    std::map<std::pair<int, int>, int> edge_count;
    for (const auto& t : bad)
      for (int e = 0; e < 3; ++e) {
        const int a = t[e], b = t[(e + 1) % 3];
        ++edge_count[{std::min(a, b), std::max(a, b)}];
      }
    for (const auto& t : bad)
      for (int e = 0; e < 3; ++e) {
        const int a = t[e], b = t[(e + 1) % 3];
        if (edge_count[{std::min(a, b), std::max(a, b)}] != 1) continue;
        Triangle nt{a, b, i};
        const double o = orient(v[a], v[b], p);
        if (o == 0.0) continue;
        if (o < 0) std::swap(nt[0], nt[1]);
        keep.push_back(nt);
      }
    tris = std::move(keep);
  }

  std::vector<Triangle> out;
  for (const auto& t : tris)
    if (t[0] < n && t[1] < n && t[2] < n) out.push_back(t);
  return out;
}

Points2<double> frame_points(ImageSize size) {
  const double w = size.width - 1.0, h = size.height - 1.0;
  Points2<double> f(2, 8);
  f << 0, w, 0, w, 0.5 * w, 0.5 * w, 0, w,  //
      0, 0, h, h, 0, h, 0.5 * h, 0.5 * h;
  return f;
}

}  // namespace smad
