#include "smad/geometry.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include "smad/numfmt.hpp"

namespace smad {

Landmarks5d base_template() {
  Eigen::Matrix<double, 2, 5> p;
  p << 38.2, 73.5, 56.0, 41.5, 70.7,  //
      41.7, 41.5, 61.7, 82.4, 82.2;
  return Landmarks5d(p);
}

Landmarks5d scale_template(double s, ImageSize output_size) {
  if (!(s > 0.0) || !std::isfinite(s)) throw DomainError("scale_template: scale factor must be positive");
  Eigen::Matrix<double, 2, 5> p = base_template().points;
  p.row(0) *= output_size.width / 112.0;
  p.row(1) *= output_size.height / 112.0;
  const Eigen::Vector2d center(output_size.width / 2.0, output_size.height / 2.0);
  p = ((p.colwise() - center) / s).colwise() + center;
  return Landmarks5d(p);
}

std::vector<AlignmentSetting> canonical_settings(ImageSize output_size) {
  struct Row {
    char id;
    double scale;
    double ratio;
  };
  static constexpr std::array<Row, 11> kTable{{{'a', 1.65, 0.15},
                                                {'b', 1.40, 0.21},
                                                {'c', 1.10, 0.34},
                                                {'d', 1.00, 0.42},
                                                {'e', 0.90, 0.51},
                                                {'f', 0.85, 0.56},
                                                {'g', 0.80, 0.62},
                                                {'h', 0.75, 0.70},
                                                {'i', 0.70, 0.77},
                                                {'j', 0.65, 0.86},
                                                {'k', 0.60, 0.94}}};
  std::vector<AlignmentSetting> out;
  out.reserve(kTable.size());
  for (const auto& r : kTable)
    out.push_back({r.id, r.scale, scale_template(r.scale, output_size), output_size, r.ratio});
  return out;
}

AlignmentSetting setting_by_id(char id, ImageSize output_size) {
  for (auto& s : canonical_settings(output_size))
    if (s.id == id) return s;
  throw DomainError(std::string("unknown alignment setting '") + id + "'");
}

nlohmann::json to_json(const AlignmentSetting& s) {
  nlohmann::json pts = nlohmann::json::array();
  for (int i = 0; i < 5; ++i) pts.push_back({s.target5.points(0, i), s.target5.points(1, i)});
  return {{"id", std::string(1, s.id)},
          {"scale_factor", s.scale_factor},
          {"nominal_ratio", s.nominal_ratio},
          {"output_size", {s.output_size.height, s.output_size.width}},
          {"target_points", pts}};
}

nlohmann::json settings_to_json(const std::vector<AlignmentSetting>& settings) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : settings) arr.push_back(to_json(s));
  return arr;
}

ImageU8 warp_similarity(const ImageU8& image, const SimilarityTransformd& transform, ImageSize output_size,
                        std::uint8_t fill) {
  if (image.empty()) throw DomainError("warp: empty image");
  ImageU8 out(output_size.height, output_size.width, image.channels(), fill);
  const SimilarityTransformd inv = transform.inverse();
  const Eigen::Matrix2d a = inv.linear();
  for (int y = 0; y < output_size.height; ++y) {
    for (int x = 0; x < output_size.width; ++x) {
      const Eigen::Vector2d src = a * Eigen::Vector2d(x, y) + inv.translation;
      if (!inside(image, src.x(), src.y(), 1e-6)) continue;
      for (int c = 0; c < image.channels(); ++c)
        out(y, x, c) = saturate_u8(sample_bilinear(image, src.x(), src.y(), c));
    }
  }
  return out;
}

AlignedImage warp_to_setting(const ImageU8& image, const Landmarks5d& lm5, const AlignmentSetting& setting,
                             std::uint8_t fill) {
  if (image.empty()) throw DomainError("warp_to_setting: empty image");
  const SimilarityTransformd t = fit_similarity(lm5, setting.target5);
  return {warp_similarity(image, t, setting.output_size, fill), t};
}

namespace {

double cross(const Eigen::Vector2d& o, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

}  // namespace

std::vector<Eigen::Vector2d> convex_hull(const Points2<double>& points) {
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(points.cols());
  for (Eigen::Index i = 0; i < points.cols(); ++i) pts.emplace_back(points.col(i));
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;

  // Andrew's monotone chain; collinear points are dropped.
  std::vector<Eigen::Vector2d> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

double polygon_area(const std::vector<Eigen::Vector2d>& polygon) {
  const std::size_t n = polygon.size();
  if (n < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = polygon[i];
    const auto& q = polygon[(i + 1) % n];
    twice += p.x() * q.y() - q.x() * p.y();
  }
  return 0.5 * twice;
}

std::vector<Eigen::Vector2d> clip_to_rect(const std::vector<Eigen::Vector2d>& polygon, double width, double height) {
  // Sutherland-Hodgman against the four half-planes a*x + b*y + c >= 0.
  const std::array<Eigen::Vector3d, 4> planes{Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(-1, 0, width),
                                              Eigen::Vector3d(0, 1, 0), Eigen::Vector3d(0, -1, height)};
  std::vector<Eigen::Vector2d> poly = polygon;
  for (const auto& pl : planes) {
    if (poly.empty()) break;
    std::vector<Eigen::Vector2d> next;
    const auto eval = [&](const Eigen::Vector2d& p) { return pl.x() * p.x() + pl.y() * p.y() + pl.z(); };
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const auto& cur = poly[i];
      const auto& nxt = poly[(i + 1) % poly.size()];
      const double dc = eval(cur), dn = eval(nxt);
      if (dc >= 0) next.push_back(cur);
      if ((dc >= 0) != (dn >= 0)) next.push_back(cur + (nxt - cur) * (dc / (dc - dn)));
    }
    poly = std::move(next);
  }
  return poly;
}

double occupancy_ratio(const Points2<double>& points, ImageSize image_size) {
  const double area = image_size.height * static_cast<double>(image_size.width);
  if (area <= 0) return 0.0;
  const auto hull = convex_hull(points);
  if (hull.size() < 3) return 0.0;
  const auto clipped = clip_to_rect(hull, image_size.width, image_size.height);
  return std::clamp(std::abs(polygon_area(clipped)) / area, 0.0, 1.0);
}

LandmarkTable read_landmarks_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open landmark file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line.rfind("image_path,point_index,x,y", 0) != 0)
    throw IntegrityError("landmark file lacks header: " + path.string());

  std::map<std::string, std::vector<std::pair<int, Eigen::Vector2d>>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    // image paths may contain commas, so split from the right.
    const auto c3 = line.rfind(',');
    const auto c2 = c3 == std::string::npos ? c3 : line.rfind(',', c3 - 1);
    const auto c1 = c2 == std::string::npos ? c2 : line.rfind(',', c2 - 1);
    if (c1 == std::string::npos) throw IntegrityError("malformed landmark row in " + path.string() + ": " + line);
    const int idx = static_cast<int>(parse_double(std::string_view(line).substr(c1 + 1, c2 - c1 - 1)));
    const double x = parse_double(std::string_view(line).substr(c2 + 1, c3 - c2 - 1));
    const double y = parse_double(std::string_view(line).substr(c3 + 1));
    rows[line.substr(0, c1)].emplace_back(idx, Eigen::Vector2d(x, y));
  }

  LandmarkTable table;
  for (auto& [name, pts] : rows) {
    const int n = static_cast<int>(pts.size());
    if (n != 5 && n != 68)
      throw IntegrityError("landmark file " + path.string() + ": image " + name + " has " + std::to_string(n) +
                           " points (expected 5 or 68)");
    Points2<double> m(2, n);
    std::vector<bool> seen(n, false);
    for (const auto& [idx, p] : pts) {
      if (idx < 0 || idx >= n || seen[idx])
        throw IntegrityError("landmark file " + path.string() + ": bad point index for " + name);
      seen[idx] = true;
      m.col(idx) = p;
    }
    if (!m.allFinite()) throw IntegrityError("non-finite landmark for " + name);
    table.emplace(name, std::move(m));
  }
  return table;
}

void write_landmarks_csv(const std::filesystem::path& path, const LandmarkTable& table) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "image_path,point_index,x,y\n";
  for (const auto& [name, pts] : table)
    for (Eigen::Index i = 0; i < pts.cols(); ++i)
      out << name << ',' << i << ',' << format_double(pts(0, i)) << ',' << format_double(pts(1, i)) << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

Points2<double> read_sample_landmarks(const std::filesystem::path& root, const std::string& csv,
                                      const std::string& image, int expected) {
  if (csv.empty()) throw IntegrityError("sample " + image + " has no landmark file");
  const LandmarkTable table = read_landmarks_csv(root / csv);
  auto it = table.find(image);
  if (it == table.end()) throw IntegrityError("landmark file " + csv + " has no entry for " + image);
  if (it->second.cols() != expected)
    throw IntegrityError("landmark file " + csv + ": expected " + std::to_string(expected) + " points");
  return it->second;
}

Landmarks5d to_landmarks5(const Points2<double>& pts) {
  if (pts.cols() != 5) throw IntegrityError("expected 5 landmarks, got " + std::to_string(pts.cols()));
  return Landmarks5d(Eigen::Matrix<double, 2, 5>(pts));
}

Landmarks68d to_landmarks68(const Points2<double>& pts) {
  if (pts.cols() != 68) throw IntegrityError("expected 68 landmarks, got " + std::to_string(pts.cols()));
  return Landmarks68d(Eigen::Matrix<double, 2, 68>(pts));
}

}  // namespace smad
