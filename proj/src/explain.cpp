#include "smad/explain.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "smad/numfmt.hpp"
#include "smad/png.hpp"

namespace smad {

Eigen::MatrixXd upsample_bilinear(const Eigen::MatrixXd& map, int height, int width) {
  const auto h = static_cast<int>(map.rows()), w = static_cast<int>(map.cols());
  if (h < 1 || w < 1) throw ContractError("upsample_bilinear: empty map");
  Eigen::MatrixXd out(height, width);
  for (int y = 0; y < height; ++y) {
    const double sy = std::clamp((y + 0.5) * h / height - 0.5, 0.0, h - 1.0);
    const int y0 = static_cast<int>(sy), y1 = std::min(y0 + 1, h - 1);
    const double fy = sy - y0;
    for (int x = 0; x < width; ++x) {
      const double sx = std::clamp((x + 0.5) * w / width - 0.5, 0.0, w - 1.0);
      const int x0 = static_cast<int>(sx), x1 = std::min(x0 + 1, w - 1);
      const double fx = sx - x0;
      out(y, x) = (1 - fy) * ((1 - fx) * map(y0, x0) + fx * map(y0, x1)) +
                  fy * ((1 - fx) * map(y1, x0) + fx * map(y1, x1));
    }
  }
  return out;
}

Heatmap normalize_heatmap(const Eigen::MatrixXd& raw) {
  Heatmap h;
  h.raw_min = raw.minCoeff();
  h.raw_max = raw.maxCoeff();
  if (!raw.allFinite()) throw NumericError("heatmap contains non-finite values");
  h.values = h.raw_max > 0 ? Eigen::MatrixXd((raw / h.raw_max).cwiseMax(0.0)) : Eigen::MatrixXd::Zero(raw.rows(), raw.cols());
  return h;
}

MaskPair face_masks(const Points2<double>& points, ImageSize size) {
  const auto hull = convex_hull(points);
  MaskPair m;
  m.foreground.setConstant(size.height, size.width, false);
  if (hull.size() >= 3) {
    for (int y = 0; y < size.height; ++y) {
      for (int x = 0; x < size.width; ++x) {
        const Eigen::Vector2d p(x + 0.5, y + 0.5);
        bool in = true;
        for (std::size_t i = 0; i < hull.size() && in; ++i) {
          const auto& a = hull[i];
          const auto& b = hull[(i + 1) % hull.size()];
          const double cross = (b.x() - a.x()) * (p.y() - a.y()) - (b.y() - a.y()) * (p.x() - a.x());
          in = cross >= 0;
        }
        m.foreground(y, x) = in;
      }
    }
  }
  m.background = m.foreground.unaryExpr([](bool v) { return !v; });
  return m;
}

Eigen::MatrixXd mean_heatmap(const std::vector<Heatmap>& heatmaps) {
  if (heatmaps.empty()) throw DomainError("no heatmaps to average");
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(heatmaps[0].values.rows(), heatmaps[0].values.cols());
  for (const auto& h : heatmaps) {
    if (h.values.rows() != sum.rows() || h.values.cols() != sum.cols())
      throw ContractError("heatmaps differ in size");
    sum += h.values;
  }
  return sum / static_cast<double>(heatmaps.size());
}

double agir(const Eigen::MatrixXd& mean_map, const MaskPair& masks) {
  if (mean_map.rows() != masks.foreground.rows() || mean_map.cols() != masks.foreground.cols() ||
      masks.background.rows() != mean_map.rows() || masks.background.cols() != mean_map.cols())
    throw ContractError("agir: heatmap and mask dimensions differ");
  double fg_sum = 0, bg_sum = 0;
  long fg_n = 0, bg_n = 0;
  for (Eigen::Index y = 0; y < mean_map.rows(); ++y) {
    for (Eigen::Index x = 0; x < mean_map.cols(); ++x) {
      const double v = mean_map(y, x);
      if (!(v > kAgirNonZero)) continue;
      if (masks.foreground(y, x)) {
        fg_sum += v;
        ++fg_n;
      } else if (masks.background(y, x)) {
        bg_sum += v;
        ++bg_n;
      }
    }
  }
  const double fg = fg_n ? fg_sum / static_cast<double>(fg_n) : 0.0;
  const double bg = bg_n ? bg_sum / static_cast<double>(bg_n) : 0.0;
  if (bg == 0.0) return std::numeric_limits<double>::infinity();
  return fg / bg;
}

double agir(const std::vector<Heatmap>& heatmaps, const MaskPair& masks) { return agir(mean_heatmap(heatmaps), masks); }

ImageU8 heatmap_to_image(const Eigen::MatrixXd& values) {
  ImageU8 img(static_cast<int>(values.rows()), static_cast<int>(values.cols()), 1);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) img(y, x) = saturate_u8(255.0 * std::clamp(values(y, x), 0.0, 1.0));
  return img;
}

void write_heatmap(const std::filesystem::path& png_path, const Heatmap& map, const nlohmann::json& sidecar) {
  write_png(png_path, heatmap_to_image(map.values));
  nlohmann::json j = sidecar;
  j["raw_min"] = map.raw_min;
  j["raw_max"] = map.raw_max;
  auto json_path = png_path;
  json_path.replace_extension(".json");
  std::ofstream out(json_path, std::ios::binary);
  if (!out) throw IoError("cannot write " + json_path.string());
  out << j.dump(2) << "\n";
}

std::string serialize_agir_csv(const std::vector<AgirRow>& rows) {
  std::string out = "variant,alignment,sample_class,agir\n";
  for (const auto& r : rows) out += r.variant + ',' + r.alignment + ',' + r.sample_class + ',' + format_double(r.agir) + '\n';
  return out;
}

}  // namespace smad
