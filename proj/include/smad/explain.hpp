#pragma once

#include <concepts>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "smad/geometry.hpp"
#include "smad/image.hpp"
#include "smad/model.hpp"

namespace smad {

/// H x W map in [0, 1]; max is 1 unless the raw map is identically zero.
struct Heatmap {
  Eigen::MatrixXd values;
  double raw_min = 0;
  double raw_max = 0;
};

/// ReLU(sum_k w_k A_k) on the h x w grid, with w_k the spatial mean of the gradient.
template <typename Scalar>
Eigen::MatrixXd grad_cam_raw(const SpatialTrace<Scalar>& trace) {
  const int h = trace.extent.height, w = trace.extent.width;
  if (trace.activation.cols() != static_cast<Eigen::Index>(h) * w || trace.gradient.rows() != trace.activation.rows() ||
      trace.gradient.cols() != trace.activation.cols())
    throw ContractError("grad_cam: activation/gradient shapes disagree");
  const Eigen::VectorXd weights = trace.gradient.template cast<double>().rowwise().mean();
  const Eigen::RowVectorXd cam = weights.transpose() * trace.activation.template cast<double>();
  Eigen::MatrixXd out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out(y, x) = std::max(0.0, cam(y * w + x));
  return out;
}

/// Bilinear resize with half-pixel centres and clamped borders.
Eigen::MatrixXd upsample_bilinear(const Eigen::MatrixXd& map, int height, int width);

/// Divide by the maximum (zero maps stay zero), keeping the map proportional to the raw values.
Heatmap normalize_heatmap(const Eigen::MatrixXd& raw);

/// Average of the per-branch raw maps after resizing, normalized.
template <typename Scalar>
Heatmap grad_cam_from_traces(const std::vector<SpatialTrace<Scalar>>& traces, ImageSize size) {
  if (traces.empty()) throw CapabilityError("model exposes no spatial feature stage");
  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(size.height, size.width);
  for (const auto& t : traces) sum += upsample_bilinear(grad_cam_raw(t), size.height, size.width);
  return normalize_heatmap(sum / static_cast<double>(traces.size()));
}

/// Anything that reports last-stage activations and logit gradients for one image.
template <typename M>
concept SpatialModel = requires(const M& m, const ImageU8& img) {
  { m.spatial_traces(img, 1.0f) };
};

/// Grad-CAM of the detection logit in the ground-truth direction (+logit for
/// bona fide targets, -logit for morphs).
template <typename M>
Heatmap grad_cam(const M& model, const ImageU8& image, int target) {
  if constexpr (SpatialModel<M>) {
    if (target != kBonaFideTarget && target != kMorphTarget) throw ContractError("grad_cam: target must be 0 or 1");
    const auto traces = model.spatial_traces(image, target == kBonaFideTarget ? 1.0f : -1.0f);
    return grad_cam_from_traces(traces, {image.height(), image.width()});
  } else {
    throw CapabilityError("model exposes no spatial feature stage");
  }
}

struct MaskPair {
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> foreground;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> background;
};

/// Pixel (x, y) is foreground when its centre (x + 0.5, y + 0.5) lies in the
/// convex hull of the points (the occupancy_ratio frame).
MaskPair face_masks(const Points2<double>& points, ImageSize size);
inline MaskPair face_masks(const Landmarks68d& lm68, ImageSize size) { return face_masks(lm68.points, size); }

inline constexpr double kAgirNonZero = 1e-6;

/// Mean map over `heatmaps`, then the mean of its values > 1e-6 inside the
/// foreground over the same inside the background (+inf when the latter is 0).
double agir(const std::vector<Heatmap>& heatmaps, const MaskPair& masks);
double agir(const Eigen::MatrixXd& mean_map, const MaskPair& masks);

Eigen::MatrixXd mean_heatmap(const std::vector<Heatmap>& heatmaps);

ImageU8 heatmap_to_image(const Eigen::MatrixXd& values);
void write_heatmap(const std::filesystem::path& png_path, const Heatmap& map, const nlohmann::json& sidecar);

struct AgirRow {
  std::string variant;
  std::string alignment;
  std::string sample_class;
  double agir = 0;
};
std::string serialize_agir_csv(const std::vector<AgirRow>& rows);

}  // namespace smad
