#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "smad/dataprep.hpp"
#include "smad/delaunay.hpp"
#include "smad/geometry.hpp"
#include "smad/image.hpp"

namespace smad {

inline constexpr double kDefaultMorphAlpha = 0.5;

/// Piecewise-affine warp: each triangle of `dst_points` is filled by sampling the
/// corresponding triangle of `src_points` in `src` (bilinear). Pixels outside
/// every triangle are sampled at their own position.
ImageD warp_piecewise_affine(const ImageU8& src, const Points2<double>& src_points,
                             const Points2<double>& dst_points, const std::vector<Triangle>& triangles,
                             ImageSize output_size);

struct MorphResult {
  ImageU8 image;
  Landmarks68d landmarks;
};

/// Landmark morph: both faces are warped onto the interpolated landmarks
/// (triangulated once, with frame points so the background is morphed too)
/// and cross-dissolved with weights (1 - alpha, alpha).
MorphResult morph(const ImageU8& img_a, const Landmarks68d& lm_a, const ImageU8& img_b, const Landmarks68d& lm_b,
                  double alpha = kDefaultMorphAlpha);

struct MorphSetResult {
  Manifest manifest;
  int morphs = 0;
  int selfmorphs = 0;
  int skipped_selfmorphs = 0;  // identities with fewer than two images
};

struct MorphSetOptions {
  double alpha = kDefaultMorphAlpha;
  double selfmorph_fraction = 0.0;
  std::string subdir = "morphs";  // output location, relative to the dataset root
  std::uint64_t seed = 0;         // self-morph image choice
};

/// Emit one morph per plan pair and ceil(fraction * |pairs|) self-morphs.
/// Images and landmarks are read from and written under `root`; the returned
/// manifest is the input followed by the morphs and then the self-morphs.
MorphSetResult generate_morph_set(const Manifest& manifest, const std::filesystem::path& root,
                                  const PairingPlan& plan, const MorphSetOptions& options);

}  // namespace smad
