#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "smad/dataprep.hpp"
#include "smad/geometry.hpp"
#include "smad/image.hpp"

namespace smad {

inline constexpr int kCanvasSize = 256;

/// Per-identity appearance of a procedural toy face. Lengths in pixels on the
/// 256x256 canvas; colours in 0..255.
struct IdentityParams {
  double face_rx = 64;
  double face_ry = 85;
  double eye_half_spacing = 26;
  double eye_height = 18;  // eye line above the face centre
  double eye_radius = 8.5;
  double nose_length = 29;  // eye line to nose tip
  double nose_width = 16;
  double eye_to_mouth = 60;
  double mouth_half_width = 21;
  double mouth_curvature = 0;
  double brow_thickness = 5;
  std::array<double, 3> skin{200, 160, 130};
  std::array<double, 3> iris{90, 70, 50};
  // Shared neutral backdrop, so the background carries no identity.
  std::array<double, 3> background{140, 140, 140};
  // Skin texture in face-relative coordinates: an oriented stripe pattern and a few moles
  // (u, v in units of the face radii, radius in px).
  double texture_period = 10;
  double texture_angle = 0;
  double texture_amplitude = 8;
  std::array<std::array<double, 3>, 6> moles{};

  /// Geometric entries (px), used for the separability floor.
  std::array<double, 10> geometry() const {
    return {face_rx, face_ry, eye_half_spacing, eye_height, eye_radius,
            nose_length, nose_width, eye_to_mouth, mouth_half_width, brow_thickness};
  }

  /// Positivity and the 8 px canvas margin.
  bool valid() const;

  friend bool operator==(const IdentityParams&, const IdentityParams&) = default;
};

struct RenderedFace {
  ImageU8 image;
  Landmarks5d lm5;
  Landmarks68d lm68;
  std::string identity_id;
  std::uint64_t variation_seed = 0;
};

IdentityParams make_identity(std::uint64_t identity_seed);

/// Rasterize a face. The variation seed controls position jitter (|d| <= 1.5 px
/// per axis), illumination gain (+-10%) and background tone (+-10 per channel).
RenderedFace render(const IdentityParams& params, std::uint64_t variation_seed, std::string identity_id = {});

/// Label used for identity i: zero-padded so lexicographic order equals numeric order.
std::string identity_label(int index);

/// Write id_<label>/img_<k>.png plus per-image landmark CSVs and manifest.json
/// under `root`. All samples are bona fide.
Manifest make_dataset(int n_identities, int images_per_identity, std::uint64_t root_seed,
                      const std::filesystem::path& root);

}  // namespace smad
