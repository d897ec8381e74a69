#include "smad/synthfaces.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "smad/png.hpp"
#include "smad/random.hpp"

namespace smad {
namespace {

using Vec3 = Eigen::Vector3d;

constexpr double kMaxJitter = 1.5;
constexpr double kBackgroundSpread = 10;
constexpr double kSeparationFloor = 2.0;

Vec3 rgb(const std::array<double, 3>& c) { return {c[0], c[1], c[2]}; }

/// Analytic layout of one render; every landmark and every drawn shape derive from it.
struct FaceLayout {
  Eigen::Vector2d center;
  Eigen::Vector2d left_eye, right_eye;
  double eye_y = 0;
  double tip_y = 0;
  double mouth_y = 0;
  Landmarks68d lm68;
  Landmarks5d lm5;
};

double mouth_mid(const IdentityParams& p, double mouth_y, double dx) {
  const double u = dx / p.mouth_half_width;
  return mouth_y + p.mouth_curvature * 0.3 * p.mouth_half_width * (1.0 - u * u);
}

FaceLayout layout(const IdentityParams& p, Eigen::Vector2d center) {
  FaceLayout f;
  f.center = center;
  const double cx = center.x(), cy = center.y();
  f.eye_y = cy - p.eye_height;
  f.left_eye = {cx - p.eye_half_spacing, f.eye_y};
  f.right_eye = {cx + p.eye_half_spacing, f.eye_y};
  f.tip_y = f.eye_y + p.nose_length;
  f.mouth_y = f.eye_y + p.eye_to_mouth;

  auto& pts = f.lm68.points;
  // Jaw: ellipse arc from the left side at eye level, around the chin, to the right side.
  const double lift = std::asin(std::clamp(p.eye_height / p.face_ry, -1.0, 1.0));
  const double phi_left = std::numbers::pi + lift, phi_right = -lift;
  for (int i = 0; i <= 16; ++i) {
    const double phi = phi_left + (phi_right - phi_left) * i / 16.0;
    pts.col(i) << cx + p.face_rx * std::cos(phi), cy + p.face_ry * std::sin(phi);
  }
  // Brows.
  const double r = p.eye_radius;
  for (int side = 0; side < 2; ++side) {
    const Eigen::Vector2d eye = side == 0 ? f.left_eye : f.right_eye;
    for (int k = 0; k < 5; ++k) {
      const double u = -1.0 + k * 0.5;
      pts.col(17 + 5 * side + k) << eye.x() + 1.5 * r * u, eye.y() - 1.6 * r - 4.0 - 3.0 * (1.0 - u * u);
    }
  }
  // Nose bridge and nostril row.
  for (int k = 0; k < 4; ++k)
    pts.col(27 + k) << cx, f.eye_y + p.nose_length * (0.15 + 0.85 * k / 3.0);
  for (int k = 0; k < 5; ++k) pts.col(31 + k) << cx + p.nose_width * (k / 4.0 - 0.5), f.tip_y + 3.0;
  // Eye rings: six points on the eye outline, equally spaced in angle so their mean is the centre.
  for (int side = 0; side < 2; ++side) {
    const Eigen::Vector2d eye = side == 0 ? f.left_eye : f.right_eye;
    for (int k = 0; k < 6; ++k) {
      const double th = std::numbers::pi + k * std::numbers::pi / 3.0;
      pts.col(36 + 6 * side + k) << eye.x() + 1.5 * r * std::cos(th), eye.y() + 0.9 * r * std::sin(th);
    }
  }
  // Mouth.
  const double hw = p.mouth_half_width;
  const auto upper = [&](double dx) { return mouth_mid(p, f.mouth_y, dx) - 5.0 * (1.0 - (dx / hw) * (dx / hw)); };
  const auto lower = [&](double dx) { return mouth_mid(p, f.mouth_y, dx) + 6.0 * (1.0 - (dx / hw) * (dx / hw)); };
  pts.col(48) << cx - hw, mouth_mid(p, f.mouth_y, -hw);
  for (int k = 0; k < 5; ++k) {
    const double dx = hw * (-2.0 + k) / 3.0;
    pts.col(49 + k) << cx + dx, upper(dx);
  }
  pts.col(54) << cx + hw, mouth_mid(p, f.mouth_y, hw);
  for (int k = 0; k < 5; ++k) {
    const double dx = hw * (2.0 - k) / 3.0;
    pts.col(55 + k) << cx + dx, lower(dx);
  }
  pts.col(60) << cx - 0.8 * hw, mouth_mid(p, f.mouth_y, -0.8 * hw);
  for (int k = 0; k < 3; ++k) {
    const double dx = hw * (k - 1) / 3.0;
    pts.col(61 + k) << cx + dx, mouth_mid(p, f.mouth_y, dx) - 1.0;
  }
  pts.col(64) << cx + 0.8 * hw, mouth_mid(p, f.mouth_y, 0.8 * hw);
  for (int k = 0; k < 3; ++k) {
    const double dx = hw * (1 - k) / 3.0;
    pts.col(65 + k) << cx + dx, mouth_mid(p, f.mouth_y, dx) + 1.0;
  }

  f.lm5.points.col(Landmarks5d::kLeftEye) = f.left_eye;
  f.lm5.points.col(Landmarks5d::kRightEye) = f.right_eye;
  f.lm5.points.col(Landmarks5d::kNose) = pts.col(30);
  f.lm5.points.col(Landmarks5d::kMouthLeft) = pts.col(48);
  f.lm5.points.col(Landmarks5d::kMouthRight) = pts.col(54);
  return f;
}

double segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const Eigen::Vector2d ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (a + t * ab - p).norm();
}

bool in_triangle(const Eigen::Vector2d& p, const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                 const Eigen::Vector2d& c) {
  const auto side = [](const Eigen::Vector2d& o, const Eigen::Vector2d& u, const Eigen::Vector2d& v) {
    return (u.x() - o.x()) * (v.y() - o.y()) - (u.y() - o.y()) * (v.x() - o.x());
  };
  const double d1 = side(a, b, p), d2 = side(b, c, p), d3 = side(c, a, p);
  const bool neg = d1 < 0 || d2 < 0 || d3 < 0, pos = d1 > 0 || d2 > 0 || d3 > 0;
  return !(neg && pos);
}

Vec3 shade(const IdentityParams& p, const FaceLayout& f, const Vec3& background, const Eigen::Vector2d& q) {
  const double dx = q.x() - f.center.x(), dy = q.y() - f.center.y();
  const double e = (dx / p.face_rx) * (dx / p.face_rx) + (dy / p.face_ry) * (dy / p.face_ry);
  if (e > 1.0) return background;

  const Vec3 skin = rgb(p.skin) * (1.04 - 0.08 * dy / p.face_ry);
  const auto& pts = f.lm68.points;
  const double r = p.eye_radius;

  for (int side = 0; side < 2; ++side) {
    const Eigen::Vector2d eye = side == 0 ? f.left_eye : f.right_eye;
    const Eigen::Vector2d d = q - eye;
    const double ue = d.x() / (1.5 * r), ve = d.y() / (0.9 * r);
    if (ue * ue + ve * ve <= 1.0) {
      const double dist = d.norm();
      if (dist <= 0.25 * r) return {20, 20, 24};
      if (dist <= 0.6 * r) return rgb(p.iris);
      return {238, 236, 230};
    }
    for (int k = 0; k < 4; ++k) {
      const int i = 17 + 5 * side + k;
      if (segment_distance(q, pts.col(i), pts.col(i + 1)) <= 0.5 * p.brow_thickness) return skin * 0.35;
    }
  }

  const double hw = p.mouth_half_width;
  const double mdx = q.x() - f.center.x();
  if (std::abs(mdx) <= hw) {
    const double u = mdx / hw;
    const double mid = mouth_mid(p, f.mouth_y, mdx);
    if (std::abs(q.y() - mid) <= 0.8) return {90, 30, 34};
    if (q.y() >= mid - 5.0 * (1 - u * u) && q.y() <= mid + 6.0 * (1 - u * u)) return 0.5 * skin + Vec3(92, 35, 38);
  }

  const Eigen::Vector2d apex(f.center.x(), f.eye_y + 0.15 * p.nose_length);
  const Eigen::Vector2d base_l(f.center.x() - 0.5 * p.nose_width, f.tip_y + 3.0);
  const Eigen::Vector2d base_r(f.center.x() + 0.5 * p.nose_width, f.tip_y + 3.0);
  if (in_triangle(q, apex, base_l, base_r)) return skin * 0.82;

  for (const auto& m : p.moles) {
    const double mx = dx - m[0] * p.face_rx, my = dy - m[1] * p.face_ry;
    if (mx * mx + my * my <= m[2] * m[2]) return skin * 0.55;
  }
  const double along = dx * std::cos(p.texture_angle) + dy * std::sin(p.texture_angle);
  return skin + Vec3::Constant(p.texture_amplitude * std::sin(2 * std::numbers::pi * along / p.texture_period));
}

std::uint64_t params_hash(const IdentityParams& p) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto feed = [&h](double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xFF;
      h *= 0x100000001b3ULL;
    }
  };
  for (double v : p.geometry()) feed(v);
  feed(p.mouth_curvature);
  for (const auto* c : {&p.skin, &p.iris, &p.background})
    for (double v : *c) feed(v);
  feed(p.texture_period);
  feed(p.texture_angle);
  feed(p.texture_amplitude);
  for (const auto& m : p.moles)
    for (double v : m) feed(v);
  return h;
}

}  // namespace

bool IdentityParams::valid() const {
  for (double g : geometry())
    if (!(g > 0) || !std::isfinite(g)) return false;
  const double c = kCanvasSize / 2.0;
  const double margin = 8.0 + kMaxJitter;
  return c - face_rx >= margin && c - face_ry >= margin && texture_period > 0;
}

IdentityParams make_identity(std::uint64_t identity_seed) {
  auto rng = Rng::derive({identity_seed, 0x1D});
  IdentityParams p;
  // Layout lengths sit on a 2 px grid, so two distinct layouts differ by at least
  // kSeparationFloor in some coordinate.
  const auto grid = [&rng](double lo, double hi) {
    return lo + kSeparationFloor * std::round((rng.uniform(lo, hi) - lo) / kSeparationFloor);
  };
  p.face_rx = grid(58, 70);
  p.face_ry = grid(78, 92);
  p.eye_half_spacing = grid(23, 29);
  p.eye_height = grid(14, 22);
  p.eye_radius = rng.uniform(7, 10);
  p.nose_length = grid(24, 34);
  p.nose_width = grid(12, 20);
  p.eye_to_mouth = grid(54, 66);
  p.mouth_half_width = grid(17, 25);
  p.mouth_curvature = rng.uniform(-0.5, 0.5);
  p.brow_thickness = rng.uniform(3, 7);
  const double tone = rng.uniform();
  // The light end leaves headroom for the texture at +10% gain, so stripes never clip.
  const Vec3 light(190, 160, 140), dark(110, 76, 54);
  const Vec3 skin = light + tone * (dark - light);
  for (int c = 0; c < 3; ++c) {
    p.skin[c] = skin[c] + rng.uniform(-10, 10);
    p.iris[c] = rng.uniform(30, 160);
  }
  p.texture_period = rng.uniform(10, 16);
  p.texture_angle = rng.uniform(0, std::numbers::pi);
  p.texture_amplitude = 24;
  for (auto& m : p.moles) {
    const double rad = 0.75 * std::sqrt(rng.uniform()), th = rng.uniform(0, 2 * std::numbers::pi);
    m = {rad * std::cos(th), rad * std::sin(th), 2.5};
  }
  return p;
}

RenderedFace render(const IdentityParams& params, std::uint64_t variation_seed, std::string identity_id) {
  auto rng = Rng::derive({params_hash(params), variation_seed});
  const Eigen::Vector2d center(kCanvasSize / 2.0 + rng.uniform(-kMaxJitter, kMaxJitter),
                               kCanvasSize / 2.0 + rng.uniform(-kMaxJitter, kMaxJitter));
  const double gain = rng.uniform(0.9, 1.1);
  Vec3 background = rgb(params.background);
  for (int c = 0; c < 3; ++c) background[c] += rng.uniform(-kBackgroundSpread, kBackgroundSpread);

  const FaceLayout f = layout(params, center);
  RenderedFace out;
  out.image = ImageU8(kCanvasSize, kCanvasSize, 3);
  out.lm5 = f.lm5;
  out.lm68 = f.lm68;
  out.identity_id = std::move(identity_id);
  out.variation_seed = variation_seed;

  // 2x2 supersampling at pixel-centre offsets of +-0.25.
  for (int y = 0; y < kCanvasSize; ++y) {
    for (int x = 0; x < kCanvasSize; ++x) {
      Vec3 acc = Vec3::Zero();
      for (double oy : {-0.25, 0.25})
        for (double ox : {-0.25, 0.25}) acc += shade(params, f, background, Eigen::Vector2d(x + ox, y + oy));
      acc *= 0.25 * gain;
      for (int c = 0; c < 3; ++c) out.image(y, x, c) = saturate_u8(acc[c]);
    }
  }
  return out;
}

std::string identity_label(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d", index);
  return buf;
}

Manifest make_dataset(int n_identities, int images_per_identity, std::uint64_t root_seed,
                      const std::filesystem::path& root) {
  if (n_identities < 2) throw DomainError("make_dataset: need at least 2 identities");
  if (images_per_identity < 1) throw DomainError("make_dataset: need at least 1 image per identity");
  std::error_code ec;
  std::filesystem::create_directories(root, ec);
  if (ec) throw IoError("cannot create dataset directory " + root.string() + ": " + ec.message());

  std::vector<Sample> samples;
  for (int i = 0; i < n_identities; ++i) {
    const std::string label = identity_label(i);
    const std::uint64_t identity_seed = Rng::derive({root_seed, static_cast<std::uint64_t>(i)}).next();
    const IdentityParams params = make_identity(identity_seed);
    for (int k = 0; k < images_per_identity; ++k) {
      const std::uint64_t variation = Rng::derive({identity_seed, static_cast<std::uint64_t>(k), 0x7A}).next();
      const RenderedFace face = render(params, variation, label);
      const std::string stem = "id_" + label + "/img_" + std::to_string(k);
      Sample s;
      s.path = stem + ".png";
      s.lm5_path = stem + "_lm5.csv";
      s.lm68_path = stem + "_lm68.csv";
      s.first_label = s.second_label = label;
      s.authenticity = Authenticity::bona_fide;
      s.provenance = {{"generator", "synthfaces"},
                      {"identity_seed", identity_seed},
                      {"variation_seed", variation}};
      write_png(root / s.path, face.image);
      write_landmarks_csv(root / s.lm5_path, {{s.path, face.lm5.points}});
      write_landmarks_csv(root / s.lm68_path, {{s.path, face.lm68.points}});
      samples.push_back(std::move(s));
    }
  }
  Manifest m(std::move(samples));
  write_manifest(root / "manifest.json", m);
  return m;
}

}  // namespace smad
