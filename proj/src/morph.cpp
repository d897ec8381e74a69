#include "smad/morph.hpp"

#include <cmath>
#include <set>

#include "smad/png.hpp"
#include "smad/random.hpp"

namespace smad {

ImageD warp_piecewise_affine(const ImageU8& src, const Points2<double>& src_points,
                             const Points2<double>& dst_points, const std::vector<Triangle>& triangles,
                             ImageSize output_size) {
  if (src_points.cols() != dst_points.cols()) throw ContractError("warp_piecewise_affine: point count mismatch");
  const int h = output_size.height, w = output_size.width, ch = src.channels();
  ImageD out(h, w, ch);
  std::vector<char> owned(static_cast<std::size_t>(h) * w, 0);

  for (const auto& t : triangles) {
    const Eigen::Vector2d d0 = dst_points.col(t[0]), d1 = dst_points.col(t[1]), d2 = dst_points.col(t[2]);
    Eigen::Matrix2d basis;
    basis << d1 - d0, d2 - d0;
    const double det = basis.determinant();
    if (std::abs(det) < 1e-12) continue;
    const Eigen::Matrix2d inv = basis.inverse();
    const Eigen::Vector2d s0 = src_points.col(t[0]), s1 = src_points.col(t[1]), s2 = src_points.col(t[2]);

    const int x_lo = std::max(0, static_cast<int>(std::floor(std::min({d0.x(), d1.x(), d2.x()}))));
    const int x_hi = std::min(w - 1, static_cast<int>(std::ceil(std::max({d0.x(), d1.x(), d2.x()}))));
    const int y_lo = std::max(0, static_cast<int>(std::floor(std::min({d0.y(), d1.y(), d2.y()}))));
    const int y_hi = std::min(h - 1, static_cast<int>(std::ceil(std::max({d0.y(), d1.y(), d2.y()}))));
    for (int y = y_lo; y <= y_hi; ++y) {
      for (int x = x_lo; x <= x_hi; ++x) {
        char& own = owned[static_cast<std::size_t>(y) * w + x];
        if (own) continue;
        const Eigen::Vector2d uv = inv * (Eigen::Vector2d(x, y) - d0);
        const double l1 = uv.x(), l2 = uv.y(), l0 = 1.0 - l1 - l2;
        constexpr double eps = -1e-9;
        if (l0 < eps || l1 < eps || l2 < eps) continue;
        own = 1;
        const Eigen::Vector2d s = l0 * s0 + l1 * s1 + l2 * s2;
        for (int c = 0; c < ch; ++c) out(y, x, c) = sample_bilinear(src, s.x(), s.y(), c);
      }
    }
  }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (!owned[static_cast<std::size_t>(y) * w + x])
        for (int c = 0; c < ch; ++c) out(y, x, c) = sample_bilinear(src, x, y, c);
  return out;
}

MorphResult morph(const ImageU8& img_a, const Landmarks68d& lm_a, const ImageU8& img_b, const Landmarks68d& lm_b,
                  double alpha) {
  if (!img_a.same_shape(img_b)) throw DomainError("morph: images differ in size");
  if (img_a.empty()) throw DomainError("morph: empty image");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("morph: alpha must lie in [0, 1]");
  if (!lm_a.valid() || !lm_b.valid()) throw DomainError("morph: invalid landmarks");

  MorphResult result;
  result.landmarks.points = (1.0 - alpha) * lm_a.points + alpha * lm_b.points;

  const ImageSize size{img_a.height(), img_a.width()};
  const Points2<double> frame = frame_points(size);
  const auto augment = [&frame](const Landmarks68d& lm) {
    Points2<double> p(2, 68 + frame.cols());
    p << lm.points, frame;
    return p;
  };
  const Points2<double> pa = augment(lm_a), pb = augment(lm_b), pm = augment(result.landmarks);
  const std::vector<Triangle> tris = triangulate(pm);

  const ImageD wa = warp_piecewise_affine(img_a, pa, pm, tris, size);
  const ImageD wb = warp_piecewise_affine(img_b, pb, pm, tris, size);
  result.image = ImageU8(size.height, size.width, img_a.channels());
  auto out = result.image.pixels();
  auto a = wa.pixels(), b = wb.pixels();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = saturate_u8((1.0 - alpha) * a[i] + alpha * b[i]);
  return result;
}

namespace {

struct LoadedFace {
  ImageU8 image;
  Points2<double> lm5;
  Landmarks68d lm68;
};

LoadedFace load_face(const std::filesystem::path& root, const Sample& s) {
  return {read_png(root / s.path), read_sample_landmarks(root, s.lm5_path, s.path, 5),
          to_landmarks68(read_sample_landmarks(root, s.lm68_path, s.path, 68))};
}

Sample write_morph(const std::filesystem::path& root, const std::string& stem, const LoadedFace& a,
                   const LoadedFace& b, const Sample& sa, const Sample& sb, double alpha, Authenticity kind) {
  const MorphResult m = morph(a.image, a.lm68, b.image, b.lm68, alpha);
  const Points2<double> lm5 = (1.0 - alpha) * a.lm5 + alpha * b.lm5;
  Sample s;
  s.path = stem + ".png";
  s.lm5_path = stem + "_lm5.csv";
  s.lm68_path = stem + "_lm68.csv";
  s.first_label = sa.first_label;
  s.second_label = sb.first_label;
  s.authenticity = kind;
  s.provenance = {{"generator", "landmark_morph"}, {"source_a", sa.path}, {"source_b", sb.path}, {"alpha", alpha}};
  write_png(root / s.path, m.image);
  write_landmarks_csv(root / s.lm5_path, {{s.path, lm5}});
  write_landmarks_csv(root / s.lm68_path, {{s.path, m.landmarks.points}});
  return s;
}

}  // namespace

MorphSetResult generate_morph_set(const Manifest& manifest, const std::filesystem::path& root,
                                  const PairingPlan& plan, const MorphSetOptions& options) {
  plan.validate();
  if (!(options.selfmorph_fraction >= 0.0)) throw DomainError("selfmorph fraction must be non-negative");
  const auto originals = manifest.by_identity(Authenticity::bona_fide);
  const auto images_of = [&](const std::string& id) -> const std::vector<std::size_t>& {
    auto it = originals.find(id);
    if (it == originals.end()) throw IntegrityError("plan identity " + id + " has no bona fide images");
    return it->second;
  };

  MorphSetResult result;
  std::vector<Sample> added;
  for (std::size_t i = 0; i < plan.pairs.size(); ++i) {
    const auto& pair = plan.pairs[i];
    const auto& ia = images_of(pair.first);
    const auto& ib = images_of(pair.second);
    Rng rng(pair.seed);
    const Sample& sa = manifest.entries()[ia[rng.below(ia.size())]];
    const Sample& sb = manifest.entries()[ib[rng.below(ib.size())]];
    const std::string stem =
        options.subdir + "/m_" + std::to_string(i) + "_" + pair.first + "_" + pair.second;
    added.push_back(write_morph(root, stem, load_face(root, sa), load_face(root, sb), sa, sb, options.alpha,
                                Authenticity::morph));
    ++result.morphs;
  }

  const auto wanted = static_cast<int>(std::ceil(options.selfmorph_fraction * plan.pairs.size() - 1e-12));
  std::set<std::string> pool(plan.subset_first.begin(), plan.subset_first.end());
  pool.insert(plan.subset_second.begin(), plan.subset_second.end());
  const std::vector<std::string> candidates(pool.begin(), pool.end());
  for (int j = 0; j < wanted && !candidates.empty(); ++j) {
    const std::string& id = candidates[static_cast<std::size_t>(j) % candidates.size()];
    auto it = originals.find(id);
    if (it == originals.end() || it->second.size() < 2) {
      ++result.skipped_selfmorphs;
      continue;
    }
    const auto& imgs = it->second;
    auto rng = Rng::derive({options.seed, static_cast<std::uint64_t>(j), 0x5E1F});
    const std::size_t k1 = rng.below(imgs.size());
    std::size_t k2 = rng.below(imgs.size() - 1);
    if (k2 >= k1) ++k2;
    const Sample& sa = manifest.entries()[imgs[k1]];
    const Sample& sb = manifest.entries()[imgs[k2]];
    const std::string stem = options.subdir + "/s_" + std::to_string(j) + "_" + id;
    added.push_back(write_morph(root, stem, load_face(root, sa), load_face(root, sb), sa, sb, options.alpha,
                                Authenticity::selfmorph));
    ++result.selfmorphs;
  }
  if (candidates.empty()) result.skipped_selfmorphs = wanted;

  std::vector<Sample> all = manifest.entries();
  all.insert(all.end(), added.begin(), added.end());
  result.manifest = Manifest(std::move(all));
  return result;
}

}  // namespace smad
