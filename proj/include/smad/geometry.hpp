#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "smad/errors.hpp"
#include "smad/image.hpp"

namespace smad {

template <typename Scalar>
using Point2 = Eigen::Matrix<Scalar, 2, 1>;

template <typename Scalar>
using Points2 = Eigen::Matrix<Scalar, 2, Eigen::Dynamic>;

/// Five-point face landmarks stored column-wise in the order
/// left eye, right eye, nose, left mouth corner, right mouth corner.
template <typename Scalar>
struct Landmarks5 {
  enum Index { kLeftEye = 0, kRightEye, kNose, kMouthLeft, kMouthRight };
  Eigen::Matrix<Scalar, 2, 5> points = Eigen::Matrix<Scalar, 2, 5>::Zero();

  Landmarks5() = default;
  explicit Landmarks5(const Eigen::Matrix<Scalar, 2, 5>& p) : points(p) {}

  Point2<Scalar> left_eye() const { return points.col(kLeftEye); }
  Point2<Scalar> right_eye() const { return points.col(kRightEye); }
  Point2<Scalar> nose() const { return points.col(kNose); }
  Point2<Scalar> mouth_left() const { return points.col(kMouthLeft); }
  Point2<Scalar> mouth_right() const { return points.col(kMouthRight); }

  /// Finite and in canonical upright orientation.
  bool valid() const {
    return points.allFinite() && points(0, kLeftEye) < points(0, kRightEye) &&
           points(0, kMouthLeft) < points(0, kMouthRight);
  }

  friend bool operator==(const Landmarks5& a, const Landmarks5& b) { return a.points == b.points; }
};

/// 68-point annotation: 0-16 jaw, 17-26 brows, 27-35 nose, 36-47 eyes, 48-67 mouth.
template <typename Scalar>
struct Landmarks68 {
  Eigen::Matrix<Scalar, 2, 68> points = Eigen::Matrix<Scalar, 2, 68>::Zero();

  Landmarks68() = default;
  explicit Landmarks68(const Eigen::Matrix<Scalar, 2, 68>& p) : points(p) {}

  bool valid() const { return points.allFinite(); }
  Point2<Scalar> left_eye_center() const { return points.template middleCols<6>(36).rowwise().mean(); }
  Point2<Scalar> right_eye_center() const { return points.template middleCols<6>(42).rowwise().mean(); }

  friend bool operator==(const Landmarks68& a, const Landmarks68& b) { return a.points == b.points; }
};

using Landmarks5d = Landmarks5<double>;
using Landmarks68d = Landmarks68<double>;

/// p' = scale * R(rotation) * p + translation.
template <typename Scalar>
struct SimilarityTransform {
  Scalar scale = Scalar(1);
  Scalar rotation = Scalar(0);
  Point2<Scalar> translation = Point2<Scalar>::Zero();

  Eigen::Matrix<Scalar, 2, 2> linear() const {
    const Scalar c = std::cos(rotation), s = std::sin(rotation);
    Eigen::Matrix<Scalar, 2, 2> m;
    m << c, -s, s, c;
    return scale * m;
  }

  Point2<Scalar> apply(const Point2<Scalar>& p) const { return linear() * p + translation; }

  template <typename Derived>
  Points2<Scalar> apply(const Eigen::MatrixBase<Derived>& pts) const {
    return (linear() * pts).colwise() + translation;
  }

  SimilarityTransform inverse() const {
    SimilarityTransform inv;
    inv.scale = Scalar(1) / scale;
    inv.rotation = -rotation;
    inv.translation = -(inv.linear() * translation);
    return inv;
  }

  /// (*this after other)(p) == this->apply(other.apply(p)).
  SimilarityTransform compose(const SimilarityTransform& other) const {
    SimilarityTransform out;
    out.scale = scale * other.scale;
    out.rotation = std::remainder(rotation + other.rotation, Scalar(2 * 3.14159265358979323846));
    out.translation = linear() * other.translation + translation;
    return out;
  }
};

using SimilarityTransformd = SimilarityTransform<double>;

/// Least-squares similarity (no reflection) mapping src columns onto dst columns.
/// Closed-form Procrustes with scale: centre both sets, the 2x2 cross-covariance
/// reduces to a rotation angle atan2(b, a) and scale hypot(a, b) / var(src).
template <typename DerivedA, typename DerivedB>
SimilarityTransform<typename DerivedA::Scalar> fit_similarity(const Eigen::MatrixBase<DerivedA>& src,
                                                               const Eigen::MatrixBase<DerivedB>& dst) {
  using Scalar = typename DerivedA::Scalar;
  if (src.rows() != 2 || dst.rows() != 2 || src.cols() != dst.cols() || src.cols() < 2)
    throw ContractError("fit_similarity: expected matching 2xN point sets with N >= 2");
  if (!src.allFinite() || !dst.allFinite()) throw DomainError("fit_similarity: non-finite landmarks");

  const Point2<Scalar> mu_src = src.rowwise().mean();
  const Point2<Scalar> mu_dst = dst.rowwise().mean();
  const Points2<Scalar> s = src.colwise() - mu_src;
  const Points2<Scalar> d = dst.colwise() - mu_dst;

  const Scalar var_src = s.squaredNorm();
  if (!(var_src > Scalar(0))) throw DegenerateInputError("fit_similarity: source points have zero spread");

  const Eigen::Matrix<Scalar, 2, 2> cov = d * s.transpose();
  const Scalar a = cov(0, 0) + cov(1, 1);
  const Scalar b = cov(1, 0) - cov(0, 1);

  SimilarityTransform<Scalar> t;
  t.rotation = std::atan2(b, a);
  t.scale = std::hypot(a, b) / var_src;
  if (!(t.scale > Scalar(0))) throw DegenerateInputError("fit_similarity: destination points have zero spread");
  t.translation = mu_dst - t.linear() * mu_src;
  return t;
}

template <typename Scalar>
SimilarityTransform<Scalar> fit_similarity(const Landmarks5<Scalar>& src, const Landmarks5<Scalar>& dst) {
  return fit_similarity(src.points, dst.points);
}

/// Sum of squared distances between T(src) and dst.
template <typename Scalar, typename DerivedA, typename DerivedB>
Scalar similarity_residual(const SimilarityTransform<Scalar>& t, const Eigen::MatrixBase<DerivedA>& src,
                           const Eigen::MatrixBase<DerivedB>& dst) {
  return (t.apply(src) - dst).squaredNorm();
}

struct ImageSize {
  int height = 112;
  int width = 112;
  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

/// One alignment condition: the 5-point target obtained by contracting the
/// reference template about the image centre by 1/scale_factor.
struct AlignmentSetting {
  char id = 'd';
  double scale_factor = 1.0;
  Landmarks5d target5;
  ImageSize output_size;
  double nominal_ratio = 0.42;
};

/// Reference 5-point template for a 112x112 crop.
Landmarks5d base_template();

/// Template for scale factor s and the given output size.
Landmarks5d scale_template(double s, ImageSize output_size = {});

/// The eleven settings a..k with their scale factors and nominal face-area ratios.
std::vector<AlignmentSetting> canonical_settings(ImageSize output_size = {});

/// Lookup by letter; throws DomainError for unknown ids.
AlignmentSetting setting_by_id(char id, ImageSize output_size = {});

nlohmann::json to_json(const AlignmentSetting& setting);
nlohmann::json settings_to_json(const std::vector<AlignmentSetting>& settings);

/// Resample `image` so that output(p) = image(T^-1(p)), bilinear, constant fill outside.
ImageU8 warp_similarity(const ImageU8& image, const SimilarityTransformd& transform, ImageSize output_size,
                        std::uint8_t fill = 128);

struct AlignedImage {
  ImageU8 image;
  SimilarityTransformd transform;
};

/// Align a face to a setting's template. The returned transform maps source
/// pixel coordinates to output pixel coordinates.
AlignedImage warp_to_setting(const ImageU8& image, const Landmarks5d& lm5, const AlignmentSetting& setting,
                             std::uint8_t fill = 128);

/// Convex hull, counter-clockwise in a y-up sense (positive shoelace area).
std::vector<Eigen::Vector2d> convex_hull(const Points2<double>& points);

/// Signed shoelace area.
double polygon_area(const std::vector<Eigen::Vector2d>& polygon);

/// Clip a convex polygon to the rectangle [0, width] x [0, height].
std::vector<Eigen::Vector2d> clip_to_rect(const std::vector<Eigen::Vector2d>& polygon, double width, double height);

/// Area of the hull of all points, clipped to the image, divided by h*w.
double occupancy_ratio(const Points2<double>& points, ImageSize image_size);
inline double occupancy_ratio(const Landmarks68d& lm68, ImageSize image_size) {
  return occupancy_ratio(Points2<double>(lm68.points), image_size);
}

/// Landmark CSV: header `image_path,point_index,x,y`, one row per point.
/// The 5- and 68-point variants are told apart by the number of rows per image.
using LandmarkTable = std::map<std::string, Points2<double>>;
LandmarkTable read_landmarks_csv(const std::filesystem::path& path);
void write_landmarks_csv(const std::filesystem::path& path, const LandmarkTable& table);

/// Points stored for `image` in the landmark file `csv` (relative to `root`); IntegrityError
/// when the file lacks the image or holds a different point count.
Points2<double> read_sample_landmarks(const std::filesystem::path& root, const std::string& csv,
                                      const std::string& image, int expected);

Landmarks5d to_landmarks5(const Points2<double>& pts);
Landmarks68d to_landmarks68(const Points2<double>& pts);

}  // namespace smad
