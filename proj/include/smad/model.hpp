#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "smad/dataprep.hpp"
#include "smad/image.hpp"
#include "smad/nn/backbone.hpp"
#include "smad/nn/parameters.hpp"

namespace smad {

using nn::Matrix;
using nn::Parameters;

enum class Variant { fused, binary };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);

struct LossWeights {
  double alpha1 = 0.2;
  double alpha2 = 0.2;
  double beta = 1.0;

  bool valid() const { return alpha1 >= 0 && alpha2 >= 0 && beta >= 0; }
  /// alpha1 == alpha2 and alpha / beta == 0.2.
  bool canonical() const { return alpha1 == alpha2 && beta > 0 && std::abs(alpha1 / beta - 0.2) < 1e-12; }
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

nlohmann::json to_json(const LossWeights& w);
LossWeights loss_weights_from_json(const nlohmann::json& j);

struct LossBundle {
  double L1 = 0;
  double L2 = 0;
  double L3 = 0;
  double total = 0;
  std::vector<double> scores;  // per-sample detection score, high = bona fide
};

/// Logistic function without overflow for large |x|.
template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

/// BCE on a logit: max(x, 0) - x t + log1p(exp(-|x|)).
template <typename Scalar>
Scalar bce_with_logit(Scalar x, int target) {
  return std::max(x, Scalar(0)) - x * static_cast<Scalar>(target) + std::log1p(std::exp(-std::abs(x)));
}

/// -log softmax(z)_y with max subtraction.
template <typename Derived>
typename Derived::Scalar softmax_ce(const Eigen::MatrixBase<Derived>& logits, int y) {
  using Scalar = typename Derived::Scalar;
  if (y < 0 || y >= logits.size()) throw ContractError("softmax_ce: label out of range");
  const Scalar m = logits.maxCoeff();
  const Scalar lse = m + std::log((logits.array() - m).exp().sum());
  return lse - logits(y);
}

template <typename Scalar>
struct DetectionTerm {
  Scalar score;
  Scalar loss;
};

/// Dot-product detection head: score = sigmoid(f1 . f2), loss = BCE against t.
template <typename DerivedA, typename DerivedB>
DetectionTerm<typename DerivedA::Scalar> fused_detection_loss(const Eigen::MatrixBase<DerivedA>& f1,
                                                              const Eigen::MatrixBase<DerivedB>& f2, int target) {
  if (f1.size() != f2.size()) throw ContractError("fused_detection_loss: feature sizes differ");
  const auto x = f1.reshaped().dot(f2.reshaped());
  return {sigmoid(x), bce_with_logit(x, target)};
}

/// Column-batched mean softmax CE. Writes d(mean loss)/dZ into `grad` when given.
template <typename Scalar>
Scalar softmax_ce_batch(const Matrix<Scalar>& logits, const std::vector<int>& labels, Matrix<Scalar>* grad) {
  const Eigen::Index n = logits.cols();
  if (static_cast<Eigen::Index>(labels.size()) != n) throw ContractError("softmax_ce_batch: label count mismatch");
  if (grad) grad->resize(logits.rows(), n);
  Scalar sum = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto z = logits.col(i);
    sum += softmax_ce(z, labels[i]);
    if (grad) {
      const Scalar m = z.maxCoeff();
      auto p = (z.array() - m).exp().eval();
      p /= p.sum();
      grad->col(i) = p.matrix() / static_cast<Scalar>(n);
      (*grad)(labels[i], i) -= Scalar(1) / static_cast<Scalar>(n);
    }
  }
  return sum / static_cast<Scalar>(n);
}

/// Network input: channels x (N * H * W), pixels mapped by (p - 127.5) / 64.
template <typename Scalar>
struct Batch {
  Matrix<Scalar> input;
  int n = 0;
  std::vector<int> first_class;
  std::vector<int> second_class;
  std::vector<int> target;
};

inline constexpr double kInputCenter = 127.5;
inline constexpr double kInputScale = 64.0;

template <typename Scalar>
void write_input_column_block(const ImageU8& img, Matrix<Scalar>& input, int sample) {
  const int hw = img.height() * img.width();
  const Eigen::Index offset = static_cast<Eigen::Index>(sample) * hw;
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c)
        input(c, offset + y * img.width() + x) =
            static_cast<Scalar>((static_cast<double>(img(y, x, c)) - kInputCenter) / kInputScale);
}

template <typename Scalar>
Matrix<Scalar> make_input(const std::vector<const ImageU8*>& images, int height, int width, int channels = 3) {
  Matrix<Scalar> input(channels, static_cast<Eigen::Index>(images.size()) * height * width);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const ImageU8& img = *images[i];
    if (img.height() != height || img.width() != width || img.channels() != channels)
      throw ContractError("make_input: image shape does not match the model input");
    write_input_column_block(img, input, static_cast<int>(i));
  }
  return input;
}

struct ModelConfig {
  Variant variant = Variant::fused;
  nn::BackboneConfig backbone;
  int num_classes = 0;  // fused only
  LossWeights weights;
  std::string alignment_setting = "d";

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct InitOptions {
  double projection_gain = 0.1;
  bool zero_projection = false;  // features start at zero, so fused scores start at exactly 0.5
};

/// Activations and logit gradients at the last spatial stage, one per branch.
template <typename Scalar>
struct SpatialTrace {
  Matrix<Scalar> activation;  // K x (h*w) for a single image
  Matrix<Scalar> gradient;    // d logit / d activation
  nn::Extent extent;
};

/// The fused dual-network detector or the single-branch binary detector.
template <typename Scalar>
class Model {
 public:
  Model() = default;

  explicit Model(ModelConfig config) : config_(std::move(config)) {
    if (!config_.weights.valid()) throw ContractError("loss weights must be non-negative");
    const int d = config_.backbone.feature_dim;
    if (config_.variant == Variant::fused) {
      if (config_.num_classes < 1) throw ContractError("fused model needs at least one identity class");
      first_ = nn::Backbone<Scalar>(config_.backbone, params_, "first.");
      second_ = nn::Backbone<Scalar>(config_.backbone, params_, "second.");
      head1_w_ = params_.add("first.head.weight", config_.num_classes, d);
      head1_b_ = params_.add("first.head.bias", config_.num_classes, 1);
      head2_w_ = params_.add("second.head.weight", config_.num_classes, d);
      head2_b_ = params_.add("second.head.bias", config_.num_classes, 1);
    } else {
      first_ = nn::Backbone<Scalar>(config_.backbone, params_, "net.");
      bin_w_ = params_.add("net.head.weight", 1, d);
      bin_b_ = params_.add("net.head.bias", 1, 1);
    }
  }

  const ModelConfig& config() const { return config_; }
  Variant variant() const { return config_.variant; }
  Parameters<Scalar>& parameters() { return params_; }
  const Parameters<Scalar>& parameters() const { return params_; }
  void set_parameters(Parameters<Scalar> p) {
    if (!p.same_layout(params_)) throw ContractError("parameter layout does not match the model");
    for (int i = 0; i < p.size(); ++i)
      if (p.name(i) != params_.name(i)) throw ContractError("parameter name mismatch: " + p.name(i));
    params_ = std::move(p);
  }

  /// Backbones get random weights; classifier heads start at zero.
  void initialize(std::uint64_t seed, const InitOptions& opt = {}) {
    params_.set_zero();
    auto rng = Rng::derive({seed, 0x1417});
    first_.initialize(params_, rng, opt.zero_projection ? 0.0 : opt.projection_gain);
    if (config_.variant == Variant::fused)
      second_.initialize(params_, rng, opt.zero_projection ? 0.0 : opt.projection_gain);
  }

  /// Loss components and per-sample scores; accumulates gradients of `total` into `grads` when given.
  LossBundle forward(const Batch<Scalar>& batch, Parameters<Scalar>* grads = nullptr) const {
    check_batch(batch);
    return config_.variant == Variant::fused ? fused_forward(batch, grads) : binary_forward(batch, grads);
  }

  /// Detection logits (f1 . f2 or the scalar head) for a batch of inputs.
  std::vector<Scalar> logits(const Matrix<Scalar>& input, int n) const {
    nn::BackboneCache<Scalar> c1, c2;
    std::vector<Scalar> out(static_cast<std::size_t>(n));
    if (config_.variant == Variant::fused) {
      const Matrix<Scalar> f1 = first_.forward(params_, input, n, c1);
      const Matrix<Scalar> f2 = second_.forward(params_, input, n, c2);
      for (int i = 0; i < n; ++i) out[i] = f1.col(i).dot(f2.col(i));
    } else {
      const Matrix<Scalar> f = first_.forward(params_, input, n, c1);
      const Matrix<Scalar> z = params_[bin_w_] * f;
      for (int i = 0; i < n; ++i) out[i] = z(0, i) + params_[bin_b_](0, 0);
    }
    return out;
  }

  std::vector<double> scores(const Matrix<Scalar>& input, int n) const {
    std::vector<double> out;
    for (Scalar x : logits(input, n)) out.push_back(static_cast<double>(sigmoid(x)));
    return out;
  }

  double detection_score(const ImageU8& image) const {
    return scores(make_input<Scalar>({&image}, config_.backbone.input_height, config_.backbone.input_width), 1)[0];
  }

  /// Last-stage activations and gradients of `direction * logit` for one image.
  std::vector<SpatialTrace<Scalar>> spatial_traces(const ImageU8& image, Scalar direction) const {
    const auto input =
        make_input<Scalar>({&image}, config_.backbone.input_height, config_.backbone.input_width);
    nn::BackboneCache<Scalar> c1, c2;
    std::vector<SpatialTrace<Scalar>> out;
    if (config_.variant == Variant::fused) {
      const Matrix<Scalar> f1 = first_.forward(params_, input, 1, c1);
      const Matrix<Scalar> f2 = second_.forward(params_, input, 1, c2);
      out.push_back({c1.spatial(), first_.spatial_gradient(params_, c1, direction * f2), first_.spatial_extent()});
      out.push_back({c2.spatial(), second_.spatial_gradient(params_, c2, direction * f1), second_.spatial_extent()});
    } else {
      first_.forward(params_, input, 1, c1);
      const Matrix<Scalar> df = direction * params_[bin_w_].transpose();
      out.push_back({c1.spatial(), first_.spatial_gradient(params_, c1, df), first_.spatial_extent()});
    }
    return out;
  }

  /// Smallest |pre-activation| seen in the last forward on `batch` (kink distance for gradient checks).
  Scalar min_abs_preactivation(const Batch<Scalar>& batch) const {
    nn::BackboneCache<Scalar> c;
    first_.forward(params_, batch.input, batch.n, c);
    Scalar m = c.min_abs_preactivation;
    if (config_.variant == Variant::fused) {
      second_.forward(params_, batch.input, batch.n, c);
      m = std::min(m, c.min_abs_preactivation);
    }
    return m;
  }

 private:
  void check_batch(const Batch<Scalar>& b) const {
    if (b.n < 1) throw ContractError("empty batch");
    const auto n = static_cast<std::size_t>(b.n);
    if (b.target.size() != n) throw ContractError("batch target count mismatch");
    for (int t : b.target)
      if (t != 0 && t != 1) throw ContractError("detection target must be 0 or 1");
    if (config_.variant == Variant::fused) {
      if (b.first_class.size() != n || b.second_class.size() != n)
        throw ContractError("batch class label count mismatch");
      for (std::size_t i = 0; i < n; ++i)
        if (b.first_class[i] < 0 || b.first_class[i] >= config_.num_classes || b.second_class[i] < 0 ||
            b.second_class[i] >= config_.num_classes)
          throw ContractError("class label out of range");
    }
  }

  LossBundle fused_forward(const Batch<Scalar>& b, Parameters<Scalar>* grads) const {
    const int n = b.n;
    const auto& w = config_.weights;
    nn::BackboneCache<Scalar> c1, c2;
    const Matrix<Scalar> f1 = first_.forward(params_, b.input, n, c1);
    const Matrix<Scalar> f2 = second_.forward(params_, b.input, n, c2);
    Matrix<Scalar> z1 = params_[head1_w_] * f1;
    z1.colwise() += params_[head1_b_].col(0);
    Matrix<Scalar> z2 = params_[head2_w_] * f2;
    z2.colwise() += params_[head2_b_].col(0);

    Matrix<Scalar> dz1, dz2;
    LossBundle out;
    out.L1 = static_cast<double>(softmax_ce_batch(z1, b.first_class, grads ? &dz1 : nullptr));
    out.L2 = static_cast<double>(softmax_ce_batch(z2, b.second_class, grads ? &dz2 : nullptr));
    Matrix<Scalar> dx(1, n);
    Scalar l3 = 0;
    for (int i = 0; i < n; ++i) {
      const auto term = fused_detection_loss(f1.col(i), f2.col(i), b.target[i]);
      l3 += term.loss;
      out.scores.push_back(static_cast<double>(term.score));
      dx(0, i) = (term.score - static_cast<Scalar>(b.target[i])) / static_cast<Scalar>(n);
    }
    out.L3 = static_cast<double>(l3 / static_cast<Scalar>(n));
    out.total = w.alpha1 * out.L1 + w.alpha2 * out.L2 + w.beta * out.L3;
    if (!grads) return out;

    const auto a1 = static_cast<Scalar>(w.alpha1), a2 = static_cast<Scalar>(w.alpha2);
    const auto beta = static_cast<Scalar>(w.beta);
    (*grads)[head1_w_].noalias() += a1 * dz1 * f1.transpose();
    (*grads)[head1_b_].col(0) += a1 * dz1.rowwise().sum();
    (*grads)[head2_w_].noalias() += a2 * dz2 * f2.transpose();
    (*grads)[head2_b_].col(0) += a2 * dz2.rowwise().sum();
    const auto dxb = (beta * dx).eval();
    Matrix<Scalar> df1 = a1 * params_[head1_w_].transpose() * dz1;
    df1 += f2 * dxb.asDiagonal();
    Matrix<Scalar> df2 = a2 * params_[head2_w_].transpose() * dz2;
    df2 += f1 * dxb.asDiagonal();
    first_.backward(params_, c1, df1, *grads);
    second_.backward(params_, c2, df2, *grads);
    return out;
  }

  LossBundle binary_forward(const Batch<Scalar>& b, Parameters<Scalar>* grads) const {
    const int n = b.n;
    nn::BackboneCache<Scalar> c;
    const Matrix<Scalar> f = first_.forward(params_, b.input, n, c);
    const Scalar bias = params_[bin_b_](0, 0);
    const Matrix<Scalar> z = params_[bin_w_] * f;
    Matrix<Scalar> dz(1, n);
    Scalar sum = 0;
    LossBundle out;
    for (int i = 0; i < n; ++i) {
      const Scalar x = z(0, i) + bias;
      sum += bce_with_logit(x, b.target[i]);
      const Scalar s = sigmoid(x);
      out.scores.push_back(static_cast<double>(s));
      dz(0, i) = (s - static_cast<Scalar>(b.target[i])) / static_cast<Scalar>(n);
    }
    out.L3 = static_cast<double>(sum / static_cast<Scalar>(n));
    out.total = out.L3;
    if (!grads) return out;
    (*grads)[bin_w_].noalias() += dz * f.transpose();
    (*grads)[bin_b_](0, 0) += dz.sum();
    const Matrix<Scalar> df = params_[bin_w_].transpose() * dz;
    first_.backward(params_, c, df, *grads);
    return out;
  }

  ModelConfig config_;
  Parameters<Scalar> params_;
  nn::Backbone<Scalar> first_, second_;
  int head1_w_ = -1, head1_b_ = -1, head2_w_ = -1, head2_b_ = -1;
  int bin_w_ = -1, bin_b_ = -1;
};

/// Stack images with the labels of their samples (labels must already be assigned).
template <typename Scalar>
Batch<Scalar> make_batch(const std::vector<const ImageU8*>& images, const std::vector<const Sample*>& samples,
                         const nn::BackboneConfig& cfg) {
  if (images.size() != samples.size()) throw ContractError("make_batch: image and sample counts differ");
  Batch<Scalar> b;
  b.n = static_cast<int>(images.size());
  b.input = make_input<Scalar>(images, cfg.input_height, cfg.input_width, cfg.input_channels);
  for (const Sample* s : samples) {
    if (s->target < 0) throw ContractError("make_batch: sample " + s->path + " has no training labels");
    b.first_class.push_back(s->first_class);
    b.second_class.push_back(s->second_class);
    b.target.push_back(s->target);
  }
  return b;
}

}  // namespace smad
