#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "smad/nn/parameters.hpp"
#include "smad/random.hpp"

namespace smad::nn {

/// Stack of stride-2 3x3 convolutions with ReLU, global average pooling and a
/// linear projection to the feature dimension.
struct BackboneConfig {
  int input_height = 112;
  int input_width = 112;
  int input_channels = 3;
  std::vector<int> channels{16, 32, 64, 64};
  int kernel = 3;
  int stride = 2;
  int padding = 1;
  int feature_dim = 128;

  friend bool operator==(const BackboneConfig&, const BackboneConfig&) = default;
};

inline nlohmann::json to_json(const BackboneConfig& c) {
  return {{"input_height", c.input_height}, {"input_width", c.input_width}, {"input_channels", c.input_channels},
          {"channels", c.channels},         {"kernel", c.kernel},           {"stride", c.stride},
          {"padding", c.padding},           {"feature_dim", c.feature_dim}};
}

inline BackboneConfig backbone_config_from_json(const nlohmann::json& j) {
  BackboneConfig c;
  c.input_height = j.at("input_height").get<int>();
  c.input_width = j.at("input_width").get<int>();
  c.input_channels = j.at("input_channels").get<int>();
  c.channels = j.at("channels").get<std::vector<int>>();
  c.kernel = j.at("kernel").get<int>();
  c.stride = j.at("stride").get<int>();
  c.padding = j.at("padding").get<int>();
  c.feature_dim = j.at("feature_dim").get<int>();
  return c;
}

struct Extent {
  int height = 0;
  int width = 0;
  int area() const { return height * width; }
};

/// Unfold k x k patches: rows (channel, ky, kx), columns (sample, oy, ox).
template <typename Scalar>
Matrix<Scalar> im2col(const Matrix<Scalar>& input, int n, Extent in, Extent out, int k, int stride, int pad) {
  const Eigen::Index channels = input.rows();
  Matrix<Scalar> cols(channels * k * k, static_cast<Eigen::Index>(n) * out.area());
  for (Eigen::Index c = 0; c < channels; ++c) {
    const Scalar* src = input.row(c).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        Scalar* dst = cols.row((c * k + ky) * k + kx).data();
        for (int s = 0; s < n; ++s) {
          const Scalar* plane = src + static_cast<std::ptrdiff_t>(s) * in.area();
          for (int oy = 0; oy < out.height; ++oy) {
            const int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= in.height) {
              std::fill(dst, dst + out.width, Scalar(0));
              dst += out.width;
              continue;
            }
            const Scalar* row = plane + static_cast<std::ptrdiff_t>(iy) * in.width;
            for (int ox = 0; ox < out.width; ++ox) {
              const int ix = ox * stride + kx - pad;
              *dst++ = (ix >= 0 && ix < in.width) ? row[ix] : Scalar(0);
            }
          }
        }
      }
    }
  }
  return cols;
}

/// Adjoint of im2col: scatter-add patch gradients back onto the input grid.
template <typename Scalar>
Matrix<Scalar> col2im(const Matrix<Scalar>& cols, Eigen::Index channels, int n, Extent in, Extent out, int k,
                      int stride, int pad) {
  Matrix<Scalar> input = Matrix<Scalar>::Zero(channels, static_cast<Eigen::Index>(n) * in.area());
  for (Eigen::Index c = 0; c < channels; ++c) {
    Scalar* dst = input.row(c).data();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Scalar* src = cols.row((c * k + ky) * k + kx).data();
        for (int s = 0; s < n; ++s) {
          Scalar* plane = dst + static_cast<std::ptrdiff_t>(s) * in.area();
          for (int oy = 0; oy < out.height; ++oy) {
            const int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= in.height) {
              src += out.width;
              continue;
            }
            Scalar* row = plane + static_cast<std::ptrdiff_t>(iy) * in.width;
            for (int ox = 0; ox < out.width; ++ox, ++src) {
              const int ix = ox * stride + kx - pad;
              if (ix >= 0 && ix < in.width) row[ix] += *src;
            }
          }
        }
      }
    }
  }
  return input;
}

/// Activations kept from a forward pass for the backward pass.
template <typename Scalar>
struct BackboneCache {
  int batch = 0;
  std::vector<Matrix<Scalar>> cols;         // per stage, unfolded input
  std::vector<Matrix<Scalar>> activations;  // per stage, post-ReLU output
  Matrix<Scalar> pooled;                    // K x N
  Scalar min_abs_preactivation = std::numeric_limits<Scalar>::infinity();

  /// Last spatial stage (K x N*h*w).
  const Matrix<Scalar>& spatial() const { return activations.back(); }
};

template <typename Scalar>
class Backbone {
 public:
  Backbone() = default;

  /// Registers this backbone's tensors in `params` under `prefix`.
  Backbone(const BackboneConfig& config, Parameters<Scalar>& params, const std::string& prefix)
      : config_(config) {
    if (config.channels.empty()) throw ContractError("backbone needs at least one stage");
    Extent e{config.input_height, config.input_width};
    int in_ch = config.input_channels;
    for (std::size_t l = 0; l < config.channels.size(); ++l) {
      const int out_ch = config.channels[l];
      const std::string tag = prefix + "conv" + std::to_string(l);
      weights_.push_back(params.add(tag + ".weight", out_ch, in_ch * config.kernel * config.kernel));
      biases_.push_back(params.add(tag + ".bias", out_ch, 1));
      extents_.push_back(e);
      e = {(e.height + 2 * config.padding - config.kernel) / config.stride + 1,
           (e.width + 2 * config.padding - config.kernel) / config.stride + 1};
      if (e.height <= 0 || e.width <= 0) throw ContractError("backbone input too small for its stages");
      in_ch = out_ch;
    }
    extents_.push_back(e);
    proj_w_ = params.add(prefix + "proj.weight", config.feature_dim, in_ch);
    proj_b_ = params.add(prefix + "proj.bias", config.feature_dim, 1);
  }

  const BackboneConfig& config() const { return config_; }
  int feature_dim() const { return config_.feature_dim; }
  Extent spatial_extent() const { return extents_.back(); }
  int spatial_channels() const { return config_.channels.back(); }

  /// He-normal convolutions, scaled-normal projection, zero biases.
  void initialize(Parameters<Scalar>& params, Rng& rng, double proj_gain = 1.0) const {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      auto& w = params[weights_[l]];
      const double std_dev = std::sqrt(2.0 / static_cast<double>(w.cols()));
      for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<Scalar>(std_dev * rng.normal());
      params[biases_[l]].setZero();
    }
    auto& p = params[proj_w_];
    const double std_dev = proj_gain / std::sqrt(static_cast<double>(p.cols()));
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = static_cast<Scalar>(std_dev * rng.normal());
    params[proj_b_].setZero();
  }

  /// input: C x (N*H*W). Returns features D x N.
  Matrix<Scalar> forward(const Parameters<Scalar>& params, const Matrix<Scalar>& input, int n,
                         BackboneCache<Scalar>& cache) const {
    if (input.rows() != config_.input_channels ||
        input.cols() != static_cast<Eigen::Index>(n) * config_.input_height * config_.input_width)
      throw ContractError("backbone: input shape mismatch");
    cache.batch = n;
    cache.cols.resize(weights_.size());
    cache.activations.resize(weights_.size());
    cache.min_abs_preactivation = std::numeric_limits<Scalar>::infinity();
    const Matrix<Scalar>* x = &input;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      cache.cols[l] = im2col(*x, n, extents_[l], extents_[l + 1], config_.kernel, config_.stride, config_.padding);
      Matrix<Scalar> z = params[weights_[l]] * cache.cols[l];
      z.colwise() += params[biases_[l]].col(0);
      cache.min_abs_preactivation = std::min(cache.min_abs_preactivation, z.cwiseAbs().minCoeff());
      cache.activations[l] = z.cwiseMax(Scalar(0));
      x = &cache.activations[l];
    }
    const int area = extents_.back().area();
    const Eigen::Index k = x->rows();
    cache.pooled.resize(k, n);
    for (int s = 0; s < n; ++s)
      cache.pooled.col(s) = x->middleCols(static_cast<Eigen::Index>(s) * area, area).rowwise().mean();
    Matrix<Scalar> features = params[proj_w_] * cache.pooled;
    features.colwise() += params[proj_b_].col(0);
    return features;
  }

  /// Gradient of a scalar objective wrt the last spatial stage, given its gradient wrt the features.
  Matrix<Scalar> spatial_gradient(const Parameters<Scalar>& params, const BackboneCache<Scalar>& cache,
                                  const Matrix<Scalar>& d_features) const {
    const int n = cache.batch;
    const int area = extents_.back().area();
    const Matrix<Scalar> d_pooled = params[proj_w_].transpose() * d_features;
    Matrix<Scalar> d_spatial(d_pooled.rows(), static_cast<Eigen::Index>(n) * area);
    for (int s = 0; s < n; ++s)
      d_spatial.middleCols(static_cast<Eigen::Index>(s) * area, area).colwise() =
          d_pooled.col(s) / static_cast<Scalar>(area);
    return d_spatial;
  }

  /// Accumulates parameter gradients into `grads` (same layout as the parameters).
  void backward(const Parameters<Scalar>& params, const BackboneCache<Scalar>& cache,
                const Matrix<Scalar>& d_features, Parameters<Scalar>& grads) const {
    const int n = cache.batch;
    grads[proj_w_].noalias() += d_features * cache.pooled.transpose();
    grads[proj_b_].col(0) += d_features.rowwise().sum();

    Matrix<Scalar> d_act = spatial_gradient(params, cache, d_features);
    for (std::size_t l = weights_.size(); l-- > 0;) {
      d_act = (cache.activations[l].array() > Scalar(0)).select(d_act, Scalar(0));
      grads[weights_[l]].noalias() += d_act * cache.cols[l].transpose();
      grads[biases_[l]].col(0) += d_act.rowwise().sum();
      if (l == 0) break;
      const Matrix<Scalar> d_cols = params[weights_[l]].transpose() * d_act;
      d_act = col2im(d_cols, cache.activations[l - 1].rows(), n, extents_[l], extents_[l + 1], config_.kernel,
                     config_.stride, config_.padding);
    }
  }

 private:
  BackboneConfig config_;
  std::vector<int> weights_, biases_;
  std::vector<Extent> extents_;
  int proj_w_ = -1, proj_b_ = -1;
};

}  // namespace smad::nn
