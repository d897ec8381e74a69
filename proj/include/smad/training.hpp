#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "smad/dataprep.hpp"
#include "smad/model.hpp"

namespace smad {

struct TrainConfig {
  int epochs = 5;
  int batch_size = 28;
  double momentum = 0.9;
  double lr_start = 0.075;
  double lr_end = 1e-5;
  bool nesterov = false;
  std::uint64_t seed = 0;
  std::string alignment_setting = "d";
  Variant variant = Variant::fused;
  LossWeights weights;
  nn::BackboneConfig backbone;
  double projection_gain = 0.1;

  /// DomainError unless lr_start > lr_end > 0, epochs >= 1, batch_size >= 1.
  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

nlohmann::json to_json(const TrainConfig& c);
/// Missing keys keep their defaults (or the values already in `base`).
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

/// Linear per-step decay from lr_start (step 0) to lr_end (step == total_steps).
double lr_at(long step, long total_steps, const TrainConfig& cfg);

/// v <- momentum v + g; p <- p - lr v (or p - lr (g + momentum v) with Nesterov).
template <typename Scalar>
void sgd_step(Parameters<Scalar>& params, const Parameters<Scalar>& grads, Parameters<Scalar>& velocity, double lr,
              double momentum, bool nesterov = false) {
  if (!params.same_layout(grads) || !params.same_layout(velocity))
    throw ContractError("sgd_step: parameter, gradient and velocity layouts differ");
  const auto m = static_cast<Scalar>(momentum);
  const auto a = static_cast<Scalar>(lr);
  for (int i = 0; i < params.size(); ++i) {
    velocity[i] = m * velocity[i] + grads[i];
    if (nesterov)
      params[i] -= a * (grads[i] + m * velocity[i]);
    else
      params[i] -= a * velocity[i];
  }
}

struct TrainLogRow {
  long step = 0;
  int epoch = 0;
  double lr = 0;
  double L1 = 0, L2 = 0, L3 = 0, total = 0;
  friend bool operator==(const TrainLogRow&, const TrainLogRow&) = default;
};

struct TrainLog {
  std::vector<TrainLogRow> rows;
  std::string to_csv() const;
  friend bool operator==(const TrainLog&, const TrainLog&) = default;
};

TrainLog parse_train_log(std::string_view csv);

/// Manifest with training labels plus its decoded (already aligned) images.
struct TrainingSet {
  Manifest manifest;
  std::vector<ImageU8> images;
};

/// Read every image of `manifest` relative to `root` and assign training labels.
TrainingSet load_training_set(const Manifest& manifest, const std::filesystem::path& root);

long steps_per_epoch(std::size_t n_samples, int batch_size);

struct TrainResult {
  Model<float> model;
  TrainLog log;
};

using StepCallback = std::function<void(const TrainLogRow&)>;

/// Seeded, single-threaded SGD over `cfg.epochs` epochs of ceil(N / batch) steps.
/// Throws DomainError on an empty set and NumericError on a non-finite loss.
TrainResult train(const TrainingSet& data, const TrainConfig& cfg, const StepCallback& on_step = {});

}  // namespace smad
