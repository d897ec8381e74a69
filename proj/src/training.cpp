#include "smad/training.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "smad/numfmt.hpp"
#include "smad/png.hpp"
#include "smad/random.hpp"

namespace smad {

void TrainConfig::validate() const {
  if (!(lr_start > lr_end && lr_end > 0)) throw DomainError("learning rates must satisfy lr_start > lr_end > 0");
  if (epochs < 1) throw DomainError("epochs must be >= 1");
  if (batch_size < 1) throw DomainError("batch_size must be >= 1");
  if (momentum < 0 || momentum >= 1) throw DomainError("momentum must lie in [0, 1)");
  if (!weights.valid()) throw DomainError("loss weights must be non-negative");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"momentum", c.momentum},
          {"lr_start", c.lr_start},
          {"lr_end", c.lr_end},
          {"nesterov", c.nesterov},
          {"seed", c.seed},
          {"alignment_setting", c.alignment_setting},
          {"variant", std::string(to_string(c.variant))},
          {"loss_weights", to_json(c.weights)},
          {"backbone", nn::to_json(c.backbone)},
          {"projection_gain", c.projection_gain}};
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
  try {
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.momentum = j.value("momentum", c.momentum);
    c.lr_start = j.value("lr_start", c.lr_start);
    c.lr_end = j.value("lr_end", c.lr_end);
    c.nesterov = j.value("nesterov", c.nesterov);
    c.seed = j.value("seed", c.seed);
    c.alignment_setting = j.value("alignment_setting", c.alignment_setting);
    if (j.contains("variant")) c.variant = parse_variant(j.at("variant").get<std::string>());
    if (j.contains("loss_weights")) c.weights = loss_weights_from_json(j.at("loss_weights"));
    if (j.contains("backbone")) c.backbone = nn::backbone_config_from_json(j.at("backbone"));
    c.projection_gain = j.value("projection_gain", c.projection_gain);
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("bad training config: ") + e.what());
  }
  return c;
}

double lr_at(long step, long total_steps, const TrainConfig& cfg) {
  if (total_steps < 1) throw ContractError("lr_at: total_steps must be >= 1");
  if (step < 0 || step > total_steps) throw ContractError("lr_at: step out of range");
  if (step == total_steps) return cfg.lr_end;
  return cfg.lr_start + (cfg.lr_end - cfg.lr_start) * static_cast<double>(step) / static_cast<double>(total_steps);
}

std::string TrainLog::to_csv() const {
  std::string out = "step,epoch,lr,L1,L2,L3,total\n";
  for (const auto& r : rows) {
    out += std::to_string(r.step) + ',' + std::to_string(r.epoch) + ',' + format_double(r.lr) + ',' +
           format_double(r.L1) + ',' + format_double(r.L2) + ',' + format_double(r.L3) + ',' +
           format_double(r.total) + '\n';
  }
  return out;
}

TrainLog parse_train_log(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line) || line != "step,epoch,lr,L1,L2,L3,total")
    throw IntegrityError("train log: unexpected header");
  TrainLog log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 7) throw IntegrityError("train log: bad row '" + line + "'");
    log.rows.push_back({static_cast<long>(parse_double(f[0])), static_cast<int>(parse_double(f[1])),
                        parse_double(f[2]), parse_double(f[3]), parse_double(f[4]), parse_double(f[5]),
                        parse_double(f[6])});
  }
  return log;
}

TrainingSet load_training_set(const Manifest& manifest, const std::filesystem::path& root) {
  TrainingSet set;
  set.manifest = assign_training_labels(manifest);
  set.images.reserve(manifest.size());
  for (const auto& s : set.manifest.entries()) set.images.push_back(read_png(root / s.path));
  return set;
}

long steps_per_epoch(std::size_t n_samples, int batch_size) {
  return static_cast<long>((n_samples + static_cast<std::size_t>(batch_size) - 1) / static_cast<std::size_t>(batch_size));
}

TrainResult train(const TrainingSet& data, const TrainConfig& cfg, const StepCallback& on_step) {
  cfg.validate();
  if (data.manifest.empty()) throw DomainError("cannot train on an empty manifest");
  if (data.images.size() != data.manifest.size()) throw ContractError("training set images and manifest differ");

  ModelConfig mc;
  mc.variant = cfg.variant;
  mc.backbone = cfg.backbone;
  mc.num_classes = static_cast<int>(data.manifest.num_classes());
  mc.weights = cfg.weights;
  mc.alignment_setting = cfg.alignment_setting;
  TrainResult result{Model<float>(mc), {}};
  Model<float>& model = result.model;
  model.initialize(cfg.seed, {.projection_gain = cfg.projection_gain});

  Parameters<float> grads = model.parameters().zeros_like();
  Parameters<float> velocity = model.parameters().zeros_like();
  const std::size_t n = data.manifest.size();
  const long per_epoch = steps_per_epoch(n, cfg.batch_size);
  const long total = per_epoch * cfg.epochs;
  std::vector<std::size_t> order(n);
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = Rng::derive({cfg.seed, 0x7A1, static_cast<std::uint64_t>(epoch)});
    rng.shuffle(order);
    for (long b = 0; b < per_epoch; ++b, ++step) {
      const std::size_t lo = static_cast<std::size_t>(b) * cfg.batch_size;
      const std::size_t hi = std::min(n, lo + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const ImageU8*> images;
      std::vector<const Sample*> samples;
      for (std::size_t k = lo; k < hi; ++k) {
        images.push_back(&data.images[order[k]]);
        samples.push_back(&data.manifest.entries()[order[k]]);
      }
      const auto batch = make_batch<float>(images, samples, cfg.backbone);
      grads.set_zero();
      const LossBundle loss = model.forward(batch, &grads);
      const double lr = lr_at(step, total, cfg);
      if (!std::isfinite(loss.total) || !grads.all_finite()) {
        std::string ids;
        for (const Sample* s : samples) ids += (ids.empty() ? "" : ", ") + s->path;
        throw NumericError("non-finite loss at step " + std::to_string(step) + " (epoch " + std::to_string(epoch) +
                           "), batch: " + ids);
      }
      sgd_step(model.parameters(), grads, velocity, lr, cfg.momentum, cfg.nesterov);
      TrainLogRow row{step, epoch, lr, loss.L1, loss.L2, loss.L3, loss.total};
      result.log.rows.push_back(row);
      if (on_step) on_step(row);
    }
  }
  return result;
}

}  // namespace smad
