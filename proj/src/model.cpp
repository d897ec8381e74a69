#include "smad/model.hpp"

namespace smad {

std::string_view to_string(Variant v) { return v == Variant::fused ? "fused" : "binary"; }

Variant parse_variant(std::string_view s) {
  if (s == "fused") return Variant::fused;
  if (s == "binary") return Variant::binary;
  throw DomainError("unknown variant '" + std::string(s) + "' (expected fused or binary)");
}

nlohmann::json to_json(const LossWeights& w) {
  return {{"alpha1", w.alpha1}, {"alpha2", w.alpha2}, {"beta", w.beta}};
}

LossWeights loss_weights_from_json(const nlohmann::json& j) {
  LossWeights w;
  w.alpha1 = j.value("alpha1", w.alpha1);
  w.alpha2 = j.value("alpha2", w.alpha2);
  w.beta = j.value("beta", w.beta);
  if (!w.valid()) throw DomainError("loss weights must be non-negative");
  return w;
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"variant", std::string(to_string(c.variant))},
          {"backbone", nn::to_json(c.backbone)},
          {"num_classes", c.num_classes},
          {"feature_dim", c.backbone.feature_dim},
          {"loss_weights", to_json(c.weights)},
          {"alignment_setting", c.alignment_setting}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  try {
    ModelConfig c;
    c.variant = parse_variant(j.at("variant").get<std::string>());
    c.backbone = nn::backbone_config_from_json(j.at("backbone"));
    c.num_classes = j.at("num_classes").get<int>();
    c.weights = loss_weights_from_json(j.at("loss_weights"));
    c.alignment_setting = j.at("alignment_setting").get<std::string>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("malformed model config: ") + e.what());
  }
}

}  // namespace smad
