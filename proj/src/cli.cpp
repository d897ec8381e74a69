#include "smad/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "smad/hash.hpp"
#include "smad/numfmt.hpp"
#include "smad/pipeline.hpp"

namespace smad::cli {

namespace pl = smad::pipeline;
namespace fs = std::filesystem;

std::vector<std::string> config_to_flags(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw CLI::ValidationError("--config", std::string("not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw CLI::ValidationError("--config", "top level must be an object");
  std::vector<std::string> flags;
  for (const auto& [key, value] : j.items()) {
    if (value.is_object() || value.is_null()) continue;  // nested sections are read by the command itself
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (value.is_boolean()) {
      if (value.get<bool>()) flags.push_back(flag);
    } else if (value.is_array()) {
      std::string joined;
      for (const auto& v : value) joined += (joined.empty() ? "" : ",") + (v.is_string() ? v.get<std::string>() : v.dump());
      flags.push_back(flag);
      flags.push_back(joined);
    } else {
      flags.push_back(flag);
      flags.push_back(value.is_string() ? value.get<std::string>() : value.dump());
    }
  }
  return flags;
}

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw CLI::ValidationError("--config", "cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Optional training overrides shared by train and sweep.
struct TrainFlags {
  std::optional<int> epochs, batch_size;
  std::optional<double> momentum, lr_start, lr_end, projection_gain;
  bool nesterov = false;

  void add(CLI::App* app) {
    app->add_option("--epochs", epochs, "training epochs")->check(CLI::PositiveNumber);
    app->add_option("--batch-size", batch_size, "images per step")->check(CLI::PositiveNumber);
    app->add_option("--momentum", momentum, "SGD momentum")->check(CLI::Range(0.0, 0.999999));
    app->add_option("--lr-start", lr_start, "initial learning rate")->check(CLI::PositiveNumber);
    app->add_option("--lr-end", lr_end, "final learning rate")->check(CLI::PositiveNumber);
    app->add_option("--projection-gain", projection_gain, "init scale of the feature projection");
    app->add_flag("--nesterov", nesterov, "Nesterov momentum instead of classical");
  }

  TrainConfig apply(TrainConfig c) const {
    if (epochs) c.epochs = *epochs;
    if (batch_size) c.batch_size = *batch_size;
    if (momentum) c.momentum = *momentum;
    if (lr_start) c.lr_start = *lr_start;
    if (lr_end) c.lr_end = *lr_end;
    if (projection_gain) c.projection_gain = *projection_gain;
    if (nesterov) c.nesterov = true;
    return c;
  }
};

struct Common {
  std::string config;
  std::uint64_t seed = 1;
  bool force = false;

  void add(CLI::App* app, bool with_seed = true) {
    app->add_option("--config", config, "JSON file with flag defaults")->check(CLI::ExistingFile);
    if (with_seed) app->add_option("--seed", seed, "root seed for all randomness");
    app->add_flag("--force", force, "recompute even if outputs are current");
  }
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

/// The "train" section of a config file, if any.
TrainConfig train_base(const std::string& config_path) {
  if (config_path.empty()) return {};
  const auto j = nlohmann::json::parse(slurp(config_path));
  return j.contains("train") ? train_config_from_json(j.at("train")) : TrainConfig{};
}

}  // namespace

int run(const std::vector<std::string>& raw_args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Single-image morphing attack detection toolkit"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  Common common;
  pl::RunOptions run_opts;
  run_opts.log = &err;
  std::string stage;

  // synth
  pl::SynthOptions synth_opt;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "render a toy face dataset");
  synth->add_option("--out", synth_out, "dataset root")->required();
  synth->add_option("--identities", synth_opt.identities, "number of identities")->check(CLI::Range(2, 1000000));
  synth->add_option("--per-id", synth_opt.images_per_identity, "images per identity")->check(CLI::Range(1, 1000000));
  common.add(synth);

  // pair
  pl::PairOptions pair_opt;
  std::string root;
  auto* pair = app.add_subcommand("pair", "split identities and plan morph pairs");
  pair->add_option("--root", root, "dataset root")->required()->check(CLI::ExistingDirectory);
  pair->add_option("--holdout", pair_opt.holdout, "identities reserved for evaluation")->check(CLI::NonNegativeNumber);
  pair->add_option("--pairs-per-id", pair_opt.pairs_per_identity, "partners per first-subset identity")
      ->check(CLI::PositiveNumber);
  common.add(pair);

  // morph
  pl::MorphOptions morph_opt;
  auto* morph = app.add_subcommand("morph", "generate training morphs and self-morphs");
  morph->add_option("--root", root, "dataset root")->required()->check(CLI::ExistingDirectory);
  morph->add_option("--alpha", morph_opt.alpha, "blend weight")->check(CLI::Range(0.0, 1.0));
  morph->add_option("--selfmorph-fraction", morph_opt.selfmorph_fraction, "self-morphs per morph")
      ->check(CLI::NonNegativeNumber);
  common.add(morph);

  // protocol
  pl::ProtocolOptions proto_opt;
  std::string alphas;
  auto* protocol = app.add_subcommand("protocol", "build held-out evaluation protocols");
  protocol->add_option("--root", root, "dataset root")->required()->check(CLI::ExistingDirectory);
  protocol->add_option("--alphas", alphas, "comma-separated blend weights, one protocol each");
  protocol->add_option("--pairs-per-id", proto_opt.pairs_per_identity, "morphs per held-out identity")
      ->check(CLI::PositiveNumber);
  protocol->add_option("--selfmorph-fraction", proto_opt.selfmorph_fraction, "self-morphs per morph")
      ->check(CLI::NonNegativeNumber);
  common.add(protocol);

  // align
  pl::AlignOptions align_opt;
  std::string align_out;
  auto* align = app.add_subcommand("align", "align a manifest to one setting");
  align->add_option("--root", root, "dataset root")->required()->check(CLI::ExistingDirectory);
  align->add_option("--setting", align_opt.setting, "alignment setting a-k")
      ->check(CLI::IsMember({"a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k"}));
  align->add_option("--manifest", align_opt.manifest, "manifest file name under the root");
  align->add_option("--out", align_out, "output root (default <root>/aligned/<setting>)");
  common.add(align, false);

  // train
  std::string train_manifest = pl::kTrainManifest, train_out, runs_dir, variant_name = "fused", train_setting;
  TrainFlags train_flags;
  auto* train = app.add_subcommand("train", "train a detector on an aligned manifest");
  train->add_option("--root", root, "aligned root")->required()->check(CLI::ExistingDirectory);
  train->add_option("--manifest", train_manifest, "manifest file name under the root");
  train->add_option("--out", train_out, "run directory (default: content-addressed under --runs)");
  train->add_option("--runs", runs_dir, "parent of content-addressed runs (default <root>/runs)");
  train->add_option("--variant", variant_name, "fused or binary")->check(CLI::IsMember({"fused", "binary"}));
  train->add_option("--setting", train_setting, "alignment id recorded in the checkpoint");
  train_flags.add(train);
  common.add(train);

  // score
  std::string checkpoint, score_manifest = pl::kEvalManifest, score_out;
  auto* score = app.add_subcommand("score", "write detection scores for a manifest");
  score->add_option("--checkpoint", checkpoint, "model checkpoint")->required()->check(CLI::ExistingFile);
  score->add_option("--root", root, "aligned root")->required()->check(CLI::ExistingDirectory);
  score->add_option("--manifest", score_manifest, "manifest file name under the root");
  score->add_option("--out", score_out, "score file")->required();
  common.add(score, false);

  // eval
  std::string protocol_index, scores_path, eval_out;
  auto* eval = app.add_subcommand("eval", "BPCER@APCER, EER and DET per protocol");
  eval->add_option("--protocols", protocol_index, "protocol index JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--scores", scores_path, "score file")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", eval_out, "report directory");
  common.add(eval, false);

  // heatmap
  pl::HeatmapOptions heat_opt;
  std::string heat_manifest = pl::kEvalManifest, heat_out;
  auto* heat = app.add_subcommand("heatmap", "Grad-CAM maps, mean map and AGIR for one sample class");
  heat->add_option("--checkpoint", checkpoint, "model checkpoint")->required()->check(CLI::ExistingFile);
  heat->add_option("--root", root, "aligned root")->required()->check(CLI::ExistingDirectory);
  heat->add_option("--manifest", heat_manifest, "manifest file name under the root");
  heat->add_option("--class", heat_opt.sample_class, "bona_fide, selfmorph or morph")
      ->check(CLI::IsMember({"bona_fide", "selfmorph", "morph"}));
  heat->add_option("--limit", heat_opt.limit, "at most this many images (0 = all)")->check(CLI::NonNegativeNumber);
  heat->add_option("--out", heat_out, "output directory")->required();
  common.add(heat, false);

  // sweep
  std::string sweep_out, settings, sweep_variant = "fused";
  TrainFlags sweep_flags;
  auto* sweep = app.add_subcommand("sweep", "align, train, score and evaluate across settings");
  sweep->add_option("--root", root, "dataset root")->required()->check(CLI::ExistingDirectory);
  sweep->add_option("--out", sweep_out, "sweep directory")->required();
  sweep->add_option("--settings", settings, "comma-separated setting ids (default all)");
  sweep->add_option("--variant", sweep_variant, "fused, binary or both")
      ->check(CLI::IsMember({"fused", "binary", "both"}));
  sweep_flags.add(sweep);
  common.add(sweep);

  // Config values go first so that explicit flags take precedence.
  std::vector<std::string> args(raw_args.begin() + (raw_args.empty() ? 0 : 1), raw_args.end());
  try {
    for (std::size_t i = 0; i + 1 < args.size(); ++i) {
      if (args[i] == "--config") {
        common.config = args[i + 1];
        const auto flags = config_to_flags(slurp(args[i + 1]));
        args.insert(args.begin() + 1, flags.begin(), flags.end());
        break;
      }
    }
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  try {
    run_opts.force = common.force;
    if (synth->parsed()) {
      stage = "synth";
      synth_opt.seed = common.seed;
      const auto m = pl::synth(synth_out, synth_opt, run_opts);
      out << m.size() << " images, dataset hash " << pl::dataset_hash(synth_out) << "\n";
    } else if (pair->parsed()) {
      stage = "pair";
      pair_opt.seed = common.seed;
      const auto plan = pl::pair(root, pair_opt, run_opts);
      out << plan.subset_first.size() << "+" << plan.subset_second.size() << " identities, " << plan.pairs.size()
          << " pairs, " << plan.holdout.size() << " held out\n";
    } else if (morph->parsed()) {
      stage = "morph";
      morph_opt.seed = common.seed;
      out << pl::morph(root, morph_opt, run_opts).size() << " training samples\n";
    } else if (protocol->parsed()) {
      stage = "protocol";
      proto_opt.seed = common.seed;
      if (!alphas.empty()) {
        proto_opt.alphas.clear();
        for (const auto& a : split_list(alphas)) proto_opt.alphas.push_back(parse_double(a));
      }
      for (const auto& p : pl::protocols(root, proto_opt, run_opts))
        out << p.name << ": " << p.bona_fide.size() << " bona fide, " << p.morph.size() << " morphs\n";
    } else if (align->parsed()) {
      stage = "align";
      align_opt.out = align_out;
      out << pl::align(root, align_opt, run_opts).string() << "\n";
    } else if (train->parsed()) {
      stage = "train";
      TrainConfig cfg = train_flags.apply(train_base(common.config));
      cfg.seed = common.seed;
      cfg.variant = parse_variant(variant_name);
      if (!train_setting.empty()) cfg.alignment_setting = train_setting;
      const auto o = pl::train(root, train_manifest, cfg, train_out,
                               runs_dir.empty() ? fs::path(root) / "runs" : fs::path(runs_dir), run_opts);
      out << o.checkpoint.string() << "\n";
    } else if (score->parsed()) {
      stage = "score";
      out << pl::score(checkpoint, root, score_manifest, score_out, run_opts).size() << " scores\n";
    } else if (eval->parsed()) {
      stage = "eval";
      out << pl::eval(protocol_index, scores_path, eval_out).to_text();
    } else if (heat->parsed()) {
      stage = "heatmap";
      const auto r = pl::heatmap(checkpoint, root, heat_manifest, heat_opt, heat_out);
      out << r.count << " heatmaps, AGIR " << format_double(r.agir) << "\n";
    } else if (sweep->parsed()) {
      stage = "sweep";
      pl::SweepOptions so;
      so.settings = split_list(settings);
      so.variants = sweep_variant == "both" ? std::vector<Variant>{Variant::fused, Variant::binary}
                                            : std::vector<Variant>{parse_variant(sweep_variant)};
      so.train = sweep_flags.apply(train_base(common.config));
      so.train.seed = common.seed;
      const auto r = pl::sweep(root, sweep_out, so, run_opts);
      for (const auto& [v, table] : r.tables) out << v << "\n" << table.to_text();
      if (!r.failures.empty()) {
        err << "smad sweep: " << r.failures.size() << " setting(s) failed:\n";
        for (const auto& f : r.failures) err << "  " << f << "\n";
        return kFailure;
      }
    }
    return kOk;
  } catch (const DomainError& e) {
    err << "smad " << stage << ": usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const IntegrityError& e) {
    err << "smad " << stage << ": data integrity error: " << e.what() << "\n";
    return kIntegrity;
  } catch (const NumericError& e) {
    err << "smad " << stage << ": numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    err << "smad " << stage << ": error: " << e.what() << "\n";
    return kFailure;
  }
}

}  // namespace smad::cli
