#include "smad/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "smad/checkpoint.hpp"
#include "smad/geometry.hpp"
#include "smad/hash.hpp"
#include "smad/morph.hpp"
#include "smad/numfmt.hpp"
#include "smad/png.hpp"
#include "smad/synthfaces.hpp"

namespace smad::pipeline {

namespace {

constexpr int kStageVersion = 1;
constexpr int kScoreChunk = 32;

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

void note(const RunOptions& run, const std::string& msg) {
  if (run.log) *run.log << msg << std::endl;
}

std::string key_of(const nlohmann::json& j) { return sha256_hex(j.dump()); }

void require_file(const fs::path& p, const std::string& hint) {
  if (!fs::exists(p)) throw IntegrityError("missing " + p.string() + " (" + hint + ")");
}

std::vector<std::string> union_sorted(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::set<std::string> s(a.begin(), a.end());
  s.insert(b.begin(), b.end());
  return {s.begin(), s.end()};
}

std::string sanitize(const std::string& path) {
  std::string out;
  for (char c : fs::path(path).replace_extension().string()) out += (c == '/' || c == '\\') ? '_' : c;
  return out;
}

}  // namespace

bool is_current(const fs::path& stamp, const std::string& key, const RunOptions& run) {
  if (run.force || !fs::exists(stamp)) return false;
  try {
    return nlohmann::json::parse(slurp(stamp)).value("key", "") == key;
  } catch (const nlohmann::json::exception&) {
    return false;
  }
}

void write_stamp(const fs::path& stamp, const std::string& key) {
  spit(stamp, nlohmann::json{{"key", key}}.dump() + "\n");
}

Manifest synth(const fs::path& root, const SynthOptions& opt, const RunOptions& run) {
  if (opt.identities < 2) throw DomainError("synth: need at least 2 identities");
  if (opt.images_per_identity < 1) throw DomainError("synth: need at least 1 image per identity");
  const std::string key = key_of({{"stage", "synth"},
                                  {"v", kStageVersion},
                                  {"identities", opt.identities},
                                  {"per_id", opt.images_per_identity},
                                  {"seed", opt.seed}});
  const auto stamp = root / ".synth.stamp";
  if (is_current(stamp, key, run) && fs::exists(root / kManifestFile)) {
    note(run, "synth: up to date");
    return read_manifest(root / kManifestFile);
  }
  note(run, "synth: rendering " + std::to_string(opt.identities * opt.images_per_identity) + " images");
  Manifest m = make_dataset(opt.identities, opt.images_per_identity, opt.seed, root);
  write_stamp(stamp, key);
  return m;
}

std::string dataset_hash(const fs::path& root, const std::string& manifest_name) {
  const std::string text = slurp(root / manifest_name);
  std::string digests = sha256_hex(text);
  const Manifest m = parse_manifest(text);
  for (const auto& s : m.entries()) {
    digests += file_sha256(root / s.path);
    if (!s.lm5_path.empty()) digests += file_sha256(root / s.lm5_path);
    if (!s.lm68_path.empty()) digests += file_sha256(root / s.lm68_path);
  }
  return sha256_hex(digests);
}

PairingPlan pair(const fs::path& root, const PairOptions& opt, const RunOptions& run) {
  require_file(root / kManifestFile, "run synth first");
  if (opt.holdout < 0) throw DomainError("pair: holdout must be >= 0");
  if (opt.pairs_per_identity < 1) throw DomainError("pair: pairs per identity must be >= 1");
  const std::string key = key_of({{"stage", "pair"},
                                  {"v", kStageVersion},
                                  {"seed", opt.seed},
                                  {"holdout", opt.holdout},
                                  {"ppi", opt.pairs_per_identity},
                                  {"manifest", file_sha256(root / kManifestFile)}});
  const auto stamp = root / ".pair.stamp";
  if (is_current(stamp, key, run) && fs::exists(root / kPlanFile)) {
    note(run, "pair: up to date");
    return read_plan(root / kPlanFile);
  }
  const Manifest m = read_manifest(root / kManifestFile);
  const auto split = hold_out(m.identities(), static_cast<std::size_t>(opt.holdout), opt.seed);
  if (split.train.size() < 2) throw DomainError("pair: fewer than 2 training identities remain after holdout");
  PairingPlan plan = make_pairs(split_identities(split.train, opt.seed), opt.pairs_per_identity, opt.seed);
  plan.holdout = split.holdout;
  plan.validate();
  write_plan(root / kPlanFile, plan);
  write_stamp(stamp, key);
  note(run, "pair: " + std::to_string(plan.pairs.size()) + " pairs, " + std::to_string(plan.holdout.size()) +
                " held-out identities");
  return plan;
}

Manifest morph(const fs::path& root, const MorphOptions& opt, const RunOptions& run) {
  require_file(root / kManifestFile, "run synth first");
  require_file(root / kPlanFile, "run pair first");
  const std::string key = key_of({{"stage", "morph"},
                                  {"v", kStageVersion},
                                  {"seed", opt.seed},
                                  {"alpha", opt.alpha},
                                  {"selfmorph_fraction", opt.selfmorph_fraction},
                                  {"manifest", file_sha256(root / kManifestFile)},
                                  {"plan", file_sha256(root / kPlanFile)}});
  const auto stamp = root / ".morph.stamp";
  if (is_current(stamp, key, run) && fs::exists(root / kTrainManifest)) {
    note(run, "morph: up to date");
    return read_manifest(root / kTrainManifest);
  }
  const Manifest all = read_manifest(root / kManifestFile);
  const PairingPlan plan = read_plan(root / kPlanFile);
  const Manifest train_ids = filter_identities(all, union_sorted(plan.subset_first, plan.subset_second));
  MorphSetOptions mo;
  mo.alpha = opt.alpha;
  mo.selfmorph_fraction = opt.selfmorph_fraction;
  mo.seed = opt.seed;
  mo.subdir = "morphs";
  const auto result = generate_morph_set(train_ids, root, plan, mo);
  write_manifest(root / kTrainManifest, result.manifest);
  write_stamp(stamp, key);
  note(run, "morph: " + std::to_string(result.morphs) + " morphs, " + std::to_string(result.selfmorphs) +
                " self-morphs");
  return result.manifest;
}

std::string protocol_name(double alpha) {
  return "ldm-a" + std::to_string(static_cast<int>(std::lround(alpha * 100)));
}

std::vector<ProtocolSpec> protocols(const fs::path& root, const ProtocolOptions& opt, const RunOptions& run) {
  require_file(root / kManifestFile, "run synth first");
  require_file(root / kPlanFile, "run pair first");
  if (opt.alphas.empty()) throw DomainError("protocol: need at least one morph weight");
  const std::string key = key_of({{"stage", "protocol"},
                                  {"v", kStageVersion},
                                  {"seed", opt.seed},
                                  {"alphas", opt.alphas},
                                  {"ppi", opt.pairs_per_identity},
                                  {"selfmorph_fraction", opt.selfmorph_fraction},
                                  {"manifest", file_sha256(root / kManifestFile)},
                                  {"plan", file_sha256(root / kPlanFile)}});
  const auto stamp = root / ".protocol.stamp";
  if (is_current(stamp, key, run) && fs::exists(root / kProtocolIndex) && fs::exists(root / kEvalManifest)) {
    note(run, "protocol: up to date");
    return read_protocols(root / kProtocolIndex);
  }
  const Manifest all = read_manifest(root / kManifestFile);
  const PairingPlan plan = read_plan(root / kPlanFile);
  if (plan.holdout.size() < 2) throw DomainError("protocol: need at least 2 held-out identities (pair --holdout)");
  const Manifest held = filter_identities(all, plan.holdout);
  PairingPlan eval_plan = make_pairs(split_identities(plan.holdout, opt.seed ^ 0xE7A1), opt.pairs_per_identity,
                                     opt.seed ^ 0xE7A1);

  std::vector<std::string> bona_fide;
  for (const auto& s : held.entries()) bona_fide.push_back(s.path);
  std::vector<Sample> eval_entries = held.entries();
  std::vector<ProtocolSpec> specs;
  for (std::size_t k = 0; k < opt.alphas.size(); ++k) {
    const std::string name = protocol_name(opt.alphas[k]);
    MorphSetOptions mo;
    mo.alpha = opt.alphas[k];
    mo.selfmorph_fraction = k == 0 ? opt.selfmorph_fraction : 0.0;
    mo.seed = opt.seed;
    mo.subdir = "protocols/" + name;
    const auto result = generate_morph_set(held, root, eval_plan, mo);
    ProtocolSpec spec{name, bona_fide, {}};
    for (std::size_t i = held.size(); i < result.manifest.size(); ++i) {
      const Sample& s = result.manifest.entries()[i];
      eval_entries.push_back(s);
      if (s.authenticity == Authenticity::morph) spec.morph.push_back(s.path);
    }
    specs.push_back(std::move(spec));
  }
  write_manifest(root / kEvalManifest, Manifest(std::move(eval_entries)));
  write_protocols(root / kProtocolIndex, specs);
  write_stamp(stamp, key);
  note(run, "protocol: " + std::to_string(specs.size()) + " protocols over " + std::to_string(bona_fide.size()) +
                " bona fide images");
  return read_protocols(root / kProtocolIndex);
}

fs::path align(const fs::path& root, const AlignOptions& opt, const RunOptions& run) {
  require_file(root / opt.manifest, "manifest to align");
  if (opt.setting.size() != 1) throw DomainError("align: setting must be a single letter a-k");
  const AlignmentSetting setting = setting_by_id(opt.setting[0]);
  const fs::path out = opt.out.empty() ? root / "aligned" / opt.setting : opt.out;
  const std::string key = key_of({{"stage", "align"},
                                  {"v", kStageVersion},
                                  {"setting", to_json(setting)},
                                  {"manifest", file_sha256(root / opt.manifest)}});
  const auto stamp = out / (".align-" + opt.manifest + ".stamp");
  if (is_current(stamp, key, run) && fs::exists(out / opt.manifest)) {
    note(run, "align " + opt.setting + " " + opt.manifest + ": up to date");
    return out;
  }
  const Manifest m = read_manifest(root / opt.manifest);
  note(run, "align " + opt.setting + ": " + std::to_string(m.size()) + " images from " + opt.manifest);
  for (const auto& s : m.entries()) {
    const ImageU8 img = read_png(root / s.path);
    const Landmarks5d lm5 = to_landmarks5(read_sample_landmarks(root, s.lm5_path, s.path, 5));
    const AlignedImage a = warp_to_setting(img, lm5, setting);
    write_png(out / s.path, a.image);
    write_landmarks_csv(out / s.lm5_path, {{s.path, a.transform.apply(lm5.points)}});
    if (!s.lm68_path.empty()) {
      const Points2<double> lm68 = read_sample_landmarks(root, s.lm68_path, s.path, 68);
      write_landmarks_csv(out / s.lm68_path, {{s.path, a.transform.apply(lm68)}});
    }
  }
  write_manifest(out / opt.manifest, m);
  write_stamp(stamp, key);
  return out;
}

TrainOutputs train(const fs::path& aligned_root, const std::string& manifest, const TrainConfig& cfg,
                   const fs::path& out, const fs::path& runs_root, const RunOptions& run) {
  cfg.validate();
  require_file(aligned_root / manifest, "run align first");
  const std::string key = key_of({{"stage", "train"},
                                  {"v", kStageVersion},
                                  {"config", to_json(cfg)},
                                  {"data", dataset_hash(aligned_root, manifest)}});
  TrainOutputs o;
  o.dir = out.empty() ? runs_root / (std::string(to_string(cfg.variant)) + "-" + cfg.alignment_setting + "-" +
                                     key.substr(0, 16))
                      : out;
  o.checkpoint = o.dir / "model.ckpt";
  o.log = o.dir / "train_log.csv";
  const auto stamp = o.dir / ".train.stamp";
  if (is_current(stamp, key, run) && fs::exists(o.checkpoint)) {
    note(run, "train: cached checkpoint " + o.checkpoint.string());
    o.cached = true;
    return o;
  }
  const TrainingSet data = load_training_set(read_manifest(aligned_root / manifest), aligned_root);
  note(run, "train " + std::string(to_string(cfg.variant)) + "/" + cfg.alignment_setting + ": " +
                std::to_string(data.manifest.size()) + " samples, " +
                std::to_string(cfg.epochs * steps_per_epoch(data.manifest.size(), cfg.batch_size)) + " steps");
  const long per_epoch = steps_per_epoch(data.manifest.size(), cfg.batch_size);
  const TrainResult result = smad::train(data, cfg, [&](const TrainLogRow& r) {
    if (run.log && (r.step + 1) % per_epoch == 0)
      *run.log << "  epoch " << r.epoch << " step " << r.step << " total " << format_fixed(r.total, 4) << std::endl;
  });
  fs::create_directories(o.dir);
  write_checkpoint(o.checkpoint, make_checkpoint(result.model, {{"train_config", to_json(cfg)}}));
  spit(o.log, result.log.to_csv());
  spit(o.dir / "train_config.json", to_json(cfg).dump(2) + "\n");
  write_stamp(stamp, key);
  return o;
}

std::vector<ScoreRecord> score(const fs::path& checkpoint, const fs::path& aligned_root, const std::string& manifest,
                               const fs::path& out, const RunOptions& run) {
  require_file(checkpoint, "checkpoint");
  require_file(aligned_root / manifest, "aligned manifest");
  const std::string key = key_of({{"stage", "score"},
                                  {"v", kStageVersion},
                                  {"checkpoint", file_sha256(checkpoint)},
                                  {"data", dataset_hash(aligned_root, manifest)}});
  auto stamp = out;
  stamp += ".stamp";
  if (!out.empty() && is_current(stamp, key, run) && fs::exists(out)) {
    note(run, "score: up to date");
    return read_scores(out);
  }
  const auto model = model_from_checkpoint<float>(read_checkpoint(checkpoint));
  const Manifest m = read_manifest(aligned_root / manifest);
  const auto& bc = model.config().backbone;
  std::vector<ScoreRecord> records;
  for (std::size_t lo = 0; lo < m.size(); lo += kScoreChunk) {
    const std::size_t hi = std::min(m.size(), lo + kScoreChunk);
    std::vector<ImageU8> imgs;
    for (std::size_t i = lo; i < hi; ++i) imgs.push_back(read_png(aligned_root / m.entries()[i].path));
    std::vector<const ImageU8*> ptrs;
    for (const auto& im : imgs) ptrs.push_back(&im);
    const auto s = model.scores(make_input<float>(ptrs, bc.input_height, bc.input_width, bc.input_channels),
                                static_cast<int>(ptrs.size()));
    for (std::size_t i = lo; i < hi; ++i) records.push_back({m.entries()[i].path, s[i - lo]});
  }
  if (!out.empty()) {
    write_scores(out, records);
    write_stamp(stamp, key);
  }
  note(run, "score: " + std::to_string(records.size()) + " images");
  return records;
}

MetricsReport eval(const fs::path& protocol_index, const fs::path& scores, const fs::path& out) {
  const auto specs = read_protocols(protocol_index);
  const MetricsReport report = evaluate(specs, read_scores(scores));
  if (!out.empty()) {
    spit(out / "report.csv", report.to_csv());
    spit(out / "report.txt", report.to_text());
    for (const auto& p : report.protocols) {
      const std::vector<DetSeries> series{{p.name, p.det}};
      spit(out / ("det_" + p.name + ".svg"), det_plot_svg(series, "DET " + p.name));
      write_det_plot_png(out / ("det_" + p.name + ".png"), series);
    }
  }
  return report;
}

HeatmapResult heatmap(const fs::path& checkpoint, const fs::path& aligned_root, const std::string& manifest,
                      const HeatmapOptions& opt, const fs::path& out) {
  const Authenticity cls = parse_authenticity(opt.sample_class);
  const auto model = model_from_checkpoint<float>(read_checkpoint(checkpoint));
  const Manifest m = read_manifest(aligned_root / manifest);
  std::vector<Heatmap> maps;
  Points2<double> lm_sum = Points2<double>::Zero(2, 68);
  int lm_count = 0;
  HeatmapResult result;
  for (const auto& s : m.entries()) {
    if (s.authenticity != cls) continue;
    if (opt.limit > 0 && result.count >= opt.limit) break;
    const ImageU8 img = read_png(aligned_root / s.path);
    Heatmap h = grad_cam(model, img, detection_target(s.authenticity));
    if (!out.empty())
      write_heatmap(out / (sanitize(s.path) + ".png"), h,
                    {{"path", s.path},
                     {"target", detection_target(s.authenticity)},
                     {"alignment", model.config().alignment_setting},
                     {"variant", std::string(to_string(model.variant()))}});
    if (!s.lm68_path.empty()) {
      lm_sum += read_sample_landmarks(aligned_root, s.lm68_path, s.path, 68);
      ++lm_count;
    }
    maps.push_back(std::move(h));
    ++result.count;
  }
  if (maps.empty()) throw DomainError("heatmap: no samples of class " + opt.sample_class + " in " + manifest);
  if (lm_count == 0) throw IntegrityError("heatmap: samples carry no 68-point landmarks for the face mask");
  result.mean = mean_heatmap(maps);
  const auto& bc = model.config().backbone;
  const MaskPair masks = face_masks(Points2<double>(lm_sum / lm_count), {bc.input_height, bc.input_width});
  result.agir = agir(result.mean, masks);
  if (!out.empty()) {
    write_heatmap(out / ("mean_" + opt.sample_class + ".png"), normalize_heatmap(result.mean),
                  {{"count", result.count},
                   {"sample_class", opt.sample_class},
                   {"alignment", model.config().alignment_setting},
                   {"variant", std::string(to_string(model.variant()))}});
    spit(out / "agir.csv", serialize_agir_csv({{std::string(to_string(model.variant())),
                                                 model.config().alignment_setting, opt.sample_class, result.agir}}));
  }
  return result;
}

SweepResult sweep(const fs::path& root, const fs::path& out, const SweepOptions& opt, const RunOptions& run) {
  require_file(root / kTrainManifest, "run morph first");
  require_file(root / kEvalManifest, "run protocol first");
  require_file(root / kProtocolIndex, "run protocol first");
  std::vector<std::string> settings = opt.settings;
  if (settings.empty())
    for (const auto& s : canonical_settings()) settings.push_back(std::string(1, s.id));
  SweepResult result;
  for (Variant variant : opt.variants) {
    const std::string vname(to_string(variant));
    std::map<std::string, MetricsReport> reports;
    for (const auto& setting : settings) {
      try {
        const fs::path aligned = align(root, {setting, kTrainManifest, {}}, run);
        align(root, {setting, kEvalManifest, {}}, run);
        TrainConfig cfg = opt.train;
        cfg.variant = variant;
        cfg.alignment_setting = setting;
        const auto trained = train(aligned, kTrainManifest, cfg, {}, out / "runs", run);
        const fs::path dir = out / vname / setting;
        const fs::path scores = dir / "scores.csv";
        score(trained.checkpoint, aligned, kEvalManifest, scores, run);
        reports[setting] = eval(root / kProtocolIndex, scores, dir);
      } catch (const std::exception& e) {
        result.failures.push_back(vname + "/" + setting + ": " + e.what());
        note(run, "sweep: " + result.failures.back());
      }
    }
    if (reports.empty()) continue;
    const SweepTable table = sweep_report(reports);
    spit(out / ("sweep_" + vname + ".csv"), table.to_csv());
    spit(out / ("sweep_" + vname + ".txt"), table.to_text());
    for (const auto& proto : table.protocols) {
      std::vector<DetSeries> series;
      for (const auto& [setting, report] : reports) series.push_back({setting, report.at(proto).det});
      spit(out / ("det_" + vname + "_" + proto + ".svg"), det_plot_svg(series, vname + " " + proto));
      write_det_plot_png(out / ("det_" + vname + "_" + proto + ".png"), series);
    }
    result.tables[vname] = table;
  }
  std::string summary;
  for (const auto& f : result.failures) summary += f + "\n";
  spit(out / "sweep_failures.txt", summary);
  return result;
}

}  // namespace smad::pipeline
