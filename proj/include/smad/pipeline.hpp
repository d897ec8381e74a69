#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "smad/benchmark.hpp"
#include "smad/dataprep.hpp"
#include "smad/explain.hpp"
#include "smad/training.hpp"

// Workflow stages shared by the command-line tool and the end-to-end tests.
// Dataset layout under a root D:
//   D/manifest.json           bona fide toy faces (synth)
//   D/plan.json               identity split, pairs and held-out identities (pair)
//   D/train_manifest.json     training identities plus their morphs/self-morphs (morph)
//   D/eval_manifest.json      held-out bona fides, protocol morphs, self-morphs (protocol)
//   D/protocols/index.json    protocol lists over eval_manifest paths (protocol)
//   D/aligned/<setting>/...   aligned copies with the same relative paths (align)
namespace smad::pipeline {

namespace fs = std::filesystem;

inline const std::string kManifestFile = "manifest.json";
inline const std::string kPlanFile = "plan.json";
inline const std::string kTrainManifest = "train_manifest.json";
inline const std::string kEvalManifest = "eval_manifest.json";
inline const std::string kProtocolIndex = "protocols/index.json";

struct RunOptions {
  bool force = false;        // redo stages whose outputs are already current
  std::ostream* log = nullptr;
};

/// True when `stamp` records `key` (and `force` is off).
bool is_current(const fs::path& stamp, const std::string& key, const RunOptions& run);
void write_stamp(const fs::path& stamp, const std::string& key);

struct SynthOptions {
  int identities = 40;
  int images_per_identity = 50;
  std::uint64_t seed = 1;
};
Manifest synth(const fs::path& root, const SynthOptions& opt, const RunOptions& run = {});

/// SHA-256 over the manifest plus every file it references, in manifest order.
std::string dataset_hash(const fs::path& root, const std::string& manifest_name = kManifestFile);

struct PairOptions {
  std::uint64_t seed = 1;
  int holdout = 0;
  int pairs_per_identity = 4;
};
PairingPlan pair(const fs::path& root, const PairOptions& opt, const RunOptions& run = {});

struct MorphOptions {
  std::uint64_t seed = 1;
  double alpha = 0.5;
  double selfmorph_fraction = 0.3;
};
/// Training identities of the plan plus one morph per pair and the self-morphs.
Manifest morph(const fs::path& root, const MorphOptions& opt, const RunOptions& run = {});

struct ProtocolOptions {
  std::uint64_t seed = 1;
  std::vector<double> alphas{0.5, 0.35, 0.65};
  int pairs_per_identity = 20;
  double selfmorph_fraction = 0.3;
};
/// Protocol name for a morph weight, e.g. 0.35 -> "ldm-a35".
std::string protocol_name(double alpha);
/// Held-out identities: bona fides shared by every protocol, one morph list per alpha.
std::vector<ProtocolSpec> protocols(const fs::path& root, const ProtocolOptions& opt, const RunOptions& run = {});

struct AlignOptions {
  std::string setting = "d";
  std::string manifest = kTrainManifest;
  fs::path out;  // defaults to root/aligned/<setting>
};
/// Aligned images and landmarks under the output root, with an identical manifest.
fs::path align(const fs::path& root, const AlignOptions& opt, const RunOptions& run = {});

struct TrainOutputs {
  fs::path dir;
  fs::path checkpoint;
  fs::path log;
  bool cached = false;
};
/// Train on `manifest` under the aligned root. With an empty `out` the run goes to a
/// content-addressed directory under `runs_root`.
TrainOutputs train(const fs::path& aligned_root, const std::string& manifest, const TrainConfig& cfg,
                   const fs::path& out, const fs::path& runs_root, const RunOptions& run = {});

/// Score every sample of `manifest` (or only `only` paths when non-empty).
std::vector<ScoreRecord> score(const fs::path& checkpoint, const fs::path& aligned_root, const std::string& manifest,
                               const fs::path& out, const RunOptions& run = {});

/// report.csv, report.txt and DET plots per protocol in `out`.
MetricsReport eval(const fs::path& protocol_index, const fs::path& scores, const fs::path& out);

struct HeatmapOptions {
  std::string sample_class = "morph";
  int limit = 0;  // 0 = all samples of the class
};
struct HeatmapResult {
  int count = 0;
  double agir = 0;
  Eigen::MatrixXd mean;
};
HeatmapResult heatmap(const fs::path& checkpoint, const fs::path& aligned_root, const std::string& manifest,
                      const HeatmapOptions& opt, const fs::path& out);

struct SweepOptions {
  std::vector<std::string> settings;  // empty = all eleven
  std::vector<Variant> variants{Variant::fused};
  TrainConfig train;
};
struct SweepResult {
  std::map<std::string, SweepTable> tables;  // by variant name
  std::vector<std::string> failures;
};
/// Align, train, score and evaluate per setting and variant, then tabulate.
SweepResult sweep(const fs::path& root, const fs::path& out, const SweepOptions& opt, const RunOptions& run = {});

}  // namespace smad::pipeline
