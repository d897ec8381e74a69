#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "smad/errors.hpp"

namespace smad {

enum class Authenticity { bona_fide, selfmorph, morph };

std::string_view to_string(Authenticity a);
Authenticity parse_authenticity(std::string_view s);

/// Binary detection target polarity: 1 marks bona fide (self-morphs included),
/// 0 marks a morph. Scores are read the same way: high means bona fide.
inline constexpr int kBonaFideTarget = 1;
inline constexpr int kMorphTarget = 0;

inline int detection_target(Authenticity a) {
  return a == Authenticity::morph ? kMorphTarget : kBonaFideTarget;
}

/// One image with its dual identity labels. Paths are relative to the
/// directory holding the manifest file.
struct Sample {
  std::string path;
  std::string lm5_path;
  std::string lm68_path;
  std::string first_label;
  std::string second_label;
  Authenticity authenticity = Authenticity::bona_fide;
  nlohmann::json provenance = nlohmann::json::object();

  // Set by assign_training_labels; -1 until then.
  int first_class = -1;
  int second_class = -1;
  int target = -1;

  /// Throws IntegrityError when the label/authenticity pairing is inconsistent.
  void validate() const;

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Samples plus the dense identity index (labels sorted lexicographically).
class Manifest {
 public:
  Manifest() = default;
  explicit Manifest(std::vector<Sample> entries);

  const std::vector<Sample>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  const std::vector<std::string>& identities() const { return identities_; }
  std::size_t num_classes() const { return identities_.size(); }

  /// Dense class index of a label; IntegrityError when unknown.
  int class_index(const std::string& label) const;

  /// Indices of entries with the given authenticity, grouped by first label.
  std::map<std::string, std::vector<std::size_t>> by_identity(Authenticity which) const;

  friend bool operator==(const Manifest&, const Manifest&) = default;

 private:
  std::vector<Sample> entries_;
  std::vector<std::string> identities_;
};

Manifest concat(const Manifest& a, const Manifest& b);

/// Keep only samples whose both labels belong to `identities`.
Manifest filter_identities(const Manifest& m, const std::vector<std::string>& identities);

nlohmann::json to_json(const Manifest& m);
Manifest manifest_from_json(const nlohmann::json& j);
std::string serialize_manifest(const Manifest& m);
Manifest parse_manifest(std::string_view text);
void write_manifest(const std::filesystem::path& path, const Manifest& m);
Manifest read_manifest(const std::filesystem::path& path);

struct IdentityPair {
  std::string first;
  std::string second;
  std::uint64_t seed = 0;  // drives the image choice within each identity
  friend bool operator==(const IdentityPair&, const IdentityPair&) = default;
};

/// Disjoint identity subsets for the two branches and the cross-subset pairs.
/// `holdout` lists identities reserved for evaluation and excluded from both subsets.
struct PairingPlan {
  std::vector<std::string> subset_first;
  std::vector<std::string> subset_second;
  std::vector<IdentityPair> pairs;
  std::vector<std::string> holdout;

  /// Throws IntegrityError when subsets overlap or a pair does not cross them.
  void validate() const;
  friend bool operator==(const PairingPlan&, const PairingPlan&) = default;
};

nlohmann::json to_json(const PairingPlan& p);
PairingPlan plan_from_json(const nlohmann::json& j);
void write_plan(const std::filesystem::path& path, const PairingPlan& p);
PairingPlan read_plan(const std::filesystem::path& path);

/// Split the identities of `identities` into `count` held-out labels and the rest.
struct HoldoutSplit {
  std::vector<std::string> train;
  std::vector<std::string> holdout;
};
HoldoutSplit hold_out(const std::vector<std::string>& identities, std::size_t count, std::uint64_t seed);

/// Balanced seeded split of the identities into two subsets (sizes differ by <= 1).
PairingPlan split_identities(const std::vector<std::string>& identities, std::uint64_t seed);
PairingPlan split_identities(const Manifest& manifest, std::uint64_t seed);

/// Pair every first-subset identity with `pairs_per_identity` partners from the
/// second subset, cycling through a seeded permutation so consecutive partners differ.
PairingPlan make_pairs(PairingPlan plan, int pairs_per_identity, std::uint64_t seed);

/// Attach dense class indices and the detection target to every sample.
Manifest assign_training_labels(const Manifest& manifest);

}  // namespace smad
