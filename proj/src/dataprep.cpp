#include "smad/dataprep.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "smad/random.hpp"

namespace smad {

std::string_view to_string(Authenticity a) {
  switch (a) {
    case Authenticity::bona_fide: return "bona_fide";
    case Authenticity::selfmorph: return "selfmorph";
    case Authenticity::morph: return "morph";
  }
  return "bona_fide";
}

Authenticity parse_authenticity(std::string_view s) {
  if (s == "bona_fide") return Authenticity::bona_fide;
  if (s == "selfmorph") return Authenticity::selfmorph;
  if (s == "morph") return Authenticity::morph;
  throw IntegrityError("unknown authenticity '" + std::string(s) + "'");
}

void Sample::validate() const {
  if (path.empty()) throw IntegrityError("sample without image path");
  if (first_label.empty() || second_label.empty()) throw IntegrityError("sample " + path + " lacks identity labels");
  const bool same = first_label == second_label;
  if (authenticity == Authenticity::morph && same)
    throw IntegrityError("morph sample " + path + " has identical source labels");
  if (authenticity != Authenticity::morph && !same)
    throw IntegrityError("non-morph sample " + path + " has differing labels");
}

Manifest::Manifest(std::vector<Sample> entries) : entries_(std::move(entries)) {
  std::set<std::string> labels;
  for (const auto& s : entries_) {
    s.validate();
    labels.insert(s.first_label);
    labels.insert(s.second_label);
  }
  identities_.assign(labels.begin(), labels.end());
}

int Manifest::class_index(const std::string& label) const {
  auto it = std::lower_bound(identities_.begin(), identities_.end(), label);
  if (it == identities_.end() || *it != label) throw IntegrityError("identity '" + label + "' not in manifest index");
  return static_cast<int>(it - identities_.begin());
}

std::map<std::string, std::vector<std::size_t>> Manifest::by_identity(Authenticity which) const {
  std::map<std::string, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (entries_[i].authenticity == which) out[entries_[i].first_label].push_back(i);
  return out;
}

Manifest concat(const Manifest& a, const Manifest& b) {
  std::vector<Sample> all = a.entries();
  all.insert(all.end(), b.entries().begin(), b.entries().end());
  return Manifest(std::move(all));
}

Manifest filter_identities(const Manifest& m, const std::vector<std::string>& identities) {
  const std::set<std::string> keep(identities.begin(), identities.end());
  std::vector<Sample> out;
  for (const auto& s : m.entries())
    if (keep.count(s.first_label) && keep.count(s.second_label)) out.push_back(s);
  return Manifest(std::move(out));
}

nlohmann::json to_json(const Manifest& m) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& s : m.entries()) {
    entries.push_back({{"path", s.path},
                       {"lm5_path", s.lm5_path},
                       {"lm68_path", s.lm68_path},
                       {"first_label", s.first_label},
                       {"second_label", s.second_label},
                       {"authenticity", std::string(to_string(s.authenticity))},
                       {"provenance", s.provenance}});
  }
  return {{"identity_index", m.identities()}, {"entries", std::move(entries)}};
}

Manifest manifest_from_json(const nlohmann::json& j) {
  try {
    std::vector<Sample> entries;
    for (const auto& e : j.at("entries")) {
      Sample s;
      s.path = e.at("path").get<std::string>();
      s.lm5_path = e.value("lm5_path", "");
      s.lm68_path = e.value("lm68_path", "");
      s.first_label = e.at("first_label").get<std::string>();
      s.second_label = e.at("second_label").get<std::string>();
      s.authenticity = parse_authenticity(e.at("authenticity").get<std::string>());
      s.provenance = e.value("provenance", nlohmann::json::object());
      entries.push_back(std::move(s));
    }
    Manifest m(std::move(entries));
    if (j.contains("identity_index") && j.at("identity_index").get<std::vector<std::string>>() != m.identities())
      throw IntegrityError("manifest identity_index does not match its entries");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("malformed manifest: ") + e.what());
  }
}

std::string serialize_manifest(const Manifest& m) { return to_json(m).dump(2) + "\n"; }

Manifest parse_manifest(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("manifest is not valid JSON: ") + e.what());
  }
  return manifest_from_json(j);
}

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace

void write_manifest(const std::filesystem::path& path, const Manifest& m) { spit(path, serialize_manifest(m)); }

Manifest read_manifest(const std::filesystem::path& path) { return parse_manifest(slurp(path)); }

void PairingPlan::validate() const {
  const std::set<std::string> first(subset_first.begin(), subset_first.end());
  const std::set<std::string> second(subset_second.begin(), subset_second.end());
  for (const auto& id : first)
    if (second.count(id)) throw IntegrityError("identity " + id + " is in both subsets");
  for (const auto& id : holdout)
    if (first.count(id) || second.count(id)) throw IntegrityError("held-out identity " + id + " is in a subset");
  for (const auto& p : pairs)
    if (!first.count(p.first) || !second.count(p.second))
      throw IntegrityError("pair (" + p.first + ", " + p.second + ") does not cross the subsets");
}

nlohmann::json to_json(const PairingPlan& p) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& pr : p.pairs) pairs.push_back({{"first", pr.first}, {"second", pr.second}, {"seed", pr.seed}});
  return {{"subset_first", p.subset_first},
          {"subset_second", p.subset_second},
          {"holdout", p.holdout},
          {"pairs", std::move(pairs)}};
}

PairingPlan plan_from_json(const nlohmann::json& j) {
  try {
    PairingPlan p;
    p.subset_first = j.at("subset_first").get<std::vector<std::string>>();
    p.subset_second = j.at("subset_second").get<std::vector<std::string>>();
    p.holdout = j.value("holdout", std::vector<std::string>{});
    for (const auto& e : j.at("pairs"))
      p.pairs.push_back({e.at("first").get<std::string>(), e.at("second").get<std::string>(),
                         e.at("seed").get<std::uint64_t>()});
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError(std::string("malformed pairing plan: ") + e.what());
  }
}

void write_plan(const std::filesystem::path& path, const PairingPlan& p) { spit(path, to_json(p).dump(2) + "\n"); }

PairingPlan read_plan(const std::filesystem::path& path) {
  try {
    return plan_from_json(nlohmann::json::parse(slurp(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw IntegrityError(std::string("pairing plan is not valid JSON: ") + e.what());
  }
}

HoldoutSplit hold_out(const std::vector<std::string>& identities, std::size_t count, std::uint64_t seed) {
  if (count > identities.size()) throw DomainError("cannot hold out more identities than exist");
  std::vector<std::string> ids = identities;
  std::sort(ids.begin(), ids.end());
  auto rng = Rng::derive({seed, 0x401D});
  rng.shuffle(ids);
  HoldoutSplit out;
  out.holdout.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(count));
  out.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(count), ids.end());
  std::sort(out.holdout.begin(), out.holdout.end());
  std::sort(out.train.begin(), out.train.end());
  return out;
}

PairingPlan split_identities(const std::vector<std::string>& identities, std::uint64_t seed) {
  std::vector<std::string> ids = identities;
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.size() < 2) throw DomainError("split_identities: need at least 2 identities");
  auto rng = Rng::derive({seed, 0x5B11});
  rng.shuffle(ids);
  const auto half = static_cast<std::ptrdiff_t>((ids.size() + 1) / 2);
  PairingPlan plan;
  plan.subset_first.assign(ids.begin(), ids.begin() + half);
  plan.subset_second.assign(ids.begin() + half, ids.end());
  std::sort(plan.subset_first.begin(), plan.subset_first.end());
  std::sort(plan.subset_second.begin(), plan.subset_second.end());
  return plan;
}

PairingPlan split_identities(const Manifest& manifest, std::uint64_t seed) {
  return split_identities(manifest.identities(), seed);
}

PairingPlan make_pairs(PairingPlan plan, int pairs_per_identity, std::uint64_t seed) {
  if (plan.subset_first.empty() || plan.subset_second.empty())
    throw DomainError("make_pairs: both subsets must be non-empty");
  plan.pairs.clear();
  auto rng = Rng::derive({seed, 0xFA125});
  std::vector<std::string> partners = plan.subset_second;
  rng.shuffle(partners);
  std::size_t cursor = 0;
  for (const auto& first : plan.subset_first) {
    for (int k = 0; k < pairs_per_identity; ++k) {
      if (cursor == partners.size()) {
        // Reshuffle, avoiding an immediate repeat across the permutation boundary.
        const std::string last = partners.back();
        rng.shuffle(partners);
        if (partners.size() > 1 && partners.front() == last) std::swap(partners.front(), partners.back());
        cursor = 0;
      }
      plan.pairs.push_back({first, partners[cursor++], rng.next()});
    }
  }
  plan.validate();
  return plan;
}

Manifest assign_training_labels(const Manifest& manifest) {
  std::vector<Sample> out = manifest.entries();
  for (auto& s : out) {
    s.first_class = manifest.class_index(s.first_label);
    s.second_class = manifest.class_index(s.second_label);
    s.target = detection_target(s.authenticity);
  }
  return Manifest(std::move(out));
}

}  // namespace smad
