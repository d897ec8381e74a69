#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "smad/benchmark.hpp"
#include "smad/cli.hpp"
#include "smad/pipeline.hpp"

using namespace smad;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result smad_run(std::vector<std::string> args) {
  args.insert(args.begin(), "smad");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

/// A small prepared dataset shared by the tests: 8 identities x 4 images, 2 held out.
const fs::path& dataset() {
  static const fs::path root = [] {
    const fs::path r = fs::temp_directory_path() / "smad_test_cli" / "ds";
    fs::remove_all(r.parent_path());
    const std::string s = r.string();
    REQUIRE(smad_run({"synth", "--out", s, "--identities", "8", "--per-id", "4", "--seed", "3"}).code == 0);
    REQUIRE(smad_run({"pair", "--root", s, "--holdout", "2", "--pairs-per-id", "2", "--seed", "3"}).code == 0);
    REQUIRE(smad_run({"morph", "--root", s, "--seed", "3"}).code == 0);
    REQUIRE(smad_run({"protocol", "--root", s, "--pairs-per-id", "2", "--seed", "3"}).code == 0);
    REQUIRE(smad_run({"align", "--root", s, "--setting", "d"}).code == 0);
    REQUIRE(smad_run({"align", "--root", s, "--setting", "d", "--manifest", "eval_manifest.json"}).code == 0);
    return r;
  }();
  return root;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "smad_test_cli" / name;
  fs::remove_all(p);
  return p;
}

/// Train a one-epoch binary model on the aligned set and return its checkpoint.
fs::path trained_checkpoint() {
  static const fs::path ckpt = [] {
    const fs::path out = scratch("run");
    const auto r = smad_run({"train", "--root", (dataset() / "aligned/d").string(), "--variant", "binary", "--epochs",
                             "1", "--batch-size", "8", "--out", out.string()});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    return out / "model.ckpt";
  }();
  return ckpt;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(smad_run({"synth", "--out", scratch("x").string(), "--identities", "1"}).code == 2);
  CHECK(smad_run({"synth", "--bogus"}).code == 2);
  CHECK(smad_run({"frobnicate"}).code == 2);
  CHECK(smad_run({}).code == 2);
  const auto r = smad_run({"align", "--root", dataset().string(), "--setting", "q"});
  CHECK(r.code == 2);
}

TEST_CASE("synth is reproducible and idempotent") {
  const fs::path a = scratch("sa"), b = scratch("sb");
  REQUIRE(smad_run({"synth", "--out", a.string(), "--identities", "3", "--per-id", "2", "--seed", "9"}).code == 0);
  REQUIRE(smad_run({"synth", "--out", b.string(), "--identities", "3", "--per-id", "2", "--seed", "9"}).code == 0);
  CHECK(pipeline::dataset_hash(a) == pipeline::dataset_hash(b));

  const auto stamp_time = fs::last_write_time(a / "id_0000/img_0.png");
  const auto again = smad_run({"synth", "--out", a.string(), "--identities", "3", "--per-id", "2", "--seed", "9"});
  CHECK(again.code == 0);
  CHECK(fs::last_write_time(a / "id_0000/img_0.png") == stamp_time);

  const auto forced =
      smad_run({"synth", "--out", a.string(), "--identities", "3", "--per-id", "2", "--seed", "9", "--force"});
  CHECK(forced.code == 0);
  CHECK(pipeline::dataset_hash(a) == pipeline::dataset_hash(b));
}

TEST_CASE("config files supply defaults and flags override them") {
  const fs::path dir = scratch("cfg");
  fs::create_directories(dir);
  std::ofstream(dir / "c.json") << R"({"identities": 2, "per_id": 3, "seed": 4})";
  REQUIRE(smad_run({"synth", "--out", (dir / "a").string(), "--config", (dir / "c.json").string()}).code == 0);
  CHECK(read_manifest(dir / "a/manifest.json").size() == 6);
  REQUIRE(smad_run({"synth", "--out", (dir / "b").string(), "--config", (dir / "c.json").string(), "--per-id", "1"})
              .code == 0);
  CHECK(read_manifest(dir / "b/manifest.json").size() == 2);

  const auto flags = cli::config_to_flags(R"({"lr_start": 0.5, "nesterov": true, "variant": "binary"})");
  CHECK(std::find(flags.begin(), flags.end(), "--lr-start") != flags.end());
  CHECK(std::find(flags.begin(), flags.end(), "--nesterov") != flags.end());
}

TEST_CASE("eval with missing score rows exits with 3 and lists the paths") {
  const fs::path dir = scratch("missing");
  fs::create_directories(dir);
  const auto protos = read_protocols(dataset() / pipeline::kProtocolIndex);
  std::vector<ScoreRecord> partial;
  for (const auto& b : protos[0].bona_fide) partial.push_back({b, 0.5});
  write_scores(dir / "s.csv", partial);
  const auto r = smad_run({"eval", "--protocols", (dataset() / pipeline::kProtocolIndex).string(), "--scores",
                           (dir / "s.csv").string(), "--out", (dir / "r").string()});
  CHECK(r.code == 3);
  CHECK(r.err.find(protos[0].morph[0]) != std::string::npos);
}

TEST_CASE("numeric failure exits with 4") {
  const auto r = smad_run({"train", "--root", (dataset() / "aligned/d").string(), "--epochs", "1", "--batch-size",
                           "8", "--lr-start", "1e30", "--lr-end", "1e29", "--momentum", "0", "--projection-gain",
                           "1000", "--out", scratch("nan").string()});
  CHECK(r.code == 4);
  CHECK(r.err.find("step") != std::string::npos);
}

TEST_CASE("score then eval equals in-process evaluation") {
  const fs::path dir = scratch("score");
  const fs::path scores = dir / "scores.csv";
  const auto s = smad_run({"score", "--checkpoint", trained_checkpoint().string(), "--root",
                           (dataset() / "aligned/d").string(), "--manifest", "eval_manifest.json", "--out",
                           scores.string()});
  REQUIRE_MESSAGE(s.code == 0, s.err);
  const auto e = smad_run({"eval", "--protocols", (dataset() / pipeline::kProtocolIndex).string(), "--scores",
                           scores.string(), "--out", (dir / "report").string()});
  REQUIRE_MESSAGE(e.code == 0, e.err);
  const MetricsReport direct = evaluate(read_protocols(dataset() / pipeline::kProtocolIndex), read_scores(scores));
  CHECK(slurp(dir / "report/report.csv") == direct.to_csv());
  CHECK(fs::exists(dir / "report/report.txt"));
  for (const auto& p : direct.protocols) {
    CHECK(fs::exists(dir / "report" / ("det_" + p.name + ".svg")));
    CHECK(fs::exists(dir / "report" / ("det_" + p.name + ".png")));
  }
  // Re-scoring is a cache hit, and the file is unchanged.
  const auto before = slurp(scores);
  CHECK(smad_run({"score", "--checkpoint", trained_checkpoint().string(), "--root", (dataset() / "aligned/d").string(),
                  "--manifest", "eval_manifest.json", "--out", scores.string()})
            .code == 0);
  CHECK(slurp(scores) == before);
}

TEST_CASE("heatmap emits one map per sample of the class plus the mean") {
  const fs::path dir = scratch("heat");
  const auto r = smad_run({"heatmap", "--checkpoint", trained_checkpoint().string(), "--root",
                           (dataset() / "aligned/d").string(), "--manifest", "eval_manifest.json", "--class", "morph",
                           "--out", dir.string()});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const Manifest m = read_manifest(dataset() / "aligned/d/eval_manifest.json");
  std::size_t morphs = 0;
  for (const auto& s : m.entries()) morphs += s.authenticity == Authenticity::morph;
  std::size_t pngs = 0, sidecars = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.path().filename() == "mean_morph.png") continue;
    pngs += e.path().extension() == ".png";
    sidecars += e.path().extension() == ".json";
  }
  CHECK(pngs == morphs);
  CHECK(sidecars >= morphs);
  CHECK(fs::exists(dir / "mean_morph.png"));
  CHECK(slurp(dir / "agir.csv").rfind("variant,alignment,sample_class,agir\n", 0) == 0);
}

TEST_CASE("sweep over two settings yields a two-row table and resumes from cache") {
  const fs::path out = scratch("sweep");
  const std::vector<std::string> args{"sweep",     "--root",   dataset().string(), "--out",    out.string(),
                                      "--settings", "d,e",     "--variant",        "fused",    "--epochs",
                                      "1",          "--batch-size", "8"};
  const auto r = smad_run(args);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const std::string csv = slurp(out / "sweep_fused.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(csv.find("\nd,") != std::string::npos);
  CHECK(csv.find("\ne,") != std::string::npos);

  std::vector<fs::path> ckpts;
  for (const auto& e : fs::recursive_directory_iterator(out / "runs"))
    if (e.path().filename() == "model.ckpt") ckpts.push_back(e.path());
  REQUIRE(ckpts.size() == 2);
  const auto t0 = fs::last_write_time(ckpts[0]);
  const auto again = smad_run(args);
  CHECK(again.code == 0);
  CHECK(fs::last_write_time(ckpts[0]) == t0);
  CHECK(slurp(out / "sweep_fused.csv") == csv);
}
