#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <limits>

#include "smad/benchmark.hpp"
#include "smad/random.hpp"

using namespace smad;
namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Brute {
  double bpcer;
  double apcer;
  double threshold;
};

/// Exhaustive sweep over every candidate threshold, straight from the definitions.
Brute brute_operating_point(const std::vector<double>& bf, const std::vector<double>& mo, double delta) {
  std::vector<double> cand{-kInf, kInf};
  cand.insert(cand.end(), bf.begin(), bf.end());
  cand.insert(cand.end(), mo.begin(), mo.end());
  std::sort(cand.begin(), cand.end());
  for (double t : cand) {
    double a = 0, b = 0;
    for (double m : mo) a += m >= t;
    for (double s : bf) b += s < t;
    a /= mo.size();
    b /= bf.size();
    if (a <= delta) return {b, a, t};
  }
  return {1, 0, kInf};
}

double brute_auc(const std::vector<double>& bf, const std::vector<double>& mo) {
  double s = 0;
  for (double b : bf)
    for (double m : mo) s += b > m ? 1.0 : b == m ? 0.5 : 0.0;
  return s / (bf.size() * mo.size());
}

std::vector<double> draw(Rng& rng, std::size_t n, double shift, bool coarse) {
  std::vector<double> v(n);
  for (auto& x : v) {
    x = std::clamp(0.5 + 0.15 * rng.normal() + shift, 0.0, 1.0);
    if (coarse) x = std::round(x * 20) / 20;  // forces ties
  }
  return v;
}

ProtocolSpec protocol(std::string name, int n_bf, int n_m, int offset = 0) {
  ProtocolSpec p;
  p.name = std::move(name);
  for (int i = 0; i < n_bf; ++i) p.bona_fide.push_back("bf/" + std::to_string(i) + ".png");
  for (int i = 0; i < n_m; ++i) p.morph.push_back(p.name + "/m" + std::to_string(offset + i) + ".png");
  return p;
}

std::vector<ScoreRecord> scores_for(const std::vector<ProtocolSpec>& ps, Rng& rng) {
  std::vector<ScoreRecord> out;
  std::set<std::string> seen;
  for (const auto& p : ps) {
    for (const auto& b : p.bona_fide)
      if (seen.insert(b).second) out.push_back({b, std::clamp(0.7 + 0.2 * rng.normal(), 0.0, 1.0)});
    for (const auto& m : p.morph)
      if (seen.insert(m).second) out.push_back({m, std::clamp(0.3 + 0.2 * rng.normal(), 0.0, 1.0)});
  }
  return out;
}

}  // namespace

TEST_CASE("apcer_bpcer_at: separation and overlap") {
  const auto r = apcer_bpcer_at({0.9, 0.8}, {0.1, 0.2}, 0.1);
  CHECK(r.bpcer == 0.0);
  CHECK(r.apcer <= 0.1);

  std::vector<double> same{0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  CHECK(apcer_bpcer_at(same, same, 0.1).bpcer >= 0.9);
  CHECK_THROWS_AS(apcer_bpcer_at({}, {0.1}, 0.1), DomainError);
  CHECK_THROWS_AS(apcer_bpcer_at({0.1}, {}, 0.1), DomainError);
  CHECK_THROWS_AS(apcer_bpcer_at({0.1}, {0.2}, 0.0), DomainError);
  CHECK_THROWS_AS(apcer_bpcer_at({0.1}, {0.2}, 1.0), DomainError);
}

TEST_CASE("apcer_bpcer_at and det_curve match a brute-force sweep") {
  auto rng = Rng::derive({0xB0});
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t nb = 1 + rng.below(1000), nm = 1 + rng.below(1000);
    const bool coarse = rep % 3 == 0;
    const auto bf = draw(rng, nb, 0.1, coarse), mo = draw(rng, nm, -0.1, coarse);
    for (double delta : {0.1, 0.01, 0.37}) {
      const auto got = apcer_bpcer_at(bf, mo, delta);
      const auto want = brute_operating_point(bf, mo, delta);
      CHECK(got.bpcer == want.bpcer);
      CHECK(got.apcer == want.apcer);
      CHECK(got.threshold == want.threshold);
    }
    const auto det = det_curve(bf, mo);
    std::vector<double> cand(bf);
    cand.insert(cand.end(), mo.begin(), mo.end());
    std::sort(cand.begin(), cand.end());
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    cand.insert(cand.begin(), -kInf);
    cand.push_back(kInf);
    REQUIRE(det.size() == cand.size());
    for (std::size_t i = 0; i < det.size(); ++i) {
      double a = 0, b = 0;
      for (double m : mo) a += m >= cand[i];
      for (double s : bf) b += s < cand[i];
      CHECK(det[i].threshold == cand[i]);
      CHECK(det[i].apcer == a / nm);
      CHECK(det[i].bpcer == b / nb);
    }
    CHECK(roc_auc(bf, mo) == doctest::Approx(brute_auc(bf, mo)).epsilon(1e-12));
  }
}

TEST_CASE("det_curve extremes, monotonicity and overlap") {
  const auto sep = det_curve({0.8, 0.9}, {0.1, 0.2});
  CHECK(sep.front().apcer == 1.0);
  CHECK(sep.front().bpcer == 0.0);
  CHECK(sep.back().apcer == 0.0);
  CHECK(sep.back().bpcer == 1.0);
  bool origin = false;
  for (const auto& p : sep) origin |= p.apcer == 0 && p.bpcer == 0;
  CHECK(origin);
  for (std::size_t i = 1; i < sep.size(); ++i) {
    CHECK(sep[i].apcer <= sep[i - 1].apcer);
    CHECK(sep[i].bpcer >= sep[i - 1].bpcer);
  }

  auto rng = Rng::derive({0x0E});
  const auto v = draw(rng, 500, 0, false);
  for (const auto& p : det_curve(v, v)) CHECK(p.apcer + p.bpcer == doctest::Approx(1.0));
  CHECK(roc_auc(v, v) == doctest::Approx(0.5));
}

TEST_CASE("EER sits at the crossing of the curve") {
  auto rng = Rng::derive({0xEE});
  for (int rep = 0; rep < 50; ++rep) {
    const auto bf = draw(rng, 200, 0.1, false), mo = draw(rng, 150, -0.1, false);
    const auto det = det_curve(bf, mo);
    const auto e = equal_error_rate(det);
    double best = kInf;
    for (const auto& p : det) best = std::min(best, std::abs(p.apcer - p.bpcer));
    // The reported point is a curve point with minimal gap; the curve moves by at most one sample per step.
    const double step = 1.0 / 150 + 1.0 / 200;
    CHECK(best <= step);
    bool found = false;
    for (const auto& p : det)
      if (p.threshold == e.threshold) {
        found = true;
        CHECK(std::abs(p.apcer - p.bpcer) == best);
        CHECK(e.eer == doctest::Approx((p.apcer + p.bpcer) / 2));
      }
    CHECK(found);
  }
}

TEST_CASE("operating points are invariant under monotone transforms and duplication") {
  auto rng = Rng::derive({0x3A});
  for (int rep = 0; rep < 50; ++rep) {
    const auto bf = draw(rng, 300, 0.1, rep % 2 == 0), mo = draw(rng, 200, -0.1, rep % 2 == 0);
    const auto f = [](double x) { return std::exp(3 * x) / (1 + std::exp(3 * x)) * 0.5 + 0.1; };
    std::vector<double> tb, tm, db(bf), dm(mo);
    for (double x : bf) tb.push_back(f(x));
    for (double x : mo) tm.push_back(f(x));
    db.insert(db.end(), bf.begin(), bf.end());
    dm.insert(dm.end(), mo.begin(), mo.end());
    for (double delta : kReportDeltas) {
      const auto a = apcer_bpcer_at(bf, mo, delta);
      const auto t = apcer_bpcer_at(tb, tm, delta);
      const auto d = apcer_bpcer_at(db, dm, delta);
      CHECK(a.bpcer == t.bpcer);
      CHECK((std::isinf(a.threshold) ? t.threshold == a.threshold : t.threshold == f(a.threshold)));
      CHECK(a.bpcer == d.bpcer);
      CHECK(a.apcer == d.apcer);
    }
    CHECK(apcer_bpcer_at(bf, mo, 0.01).bpcer >= apcer_bpcer_at(bf, mo, 0.1).bpcer);
  }
}

TEST_CASE("evaluate joins by path and is order-free") {
  auto rng = Rng::derive({0xE7});
  const std::vector<ProtocolSpec> ps{protocol("p-a", 40, 30), protocol("p-b", 40, 25, 100)};
  auto scores = scores_for(ps, rng);
  const MetricsReport r = evaluate(ps, scores);
  REQUIRE(r.protocols.size() == 2);
  CHECK(r.at("p-a").n_bona_fide == 40);
  CHECK(r.at("p-b").n_morph == 25);
  CHECK(r.at("p-a").points.size() == 2);
  CHECK(r.at("p-a").points[0].delta == 0.1);
  CHECK(r.at("p-a").points[1].delta == 0.01);

  std::reverse(scores.begin(), scores.end());
  rng.shuffle(scores);
  CHECK(evaluate(ps, scores).to_csv() == r.to_csv());

  // Partition: evaluating each protocol alone gives the same rows.
  const MetricsReport ra = evaluate({ps[0]}, scores), rb = evaluate({ps[1]}, scores);
  CHECK(ra.to_csv() + rb.to_csv().substr(rb.to_csv().find('\n') + 1) == r.to_csv());

  // Perfect scores.
  std::vector<ScoreRecord> perfect;
  for (const auto& b : ps[0].bona_fide) perfect.push_back({b, 0.9});
  for (const auto& m : ps[0].morph) perfect.push_back({m, 0.1});
  const auto pr = evaluate({ps[0]}, perfect);
  CHECK(pr.at("p-a").points[0].bpcer == 0);
  CHECK(pr.at("p-a").points[1].bpcer == 0);
  CHECK(pr.at("p-a").auc == 1.0);

  const std::string csv = r.to_csv();
  CHECK(csv.rfind("protocol,delta,bpcer,apcer,threshold,eer,auc\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("evaluate lists every missing path") {
  const std::vector<ProtocolSpec> ps{protocol("p", 3, 2)};
  std::vector<ScoreRecord> s{{"bf/0.png", 0.5}, {"p/m1.png", 0.2}};
  try {
    evaluate(ps, s);
    FAIL("expected an integrity error");
  } catch (const IntegrityError& e) {
    const std::string w = e.what();
    CHECK(w.find("bf/1.png") != std::string::npos);
    CHECK(w.find("bf/2.png") != std::string::npos);
    CHECK(w.find("p/m0.png") != std::string::npos);
    CHECK(w.find("p/m1.png") == std::string::npos);
  }
}

TEST_CASE("protocol validation") {
  ProtocolSpec p = protocol("p", 2, 2);
  CHECK_NOTHROW(p.validate());
  p.morph.push_back(p.bona_fide[0]);
  CHECK_THROWS_AS(p.validate(), IntegrityError);
  CHECK_THROWS_AS(protocol("q", 0, 2).validate(), IntegrityError);
  CHECK_THROWS_AS(protocol("q", 2, 0).validate(), IntegrityError);
}

TEST_CASE("protocol files and score files round trip byte-identically") {
  const auto dir = fs::temp_directory_path() / "smad_test_benchmark";
  fs::remove_all(dir);
  const std::vector<ProtocolSpec> ps{protocol("ldm-a50", 5, 3), protocol("ldm-a35", 5, 4, 10)};
  write_protocols(dir / "index.json", ps);
  // The index is a JSON object, so protocols come back in name order.
  auto back = read_protocols(dir / "index.json");
  REQUIRE(back.size() == 2);
  CHECK(back[0] == ps[1]);
  CHECK(back[1] == ps[0]);
  write_protocols(dir / "again" / "index.json", back);
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream x(e.path(), std::ios::binary), y(dir / "again" / e.path().filename(), std::ios::binary);
    CHECK(std::string(std::istreambuf_iterator<char>(x), {}) == std::string(std::istreambuf_iterator<char>(y), {}));
  }
  CHECK(serialize_path_list(parse_path_list(serialize_path_list(ps[0].morph))) == serialize_path_list(ps[0].morph));

  auto rng = Rng::derive({0x5C});
  const auto scores = scores_for(ps, rng);
  const std::string text = serialize_scores(scores);
  CHECK(text.rfind(std::string(kPolarityHeader) + "\npath,score\n", 0) == 0);
  CHECK(parse_scores(text) == scores);
  CHECK(serialize_scores(parse_scores(text)) == text);
  write_scores(dir / "s.csv", scores);
  CHECK(read_scores(dir / "s.csv") == scores);

  CHECK_THROWS_AS(parse_scores("path,score\na,0.5\n"), IntegrityError);
  CHECK_THROWS_AS(parse_scores("# polarity=morph-high\npath,score\na,0.5\n"), IntegrityError);
  CHECK_THROWS_AS(parse_scores(std::string(kPolarityHeader) + "\npath,score\na,1.5\n"), IntegrityError);
  CHECK_THROWS_AS(parse_scores(std::string(kPolarityHeader) + "\npath,score\na,nan\n"), IntegrityError);
  CHECK_THROWS_AS(parse_scores(std::string(kPolarityHeader) + "\npath,score\na,0.1\na,0.2\n"), IntegrityError);
  fs::remove_all(dir);
}

TEST_CASE("sweep_report shape and best marks") {
  auto rng = Rng::derive({0x5E});
  const std::vector<ProtocolSpec> ps{protocol("p-a", 60, 40), protocol("p-b", 60, 40, 100)};
  std::map<std::string, MetricsReport> results;
  for (char c = 'a'; c <= 'k'; ++c) results[std::string(1, c)] = evaluate(ps, scores_for(ps, rng));
  const SweepTable t = sweep_report(results);
  CHECK(t.alignments.size() == 11);
  CHECK(t.protocols == std::vector<std::string>{"p-a", "p-b"});
  const std::string csv = t.to_csv();
  const auto first_nl = csv.find('\n');
  CHECK(csv.substr(0, first_nl) == "alignment,p-a@0.1,p-a@0.01,p-b@0.1,p-b@0.01");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 12);
  for (std::size_t col = 0; col < 4; ++col) {
    double lo = kInf;
    for (const auto& row : t.values) lo = std::min(lo, row[col]);
    int marked = 0;
    for (std::size_t r = 0; r < t.values.size(); ++r) {
      CHECK(t.best[r][col] == (t.values[r][col] == lo));
      marked += t.best[r][col];
    }
    CHECK(marked >= 1);
  }
  CHECK(std::count(csv.begin(), csv.end(), '*') >= 4);

  const SweepTable one = sweep_report({{"d", results.at("d")}});
  CHECK(one.values.size() == 1);
  const std::string one_csv = one.to_csv();
  CHECK(std::count(one_csv.begin(), one_csv.end(), '*') == 4);
}

TEST_CASE("DET plots render") {
  const auto det = det_curve({0.9, 0.7, 0.6, 0.8}, {0.1, 0.65, 0.3});
  const std::string svg = det_plot_svg({{"toy", det}}, "toy");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
  const auto path = fs::temp_directory_path() / "smad_test_det.png";
  write_det_plot_png(path, {{"toy", det}});
  CHECK(fs::file_size(path) > 100);
  fs::remove(path);
}
