#include "smad/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <set>
#include <sstream>

#include <boost/math/distributions/normal.hpp>
#include <json.hpp>

#include "smad/image.hpp"
#include "smad/numfmt.hpp"
#include "smad/png.hpp"

namespace smad {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> sorted_checked(const std::vector<double>& v, const char* what) {
  if (v.empty()) throw DomainError(std::string(what) + " score list is empty");
  std::vector<double> s = v;
  for (double x : s)
    if (std::isnan(x)) throw DomainError(std::string(what) + " score list contains NaN");
  std::sort(s.begin(), s.end());
  return s;
}

/// Sorted score lists with the rates at an arbitrary threshold.
struct Rates {
  std::vector<double> bf, morph;

  Rates(const std::vector<double>& b, const std::vector<double>& m)
      : bf(sorted_checked(b, "bona fide")), morph(sorted_checked(m, "morph")) {}

  double apcer(double t) const {
    const auto below = std::lower_bound(morph.begin(), morph.end(), t) - morph.begin();
    return static_cast<double>(static_cast<std::ptrdiff_t>(morph.size()) - below) / static_cast<double>(morph.size());
  }
  double bpcer(double t) const {
    return static_cast<double>(std::lower_bound(bf.begin(), bf.end(), t) - bf.begin()) /
           static_cast<double>(bf.size());
  }

  std::vector<double> candidates() const {
    std::vector<double> c;
    c.reserve(bf.size() + morph.size() + 2);
    c.push_back(-kInf);
    std::merge(bf.begin(), bf.end(), morph.begin(), morph.end(), std::back_inserter(c));
    c.push_back(kInf);
    c.erase(std::unique(c.begin(), c.end()), c.end());
    return c;
  }
};

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

std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(pos, end - pos));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    pos = end + 1;
  }
  return lines;
}

std::string delta_label(double d) { return format_double(d); }

}  // namespace

OperatingPoint apcer_bpcer_at(const std::vector<double>& bona_fide, const std::vector<double>& morph, double delta) {
  if (!(delta > 0 && delta < 1)) throw DomainError("delta must lie in (0, 1)");
  const Rates r(bona_fide, morph);
  for (double t : r.candidates()) {
    const double a = r.apcer(t);
    if (a <= delta) return {delta, r.bpcer(t), a, t};
  }
  return {delta, 1.0, 0.0, kInf};  // unreachable: APCER(+inf) == 0
}

std::vector<DetPoint> det_curve(const std::vector<double>& bona_fide, const std::vector<double>& morph) {
  const Rates r(bona_fide, morph);
  std::vector<DetPoint> out;
  for (double t : r.candidates()) out.push_back({t, r.apcer(t), r.bpcer(t)});
  return out;
}

EqualErrorRate equal_error_rate(const std::vector<DetPoint>& curve) {
  if (curve.empty()) throw DomainError("empty DET curve");
  const DetPoint* best = &curve.front();
  for (const auto& p : curve)
    if (std::abs(p.apcer - p.bpcer) < std::abs(best->apcer - best->bpcer)) best = &p;
  return {(best->apcer + best->bpcer) / 2, best->threshold};
}

double roc_auc(const std::vector<double>& bona_fide, const std::vector<double>& morph) {
  const Rates r(bona_fide, morph);
  double wins = 0;
  for (double s : r.bf) {
    const auto lo = std::lower_bound(r.morph.begin(), r.morph.end(), s) - r.morph.begin();
    const auto hi = std::upper_bound(r.morph.begin(), r.morph.end(), s) - r.morph.begin();
    wins += static_cast<double>(lo) + 0.5 * static_cast<double>(hi - lo);
  }
  return wins / (static_cast<double>(r.bf.size()) * static_cast<double>(r.morph.size()));
}

void ProtocolSpec::validate() const {
  if (name.empty()) throw IntegrityError("protocol without a name");
  if (bona_fide.empty() || morph.empty()) throw IntegrityError("protocol " + name + " has an empty list");
  const std::set<std::string> b(bona_fide.begin(), bona_fide.end());
  const std::set<std::string> m(morph.begin(), morph.end());
  if (b.size() != bona_fide.size() || m.size() != morph.size())
    throw IntegrityError("protocol " + name + " lists a path twice");
  for (const auto& p : m)
    if (b.count(p)) throw IntegrityError("protocol " + name + ": " + p + " is both bona fide and morph");
}

std::string serialize_path_list(const std::vector<std::string>& paths) {
  std::string out;
  for (const auto& p : paths) {
    if (p.empty() || p.find('\n') != std::string::npos) throw IntegrityError("invalid path in list: '" + p + "'");
    out += p + '\n';
  }
  return out;
}

std::vector<std::string> parse_path_list(std::string_view text) {
  std::vector<std::string> out;
  for (auto& line : split_lines(text))
    if (!line.empty() && line.front() != '#') out.push_back(std::move(line));
  return out;
}

void write_protocols(const std::filesystem::path& index_path, const std::vector<ProtocolSpec>& protocols) {
  nlohmann::json index = nlohmann::json::object();
  const auto dir = index_path.parent_path();
  for (const auto& p : protocols) {
    p.validate();
    const std::string bf = p.name + "_bona_fide.txt", mo = p.name + "_morph.txt";
    spit(dir / bf, serialize_path_list(p.bona_fide));
    spit(dir / mo, serialize_path_list(p.morph));
    index[p.name] = {{"bona_fide", bf}, {"morph", mo}};
  }
  spit(index_path, index.dump(2) + "\n");
}

std::vector<ProtocolSpec> read_protocols(const std::filesystem::path& index_path) {
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(slurp(index_path));
  } catch (const nlohmann::json::exception& e) {
    throw IntegrityError("protocol index " + index_path.string() + " is not valid JSON: " + e.what());
  }
  if (!index.is_object()) throw IntegrityError("protocol index must be a JSON object");
  const auto dir = index_path.parent_path();
  std::vector<ProtocolSpec> out;
  for (const auto& [name, files] : index.items()) {
    ProtocolSpec p;
    p.name = name;
    try {
      p.bona_fide = parse_path_list(slurp(dir / files.at("bona_fide").get<std::string>()));
      p.morph = parse_path_list(slurp(dir / files.at("morph").get<std::string>()));
    } catch (const nlohmann::json::exception& e) {
      throw IntegrityError("protocol " + name + ": " + e.what());
    }
    p.validate();
    out.push_back(std::move(p));
  }
  return out;
}

std::string serialize_scores(const std::vector<ScoreRecord>& scores) {
  std::string out = std::string(kPolarityHeader) + "\npath,score\n";
  for (const auto& r : scores) {
    if (r.path.find_first_of(",\n") != std::string::npos) throw IntegrityError("score path contains ',' or newline");
    out += r.path + ',' + format_double(r.score) + '\n';
  }
  return out;
}

std::vector<ScoreRecord> parse_scores(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty() || lines[0].rfind("# polarity=", 0) != 0)
    throw IntegrityError("score file lacks the '# polarity=' header line");
  if (lines[0] != kPolarityHeader)
    throw IntegrityError("score file polarity '" + lines[0] + "' differs from bonafide-high");
  if (lines.size() < 2 || lines[1] != "path,score") throw IntegrityError("score file lacks the 'path,score' header");
  std::vector<ScoreRecord> out;
  std::set<std::string> seen;
  for (std::size_t i = 2; i < lines.size(); ++i) {
    const auto& line = lines[i];
    if (line.empty()) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos || comma == 0)
      throw IntegrityError("score file line " + std::to_string(i + 1) + " malformed");
    ScoreRecord r{line.substr(0, comma), parse_double(std::string_view(line).substr(comma + 1))};
    if (!std::isfinite(r.score) || r.score < 0 || r.score > 1)
      throw IntegrityError("score for " + r.path + " is outside [0, 1]");
    if (!seen.insert(r.path).second) throw IntegrityError("duplicate score for " + r.path);
    out.push_back(std::move(r));
  }
  return out;
}

void write_scores(const std::filesystem::path& path, const std::vector<ScoreRecord>& scores) {
  spit(path, serialize_scores(scores));
}

std::vector<ScoreRecord> read_scores(const std::filesystem::path& path) { return parse_scores(slurp(path)); }

const ProtocolMetrics& MetricsReport::at(const std::string& name) const {
  for (const auto& p : protocols)
    if (p.name == name) return p;
  throw ContractError("no protocol named " + name + " in report");
}

std::string MetricsReport::to_csv() const {
  std::string out = "protocol,delta,bpcer,apcer,threshold,eer,auc\n";
  for (const auto& p : protocols)
    for (const auto& op : p.points)
      out += p.name + ',' + delta_label(op.delta) + ',' + format_double(op.bpcer) + ',' + format_double(op.apcer) +
             ',' + format_double(op.threshold) + ',' + format_double(p.eer.eer) + ',' + format_double(p.auc) + '\n';
  return out;
}

std::string MetricsReport::to_text() const {
  std::size_t w = 8;
  for (const auto& p : protocols) w = std::max(w, p.name.size());
  std::ostringstream ss;
  ss << std::left << std::setw(static_cast<int>(w)) << "protocol";
  for (double d : kReportDeltas) ss << "  " << std::setw(14) << ("BPCER@" + delta_label(d));
  ss << "  " << std::setw(7) << "EER" << "  AUC\n";
  for (const auto& p : protocols) {
    ss << std::setw(static_cast<int>(w)) << p.name;
    for (const auto& op : p.points) ss << "  " << std::setw(14) << format_fixed(op.bpcer, 3);
    ss << "  " << std::setw(7) << format_fixed(p.eer.eer, 3) << "  " << format_fixed(p.auc, 3) << '\n';
  }
  return ss.str();
}

MetricsReport evaluate(const std::vector<ProtocolSpec>& protocols, const std::vector<ScoreRecord>& scores) {
  std::map<std::string, double> by_path;
  for (const auto& r : scores)
    if (!by_path.emplace(r.path, r.score).second) throw IntegrityError("duplicate score for " + r.path);
  std::vector<std::string> missing;
  auto lookup = [&](const std::vector<std::string>& paths) {
    std::vector<double> out;
    for (const auto& p : paths) {
      auto it = by_path.find(p);
      if (it == by_path.end())
        missing.push_back(p);
      else
        out.push_back(it->second);
    }
    return out;
  };
  MetricsReport report;
  for (const auto& spec : protocols) {
    spec.validate();
    ProtocolMetrics m;
    m.name = spec.name;
    const auto bf = lookup(spec.bona_fide);
    const auto mo = lookup(spec.morph);
    if (!missing.empty()) continue;
    m.n_bona_fide = bf.size();
    m.n_morph = mo.size();
    for (double d : kReportDeltas) m.points.push_back(apcer_bpcer_at(bf, mo, d));
    m.det = det_curve(bf, mo);
    m.eer = equal_error_rate(m.det);
    m.auc = roc_auc(bf, mo);
    report.protocols.push_back(std::move(m));
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
    std::string list;
    for (const auto& p : missing) list += "\n  " + p;
    throw IntegrityError(std::to_string(missing.size()) + " protocol path(s) have no score:" + list);
  }
  return report;
}

SweepTable sweep_report(const std::map<std::string, MetricsReport>& results) {
  if (results.empty()) throw DomainError("sweep_report needs at least one alignment result");
  SweepTable t;
  t.deltas = kReportDeltas;
  for (const auto& p : results.begin()->second.protocols) t.protocols.push_back(p.name);
  for (const auto& [alignment, report] : results) {
    if (report.protocols.size() != t.protocols.size())
      throw IntegrityError("alignment " + alignment + " reports a different protocol set");
    t.alignments.push_back(alignment);
    std::vector<double> row;
    for (const auto& name : t.protocols) {
      const auto& pm = report.at(name);
      for (std::size_t k = 0; k < t.deltas.size(); ++k) row.push_back(pm.points.at(k).bpcer);
    }
    t.values.push_back(std::move(row));
  }
  const std::size_t cols = t.protocols.size() * t.deltas.size();
  t.best.assign(t.values.size(), std::vector<bool>(cols, false));
  for (std::size_t c = 0; c < cols; ++c) {
    double lo = kInf;
    for (const auto& row : t.values) lo = std::min(lo, row[c]);
    for (std::size_t r = 0; r < t.values.size(); ++r) t.best[r][c] = t.values[r][c] == lo;
  }
  return t;
}

std::string SweepTable::to_csv() const {
  std::string out = "alignment";
  for (const auto& p : protocols)
    for (double d : deltas) out += ',' + p + "@" + delta_label(d);
  out += '\n';
  for (std::size_t r = 0; r < alignments.size(); ++r) {
    out += alignments[r];
    for (std::size_t c = 0; c < values[r].size(); ++c) out += ',' + format_fixed(values[r][c], 4) + (best[r][c] ? "*" : "");
    out += '\n';
  }
  return out;
}

std::string SweepTable::to_text() const {
  std::ostringstream ss;
  std::size_t w = 9;
  for (const auto& p : protocols) w = std::max(w, p.size() + 2);
  ss << std::left << std::setw(10) << "";
  for (const auto& p : protocols) ss << std::setw(static_cast<int>(2 * w)) << p;
  ss << '\n' << std::setw(10) << "alignment";
  for (std::size_t i = 0; i < protocols.size(); ++i)
    for (double d : deltas) ss << std::setw(static_cast<int>(w)) << delta_label(d);
  ss << '\n';
  for (std::size_t r = 0; r < alignments.size(); ++r) {
    ss << std::setw(10) << alignments[r];
    for (std::size_t c = 0; c < values[r].size(); ++c)
      ss << std::setw(static_cast<int>(w)) << (format_fixed(values[r][c], 3) + (best[r][c] ? "*" : ""));
    ss << '\n';
  }
  ss << "(* best per column, lower is better)\n";
  return ss.str();
}

namespace {

const double kAxisTicks[] = {0.001, 0.01, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 0.9, 0.95, 0.99, 0.999};
constexpr double kAxisMin = 0.0005, kAxisMax = 0.9995;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2",
                                "#7f7f7f", "#bcbd22", "#17becf", "#000000"};

double probit(double p) {
  static const boost::math::normal_distribution<double> n;
  return boost::math::quantile(n, std::clamp(p, kAxisMin, kAxisMax));
}

/// Map a rate to [0, 1] along a normal-deviate axis.
double axis_unit(double p) { return (probit(p) - probit(kAxisMin)) / (probit(kAxisMax) - probit(kAxisMin)); }

std::array<std::uint8_t, 3> hex_colour(const char* hex) {
  auto nib = [](char c) { return c <= '9' ? c - '0' : c - 'a' + 10; };
  return {static_cast<std::uint8_t>(nib(hex[1]) * 16 + nib(hex[2])),
          static_cast<std::uint8_t>(nib(hex[3]) * 16 + nib(hex[4])),
          static_cast<std::uint8_t>(nib(hex[5]) * 16 + nib(hex[6]))};
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

}  // namespace

std::string det_plot_svg(const std::vector<DetSeries>& series, const std::string& title) {
  constexpr double size = 480, margin = 60, plot = size - 2 * margin;
  auto px = [&](double a) { return margin + plot * axis_unit(a); };
  auto py = [&](double b) { return size - margin - plot * axis_unit(b); };
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(2);
  ss << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size + 20 * series.size()
     << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  ss << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  ss << "<text x=\"" << size / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"13\">" << xml_escape(title)
     << "</text>\n";
  for (double t : kAxisTicks) {
    ss << "<line x1=\"" << px(t) << "\" y1=\"" << margin << "\" x2=\"" << px(t) << "\" y2=\"" << size - margin
       << "\" stroke=\"#dddddd\"/>\n";
    ss << "<line x1=\"" << margin << "\" y1=\"" << py(t) << "\" x2=\"" << size - margin << "\" y2=\"" << py(t)
       << "\" stroke=\"#dddddd\"/>\n";
    ss << "<text x=\"" << px(t) << "\" y=\"" << size - margin + 14 << "\" text-anchor=\"middle\">"
       << format_double(t * 100) << "</text>\n";
    ss << "<text x=\"" << margin - 4 << "\" y=\"" << py(t) + 3 << "\" text-anchor=\"end\">" << format_double(t * 100)
       << "</text>\n";
  }
  ss << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << plot << "\" height=\"" << plot
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  ss << "<text x=\"" << size / 2 << "\" y=\"" << size - 20 << "\" text-anchor=\"middle\">APCER (%)</text>\n";
  ss << "<text x=\"16\" y=\"" << size / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << size / 2
     << ")\">BPCER (%)</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* colour = kPalette[i % std::size(kPalette)];
    ss << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& p : series[i].curve) ss << px(p.apcer) << ',' << py(p.bpcer) << ' ';
    ss << "\"/>\n";
    const double ly = size + 20.0 * static_cast<double>(i) + 4;
    ss << "<line x1=\"" << margin << "\" y1=\"" << ly << "\" x2=\"" << margin + 24 << "\" y2=\"" << ly
       << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
    ss << "<text x=\"" << margin + 30 << "\" y=\"" << ly + 3 << "\">" << xml_escape(series[i].label) << "</text>\n";
  }
  ss << "</svg>\n";
  return ss.str();
}

void write_det_plot_png(const std::filesystem::path& path, const std::vector<DetSeries>& series) {
  constexpr int size = 400, margin = 30, plot = size - 2 * margin;
  ImageU8 img(size, size, 3, 255);
  auto dot = [&](int x, int y, std::array<std::uint8_t, 3> c) {
    if (x < 0 || y < 0 || x >= size || y >= size) return;
    for (int k = 0; k < 3; ++k) img(y, x, k) = c[k];
  };
  auto line = [&](double x0, double y0, double x1, double y1, std::array<std::uint8_t, 3> c) {
    const int steps = static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))) + 1;
    for (int s = 0; s <= steps; ++s) {
      const double t = static_cast<double>(s) / steps;
      dot(static_cast<int>(std::lround(x0 + t * (x1 - x0))), static_cast<int>(std::lround(y0 + t * (y1 - y0))), c);
    }
  };
  auto px = [&](double a) { return margin + plot * axis_unit(a); };
  auto py = [&](double b) { return size - margin - plot * axis_unit(b); };
  for (double t : kAxisTicks) {
    line(px(t), margin, px(t), size - margin, {220, 220, 220});
    line(margin, py(t), size - margin, py(t), {220, 220, 220});
  }
  const double lo = margin, hi = size - margin;
  line(lo, lo, hi, lo, {0, 0, 0});
  line(lo, hi, hi, hi, {0, 0, 0});
  line(lo, lo, lo, hi, {0, 0, 0});
  line(hi, lo, hi, hi, {0, 0, 0});
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto c = hex_colour(kPalette[i % std::size(kPalette)]);
    const auto& curve = series[i].curve;
    for (std::size_t k = 1; k < curve.size(); ++k)
      line(px(curve[k - 1].apcer), py(curve[k - 1].bpcer), px(curve[k].apcer), py(curve[k].bpcer), c);
  }
  write_png(path, img);
}

}  // namespace smad
