#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "smad/errors.hpp"

namespace smad {

/// Operating points reported per protocol.
inline const std::vector<double> kReportDeltas{0.1, 0.01};

struct OperatingPoint {
  double delta = 0;
  double bpcer = 0;
  double apcer = 0;  // attained APCER at the threshold, <= delta
  double threshold = 0;
};

/// APCER(t) = #{morph >= t} / n_morph, BPCER(t) = #{bf < t} / n_bf. Returns the
/// point at the smallest candidate threshold (scores plus +-inf) with APCER <= delta.
OperatingPoint apcer_bpcer_at(const std::vector<double>& bona_fide, const std::vector<double>& morph, double delta);

struct DetPoint {
  double threshold = 0;
  double apcer = 0;
  double bpcer = 0;
  friend bool operator==(const DetPoint&, const DetPoint&) = default;
};

/// One point per distinct threshold in -inf, sorted score union, +inf.
std::vector<DetPoint> det_curve(const std::vector<double>& bona_fide, const std::vector<double>& morph);

struct EqualErrorRate {
  double eer = 0;
  double threshold = 0;
};

/// Point of the curve with the smallest |APCER - BPCER|; EER is their mean there.
EqualErrorRate equal_error_rate(const std::vector<DetPoint>& curve);

/// P(bf > morph) + P(bf == morph) / 2.
double roc_auc(const std::vector<double>& bona_fide, const std::vector<double>& morph);

struct ProtocolSpec {
  std::string name;
  std::vector<std::string> bona_fide;
  std::vector<std::string> morph;

  /// IntegrityError unless both lists are non-empty, duplicate-free and disjoint.
  void validate() const;
  friend bool operator==(const ProtocolSpec&, const ProtocolSpec&) = default;
};

std::string serialize_path_list(const std::vector<std::string>& paths);
std::vector<std::string> parse_path_list(std::string_view text);

/// Index JSON: {"<name>": {"bona_fide": "<file>", "morph": "<file>"}}; files relative to the index.
void write_protocols(const std::filesystem::path& index_path, const std::vector<ProtocolSpec>& protocols);
std::vector<ProtocolSpec> read_protocols(const std::filesystem::path& index_path);

struct ScoreRecord {
  std::string path;
  double score = 0;
  friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;
};

inline constexpr std::string_view kPolarityHeader = "# polarity=bonafide-high";

std::string serialize_scores(const std::vector<ScoreRecord>& scores);
/// IntegrityError on a missing/inverted polarity line, bad rows, out-of-range or duplicate entries.
std::vector<ScoreRecord> parse_scores(std::string_view text);
void write_scores(const std::filesystem::path& path, const std::vector<ScoreRecord>& scores);
std::vector<ScoreRecord> read_scores(const std::filesystem::path& path);

struct ProtocolMetrics {
  std::string name;
  std::size_t n_bona_fide = 0;
  std::size_t n_morph = 0;
  std::vector<OperatingPoint> points;  // one per kReportDeltas entry
  EqualErrorRate eer;
  double auc = 0;
  std::vector<DetPoint> det;
};

struct MetricsReport {
  std::vector<ProtocolMetrics> protocols;

  const ProtocolMetrics& at(const std::string& name) const;
  /// protocol,delta,bpcer,apcer,threshold,eer,auc
  std::string to_csv() const;
  /// Protocols as rows, one BPCER column per delta.
  std::string to_text() const;
};

/// Join scores to protocols by path. IntegrityError lists every missing path.
MetricsReport evaluate(const std::vector<ProtocolSpec>& protocols, const std::vector<ScoreRecord>& scores);

struct SweepTable {
  std::vector<std::string> alignments;
  std::vector<std::string> protocols;
  std::vector<double> deltas;
  // values[row][protocol * deltas + delta]
  std::vector<std::vector<double>> values;
  std::vector<std::vector<bool>> best;

  /// alignment,<protocol>@<delta>,... ; best entries carry a trailing '*'.
  std::string to_csv() const;
  std::string to_text() const;
};

/// Alignments x protocols x deltas of BPCER, best (lowest) per column marked.
/// Every report must list the same protocols.
SweepTable sweep_report(const std::map<std::string, MetricsReport>& results);

/// DET plot of several curves on normal-deviate axes.
struct DetSeries {
  std::string label;
  std::vector<DetPoint> curve;
};
std::string det_plot_svg(const std::vector<DetSeries>& series, const std::string& title);
void write_det_plot_png(const std::filesystem::path& path, const std::vector<DetSeries>& series);

}  // namespace smad
