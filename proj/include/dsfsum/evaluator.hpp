#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dsfsum/feature_io.hpp"

namespace dsf {

// Per-frame binarization of interval annotations. Frame i covers the
// center time (i + 0.5) / fps.
struct FrameMask {
  std::string video_id;
  double fps = 0.0;
  std::vector<std::uint8_t> bits;

  std::size_t count() const;  // number of set bits
};

FrameMask to_mask(std::span<const Interval> intervals, double fps, double duration_s,
                  const std::string& video_id = {});

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

// Per-frame precision/recall/f of a candidate against one reference.
// P = |C&R|/|C| (0 if empty candidate), R = |C&R|/|R| (0 if empty
// reference), F = 2PR/(P+R) (0 if P+R = 0).
PRF f_measure(const FrameMask& candidate, const FrameMask& reference);

// Leave-one-out agreement: for each annotator, the mean pairwise f against
// every other annotator; aggregated as min/mean/max of those means.
struct HumanAgreement {
  struct Entry {
    std::string annotator_id;
    double mean_f = 0.0;
  };
  std::vector<Entry> per_annotator;
  double f_min = 0.0;
  double f_mean = 0.0;
  double f_max = 0.0;
};

HumanAgreement human_agreement(const ReferenceSummarySet& refs);

// Scores of one candidate summary for one video.
struct ScoreReport {
  std::string video_id;
  std::string algorithm;
  double fps = 0.0;
  double duration_s = 0.0;
  std::vector<std::pair<std::string, PRF>> per_reference;
  double f_min = 0.0;
  double f_mean = 0.0;
  double f_max = 0.0;
  std::optional<HumanAgreement> human;  // present when >= 2 references
  std::vector<Interval> timeline;       // candidate intervals
  std::vector<double> coverage;         // per-frame fraction of annotators
};

ScoreReport evaluate_summary(std::span<const Interval> timeline, const ReferenceSummarySet& refs,
                             const std::string& algorithm);

void write_score_report(const std::filesystem::path& path, const ScoreReport& report);
ScoreReport read_score_report(const std::filesystem::path& path);

// Aggregate table across videos and algorithms, with the per-column mean
// and relative-to-human rows at the bottom. `digits` sets the decimal
// places of every numeric cell.
std::string render_report_csv(std::span<const ScoreReport> reports, int digits = 3);

// Bar chart of the per-column mean f-measures as a static SVG.
std::string render_bar_chart_svg(std::span<const ScoreReport> reports, int digits = 3);

// Per-video strip: selected intervals as filled blocks over the
// annotator-agreement curve (fraction of references covering each frame).
std::string render_timeline_strip_svg(const ScoreReport& report);

// Writes <prefix>.csv, <prefix>_chart.svg and one
// <prefix>_timeline_<video>_<algorithm>.svg per report; returns the paths.
std::vector<std::filesystem::path> emit_report(std::span<const ScoreReport> reports,
                                               const std::filesystem::path& prefix,
                                               int digits = 3);

}  // namespace dsf
