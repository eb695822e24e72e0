#include "dsfsum/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace dsf {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::size_t frame_count(double duration_s, double fps) {
  return static_cast<std::size_t>(std::ceil(duration_s * fps - 1e-9));
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return out;
}

// column layout shared by the CSV and the chart: videos in order of first
// appearance, human min/avg/max, then algorithms in order of first appearance
struct TableLayout {
  std::vector<std::string> videos;
  std::vector<std::string> algorithms;
  // cell(video, algorithm) = mean f; human(video) = agreement aggregates
  std::vector<std::vector<double>> cells;  // NaN when missing
  std::vector<std::array<double, 3>> human;  // min/avg/max, NaN when missing

  static TableLayout build(std::span<const ScoreReport> reports);
  std::vector<double> column_means() const;  // human_min, human_avg, human_max, algos...
};

TableLayout TableLayout::build(std::span<const ScoreReport> reports) {
  TableLayout t;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto video_row = [&t, nan](const std::string& id) {
    for (std::size_t i = 0; i < t.videos.size(); ++i)
      if (t.videos[i] == id) return i;
    t.videos.push_back(id);
    t.human.push_back({nan, nan, nan});
    for (auto& row : t.cells) (void)row;
    t.cells.emplace_back(t.algorithms.size(), nan);
    return t.videos.size() - 1;
  };
  auto algo_col = [&t, nan](const std::string& name) {
    for (std::size_t i = 0; i < t.algorithms.size(); ++i)
      if (t.algorithms[i] == name) return i;
    t.algorithms.push_back(name);
    for (auto& row : t.cells) row.push_back(nan);
    return t.algorithms.size() - 1;
  };
  for (const ScoreReport& r : reports) {
    const std::size_t row = video_row(r.video_id);
    const std::size_t col = algo_col(r.algorithm);
    t.cells[row][col] = r.f_mean;
    if (r.human.has_value())
      t.human[row] = {r.human->f_min, r.human->f_mean, r.human->f_max};
  }
  return t;
}

std::vector<double> TableLayout::column_means() const {
  std::vector<double> means;
  auto mean_of = [](const std::vector<double>& vs) {
    double sum = 0.0;
    std::size_t n = 0;
    for (double v : vs)
      if (!std::isnan(v)) {
        sum += v;
        ++n;
      }
    return n == 0 ? std::numeric_limits<double>::quiet_NaN()
                  : sum / static_cast<double>(n);
  };
  for (int h = 0; h < 3; ++h) {
    std::vector<double> col;
    for (const auto& hu : human) col.push_back(hu[static_cast<std::size_t>(h)]);
    means.push_back(mean_of(col));
  }
  for (std::size_t a = 0; a < algorithms.size(); ++a) {
    std::vector<double> col;
    for (const auto& row : cells) col.push_back(row[a]);
    means.push_back(mean_of(col));
  }
  return means;
}

}  // namespace

std::size_t FrameMask::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

FrameMask to_mask(std::span<const Interval> intervals, double fps, double duration_s,
                  const std::string& video_id) {
  if (!(fps > 0) || !std::isfinite(fps)) throw ValidationError("to_mask: fps must be positive");
  if (!(duration_s > 0) || !std::isfinite(duration_s))
    throw ValidationError("to_mask: duration_s must be positive");
  FrameMask mask;
  mask.video_id = video_id;
  mask.fps = fps;
  mask.bits.assign(frame_count(duration_s, fps), 0);
  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    const double center = (static_cast<double>(i) + 0.5) / fps;
    for (const Interval& iv : intervals) {
      if (center >= iv.start_s && center < iv.end_s) {
        mask.bits[i] = 1;
        break;
      }
    }
  }
  return mask;
}

PRF f_measure(const FrameMask& candidate, const FrameMask& reference) {
  if (candidate.bits.size() != reference.bits.size())
    throw ValidationError("f_measure: mask lengths differ (" +
                          std::to_string(candidate.bits.size()) + " vs " +
                          std::to_string(reference.bits.size()) + ")");
  std::size_t both = 0, c = 0, r = 0;
  for (std::size_t i = 0; i < candidate.bits.size(); ++i) {
    c += candidate.bits[i];
    r += reference.bits[i];
    both += static_cast<std::size_t>(candidate.bits[i] & reference.bits[i]);
  }
  PRF out;
  out.precision = c == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(c);
  out.recall = r == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(r);
  const double pr = out.precision + out.recall;
  out.f = pr == 0.0 ? 0.0 : 2.0 * out.precision * out.recall / pr;
  return out;
}

HumanAgreement human_agreement(const ReferenceSummarySet& refs) {
  if (refs.references.size() < 2)
    throw ValidationError("human_agreement: needs at least 2 references");
  std::vector<FrameMask> masks;
  masks.reserve(refs.references.size());
  for (const auto& r : refs.references)
    masks.push_back(to_mask(r.intervals, refs.fps, refs.duration_s, refs.video_id));

  const std::size_t n = masks.size();
  HumanAgreement out;
  for (std::size_t a = 0; a < n; ++a) {
    double sum = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      if (b == a) continue;
      sum += f_measure(masks[a], masks[b]).f;
    }
    out.per_annotator.push_back(
        {refs.references[a].annotator_id, sum / static_cast<double>(n - 1)});
  }
  out.f_min = std::numeric_limits<double>::infinity();
  out.f_max = -std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (const auto& e : out.per_annotator) {
    out.f_min = std::min(out.f_min, e.mean_f);
    out.f_max = std::max(out.f_max, e.mean_f);
    total += e.mean_f;
  }
  out.f_mean = total / static_cast<double>(n);
  return out;
}

ScoreReport evaluate_summary(std::span<const Interval> timeline, const ReferenceSummarySet& refs,
                             const std::string& algorithm) {
  validate(refs);
  ScoreReport report;
  report.video_id = refs.video_id;
  report.algorithm = algorithm;
  report.fps = refs.fps;
  report.duration_s = refs.duration_s;
  report.timeline.assign(timeline.begin(), timeline.end());

  const FrameMask candidate = to_mask(timeline, refs.fps, refs.duration_s, refs.video_id);
  std::vector<FrameMask> masks;
  for (const auto& r : refs.references)
    masks.push_back(to_mask(r.intervals, refs.fps, refs.duration_s, refs.video_id));

  report.f_min = std::numeric_limits<double>::infinity();
  report.f_max = -std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    const PRF prf = f_measure(candidate, masks[i]);
    report.per_reference.emplace_back(refs.references[i].annotator_id, prf);
    report.f_min = std::min(report.f_min, prf.f);
    report.f_max = std::max(report.f_max, prf.f);
    total += prf.f;
  }
  report.f_mean = total / static_cast<double>(masks.size());

  if (refs.references.size() >= 2) report.human = human_agreement(refs);

  report.coverage.assign(candidate.bits.size(), 0.0);
  for (std::size_t i = 0; i < report.coverage.size(); ++i) {
    std::size_t covering = 0;
    for (const FrameMask& m : masks) covering += m.bits[i];
    report.coverage[i] =
        static_cast<double>(covering) / static_cast<double>(masks.size());
  }
  return report;
}

void write_score_report(const std::filesystem::path& path, const ScoreReport& report) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  ordered_json h;
  h["video_id"] = report.video_id;
  h["algorithm"] = report.algorithm;
  h["fps"] = report.fps;
  h["duration_s"] = report.duration_s;
  h["n_references"] = report.per_reference.size();
  out << h.dump() << "\n";
  for (const auto& [annotator, prf] : report.per_reference) {
    ordered_json r;
    r["annotator_id"] = annotator;
    r["precision"] = prf.precision;
    r["recall"] = prf.recall;
    r["f"] = prf.f;
    out << r.dump() << "\n";
  }
  ordered_json agg;
  agg["aggregate"] = {{"f_min", report.f_min}, {"f_mean", report.f_mean}, {"f_max", report.f_max}};
  out << agg.dump() << "\n";
  if (report.human.has_value()) {
    ordered_json hu;
    json per = json::array();
    for (const auto& e : report.human->per_annotator)
      per.push_back({{"annotator_id", e.annotator_id}, {"mean_f", e.mean_f}});
    hu["human"] = {{"per_annotator", per},
                   {"f_min", report.human->f_min},
                   {"f_mean", report.human->f_mean},
                   {"f_max", report.human->f_max}};
    out << hu.dump() << "\n";
  }
  ordered_json tl;
  json arr = json::array();
  for (const Interval& iv : report.timeline) arr.push_back({iv.start_s, iv.end_s});
  tl["timeline"] = arr;
  out << tl.dump() << "\n";
  ordered_json cov;
  cov["coverage"] = report.coverage;
  out << cov.dump() << "\n";
  if (!out) throw IoError("write failed: " + path.string());
}

ScoreReport read_score_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::vector<json> lines;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      lines.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) +
                            ": malformed JSON record: " + e.what());
    }
  }
  if (lines.empty()) throw ValidationError(path.string() + ": empty score report");

  ScoreReport report;
  try {
    const json& h = lines.front();
    report.video_id = h.at("video_id").get<std::string>();
    report.algorithm = h.at("algorithm").get<std::string>();
    report.fps = h.at("fps").get<double>();
    report.duration_s = h.at("duration_s").get<double>();
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const json& r = lines[i];
      if (r.contains("annotator_id")) {
        PRF prf;
        prf.precision = r.at("precision").get<double>();
        prf.recall = r.at("recall").get<double>();
        prf.f = r.at("f").get<double>();
        report.per_reference.emplace_back(r.at("annotator_id").get<std::string>(), prf);
      } else if (r.contains("aggregate")) {
        const json& a = r.at("aggregate");
        report.f_min = a.at("f_min").get<double>();
        report.f_mean = a.at("f_mean").get<double>();
        report.f_max = a.at("f_max").get<double>();
      } else if (r.contains("human")) {
        const json& hu = r.at("human");
        HumanAgreement agreement;
        for (const json& e : hu.at("per_annotator"))
          agreement.per_annotator.push_back(
              {e.at("annotator_id").get<std::string>(), e.at("mean_f").get<double>()});
        agreement.f_min = hu.at("f_min").get<double>();
        agreement.f_mean = hu.at("f_mean").get<double>();
        agreement.f_max = hu.at("f_max").get<double>();
        report.human = std::move(agreement);
      } else if (r.contains("timeline")) {
        for (const json& e : r.at("timeline"))
          report.timeline.push_back({e[0].get<double>(), e[1].get<double>()});
      } else if (r.contains("coverage")) {
        report.coverage = r.at("coverage").get<std::vector<double>>();
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": malformed score report: " + e.what());
  }
  return report;
}

std::string render_report_csv(std::span<const ScoreReport> reports, int digits) {
  if (reports.empty()) throw ValidationError("report: no score reports given");
  const TableLayout t = TableLayout::build(reports);

  std::ostringstream out;
  out << "video,human_min,human_avg,human_max";
  for (const std::string& a : t.algorithms) out << "," << a;
  out << "\n";

  auto cell = [digits](double v) { return std::isnan(v) ? std::string() : fixed(v, digits); };

  for (std::size_t row = 0; row < t.videos.size(); ++row) {
    out << t.videos[row];
    for (int h = 0; h < 3; ++h) out << "," << cell(t.human[row][static_cast<std::size_t>(h)]);
    for (std::size_t a = 0; a < t.algorithms.size(); ++a) out << "," << cell(t.cells[row][a]);
    out << "\n";
  }

  const std::vector<double> means = t.column_means();
  out << "Mean f-measure";
  for (double m : means) out << "," << cell(m);
  out << "\n";
  const double human_avg = means[1];
  const double human_max = means[2];
  out << "Relative to human avg.";
  for (double m : means)
    out << ","
        << (std::isnan(m) || std::isnan(human_avg) || human_avg == 0.0 ? std::string()
                                                                       : fixed(m / human_avg,
                                                                               digits));
  out << "\n";
  out << "Relative to human max.";
  for (double m : means)
    out << ","
        << (std::isnan(m) || std::isnan(human_max) || human_max == 0.0 ? std::string()
                                                                       : fixed(m / human_max,
                                                                               digits));
  out << "\n";
  return out.str();
}

std::string render_bar_chart_svg(std::span<const ScoreReport> reports, int digits) {
  if (reports.empty()) throw ValidationError("report: no score reports given");
  const TableLayout t = TableLayout::build(reports);
  const std::vector<double> means = t.column_means();

  std::vector<std::string> labels = {"human min", "human avg", "human max"};
  for (const std::string& a : t.algorithms) labels.push_back(a);

  const int bar_w = 64;
  const int gap = 24;
  const int margin = 60;
  const int plot_h = 240;
  const int width = margin * 2 + static_cast<int>(labels.size()) * (bar_w + gap);
  const int height = plot_h + 110;

  double top = 0.0;
  for (double m : means)
    if (!std::isnan(m)) top = std::max(top, m);
  if (top <= 0.0) top = 1.0;
  top *= 1.1;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << margin << "\" y1=\"" << (plot_h + 20) << "\" x2=\"" << (width - margin)
      << "\" y2=\"" << (plot_h + 20) << "\" stroke=\"black\"/>\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double m = means[i];
    const int x = margin + static_cast<int>(i) * (bar_w + gap);
    const std::string color = i < 3 ? "#9ecae1" : "#3182bd";
    if (!std::isnan(m)) {
      const int h = static_cast<int>(std::lround(m / top * plot_h));
      svg << "<rect x=\"" << x << "\" y=\"" << (plot_h + 20 - h) << "\" width=\"" << bar_w
          << "\" height=\"" << h << "\" fill=\"" << color << "\"/>\n";
      svg << "<text x=\"" << (x + bar_w / 2) << "\" y=\"" << (plot_h + 12 - h)
          << "\" font-size=\"12\" text-anchor=\"middle\">" << fixed(m, digits) << "</text>\n";
    }
    svg << "<text x=\"" << (x + bar_w / 2) << "\" y=\"" << (plot_h + 40)
        << "\" font-size=\"12\" text-anchor=\"middle\">" << labels[i] << "</text>\n";
  }
  svg << "<text x=\"" << (width / 2) << "\" y=\"" << (height - 20)
      << "\" font-size=\"14\" text-anchor=\"middle\">mean f-measure</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

std::string render_timeline_strip_svg(const ScoreReport& report) {
  const int width = 800;
  const int margin = 40;
  const int plot_w = width - 2 * margin;
  const int curve_h = 80;
  const int band_h = 24;
  const int height = curve_h + band_h + 70;
  const double duration = report.duration_s > 0 ? report.duration_s : 1.0;

  auto x_of = [&](double t) {
    return margin + t / duration * static_cast<double>(plot_w);
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << margin << "\" y=\"16\" font-size=\"13\">" << report.video_id << " / "
      << report.algorithm << "</text>\n";

  // selected intervals
  const int band_y = 24;
  for (const Interval& iv : report.timeline) {
    const double x0 = x_of(iv.start_s);
    const double x1 = x_of(iv.end_s);
    svg << "<rect x=\"" << x0 << "\" y=\"" << band_y << "\" width=\"" << (x1 - x0)
        << "\" height=\"" << band_h << "\" fill=\"#74c476\"/>\n";
  }
  svg << "<rect x=\"" << margin << "\" y=\"" << band_y << "\" width=\"" << plot_w
      << "\" height=\"" << band_h << "\" fill=\"none\" stroke=\"#cccccc\"/>\n";

  // annotator agreement curve
  const int curve_top = band_y + band_h + 8;
  if (!report.coverage.empty()) {
    svg << "<polyline fill=\"none\" stroke=\"#3182bd\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < report.coverage.size(); ++i) {
      const double t = (static_cast<double>(i) + 0.5) / report.fps;
      const double y = curve_top + (1.0 - report.coverage[i]) * curve_h;
      svg << x_of(t) << "," << y << " ";
    }
    svg << "\"/>\n";
  }
  svg << "<line x1=\"" << margin << "\" y1=\"" << (curve_top + curve_h) << "\" x2=\""
      << (width - margin) << "\" y2=\"" << (curve_top + curve_h) << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << margin << "\" y=\"" << (curve_top + curve_h + 16)
      << "\" font-size=\"11\">0s</text>\n";
  svg << "<text x=\"" << (width - margin) << "\" y=\"" << (curve_top + curve_h + 16)
      << "\" font-size=\"11\" text-anchor=\"end\">" << fixed(report.duration_s, 1)
      << "s</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

std::vector<std::filesystem::path> emit_report(std::span<const ScoreReport> reports,
                                               const std::filesystem::path& prefix, int digits) {
  std::vector<std::filesystem::path> written;
  auto write_file = [&written](const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << content;
    if (!out) throw IoError("write failed: " + path.string());
    written.push_back(path);
  };

  write_file(prefix.string() + ".csv", render_report_csv(reports, digits));
  write_file(prefix.string() + "_chart.svg", render_bar_chart_svg(reports, digits));
  for (const ScoreReport& r : reports)
    write_file(prefix.string() + "_timeline_" + sanitize(r.video_id) + "_" +
                   sanitize(r.algorithm) + ".svg",
               render_timeline_strip_svg(r));
  return written;
}

}  // namespace dsf
