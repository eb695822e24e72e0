#include "dsfsum/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "dsfsum/diagnostics.hpp"
#include "dsfsum/embedding.hpp"
#include "dsfsum/evaluator.hpp"
#include "dsfsum/feature_io.hpp"
#include "dsfsum/rng.hpp"
#include "dsfsum/segmenter.hpp"
#include "dsfsum/summarizer.hpp"
#include "dsfsum/trainer.hpp"

namespace dsf::cli {
namespace {

namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw IoError("write failed: " + path.string());
}

struct GlobalOpts {
  std::uint64_t seed = 0;
  int precision = 3;
};

// ---- synth ------------------------------------------------------------------

struct SynthOpts {
  std::string out_dir;
  SynthConfig config;
};

void run_synth(const SynthOpts& opt, const GlobalOpts& global, std::ostream& err) {
  SynthConfig cfg = opt.config;
  cfg.seed = global.seed;
  const SyntheticWorld world = make_synthetic_world(cfg);

  const fs::path dir(opt.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());

  nlohmann::ordered_json manifest;
  manifest["seed"] = cfg.seed;
  manifest["n_clusters"] = cfg.n_clusters;
  manifest["descriptions"] = "descriptions.jsonl";
  nlohmann::json videos = nlohmann::json::array();
  for (std::size_t i = 0; i < world.tracks.size(); ++i) {
    const std::string& id = world.tracks[i].video_id;
    write_feature_track(dir / (id + ".track.jsonl"), world.tracks[i]);
    write_references(dir / (id + ".refs.jsonl"), world.references[i]);
    videos.push_back({{"video_id", id},
                      {"cluster", world.cluster_of_video[i]},
                      {"track", id + ".track.jsonl"},
                      {"references", id + ".refs.jsonl"}});
  }
  manifest["videos"] = videos;
  write_descriptions(dir / "descriptions.jsonl", world.descriptions);
  write_text(dir / "world.json", manifest.dump(2) + "\n");

  err << "synth: " << world.tracks.size() << " videos, " << world.descriptions.size()
      << " descriptions -> " << dir.string() << "\n";
}

// ---- segments ---------------------------------------------------------------

struct SegmentsOpts {
  std::string track_path;
  std::string out_path;
  SegmenterParams params;
};

void run_segments(const SegmentsOpts& opt, std::ostream& err) {
  const FeatureTrack track = read_feature_track(opt.track_path);
  const std::vector<Segment> segments = extract_segments(track, opt.params);
  write_segment_manifest(opt.out_path, track, opt.params, segments);
  err << "segments: " << segments.size() << " windows from '" << track.video_id << "' -> "
      << opt.out_path << "\n";
}

// ---- train ------------------------------------------------------------------

struct TrainOpts {
  std::vector<std::string> track_paths;
  std::string descriptions_path;
  std::string model_path;
  std::string log_path;
  std::string margin = "derived";
  double window_s = 5.0;
  double sample_fps = 1.0;
  TrainConfig config;
};

void parse_margin(const std::string& text, TrainConfig& cfg) {
  if (text == "derived") {
    cfg.margin_policy = TrainConfig::MarginPolicy::kDerived;
    return;
  }
  if (text.rfind("fixed:", 0) == 0) {
    cfg.margin_policy = TrainConfig::MarginPolicy::kFixed;
    try {
      cfg.fixed_margin = std::stod(text.substr(6));
    } catch (const std::exception&) {
      throw ValidationError("train: cannot parse margin value in '" + text + "'");
    }
    if (!(cfg.fixed_margin > 0)) throw ValidationError("train: fixed margin must be > 0");
    return;
  }
  throw ValidationError("train: --margin must be 'derived' or 'fixed:<value>'");
}

std::vector<TrainingPair> build_pairs(const std::map<std::string, FeatureTrack>& tracks,
                                      const std::vector<DescriptionVector>& descs, int frames) {
  std::vector<TrainingPair> pairs;
  for (const DescriptionVector& d : descs) {
    auto it = tracks.find(d.video_id);
    if (it == tracks.end())
      throw ValidationError("train: no track for video '" + d.video_id +
                            "' referenced by description '" + d.desc_id + "'");
    const FeatureTrack& track = it->second;
    TrainingPair p;
    p.video_id = d.video_id;
    p.y = d.y;
    p.positive = true;
    const double end = std::min(d.end_s, track.duration_s);
    const double start = std::max(0.0, d.start_s);
    if (!(start < end))
      throw ValidationError("train: description '" + d.desc_id + "' spans nothing of its video");
    for (std::size_t idx : resample_indices(track, start, end, frames))
      p.frames.push_back(track.frames[idx]);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

void run_train(const TrainOpts& opt, const GlobalOpts& global, std::ostream& err) {
  TrainConfig cfg = opt.config;
  cfg.seed = global.seed;
  parse_margin(opt.margin, cfg);

  std::map<std::string, FeatureTrack> tracks;
  for (const std::string& path : opt.track_paths) {
    FeatureTrack t = read_feature_track(path);
    const std::string id = t.video_id;
    if (!tracks.emplace(id, std::move(t)).second)
      throw ValidationError("train: duplicate track for video '" + id + "'");
  }
  const std::vector<DescriptionVector> descs = read_descriptions(opt.descriptions_path);
  const int frames = frames_per_window({opt.window_s, 1.0, opt.sample_fps});
  const std::vector<TrainingPair> pairs = build_pairs(tracks, descs, frames);

  const TrainResult result = train(pairs, cfg);

  nlohmann::json meta;
  meta["seed"] = cfg.seed;
  meta["alpha"] = result.log.alpha;
  meta["epochs"] = cfg.epochs;
  meta["negatives_per_positive"] = cfg.negatives_per_positive;
  meta["learning_rate"] = cfg.learning_rate;
  meta["frames_per_pair"] = frames;
  write_model(opt.model_path, heads_to_model(result.video, result.text, meta));
  if (!opt.log_path.empty()) write_train_log(opt.log_path, result.log, cfg);

  err << "train: " << pairs.size() << " positives, " << result.log.steps.size()
      << " steps, alpha " << result.log.alpha << ", final epoch mean loss "
      << result.log.epoch_mean_loss.back() << " -> " << opt.model_path << "\n";
}

// ---- gradcheck ----------------------------------------------------------------

struct GradCheckOpts {
  double tolerance = 1e-4;
  int seeds = 10;
  double fd_step = 1e-3;
  GradCheckDims dims;
};

int run_gradcheck(const GradCheckOpts& opt, const GlobalOpts& global, std::ostream& out) {
  std::map<std::string, double> per_tensor;
  double overall = 0.0;
  for (int s = 0; s < opt.seeds; ++s) {
    const GradCheckReport report =
        gradient_check(derive_seed(global.seed, static_cast<std::uint64_t>(s)), opt.dims,
                       opt.fd_step);
    for (const auto& e : report.tensors) {
      auto [it, inserted] = per_tensor.emplace(e.tensor, e.max_rel_error);
      if (!inserted) it->second = std::max(it->second, e.max_rel_error);
    }
    overall = std::max(overall, report.max_rel_error);
  }
  char buf[128];
  for (const auto& [tensor, rel] : per_tensor) {
    std::snprintf(buf, sizeof(buf), "%-10s max_rel_error %.3e\n", tensor.c_str(), rel);
    out << buf;
  }
  const bool pass = overall <= opt.tolerance;
  std::snprintf(buf, sizeof(buf), "overall    max_rel_error %.3e  tolerance %.3e  %s\n", overall,
                opt.tolerance, pass ? "PASS" : "FAIL");
  out << buf;
  return pass ? 0 : 1;
}

// ---- embed ------------------------------------------------------------------

struct EmbedOpts {
  std::string model_path;
  std::string manifest_path;
  std::string track_path;
  std::string out_path;
};

void run_embed(const EmbedOpts& opt, std::ostream& err) {
  const ModelFile model = read_model(opt.model_path);
  const auto [video_head, text_head] = heads_from_model(model);
  const FeatureTrack track = read_feature_track(opt.track_path);
  const SegmentManifest manifest = read_segment_manifest(opt.manifest_path);
  const std::vector<Segment> segments = attach_frames(manifest, track);

  EmbeddedPoints points;
  points.video_id = track.video_id;
  points.dim = video_head.output_dim();
  for (const Segment& s : segments)
    points.points.emplace_back(s.index, video_forward(s, video_head));
  write_embedded_points(opt.out_path, points);
  err << "embed: " << points.points.size() << " segments of '" << track.video_id << "' -> "
      << opt.out_path << "\n";
}

// ---- summarize ----------------------------------------------------------------

struct SummarizeOpts {
  std::string points_path;
  std::string manifest_path;
  std::string out_path;
  double ratio = 0.15;
  int k_override = 0;
  std::string algorithm = "lazy";
  bool no_overlap = false;
  bool cost_aware = false;
};

void run_summarize(const SummarizeOpts& opt, std::ostream& err) {
  const EmbeddedPoints embedded = read_embedded_points(opt.points_path);
  const SegmentManifest manifest = read_segment_manifest(opt.manifest_path);
  const PointSet points = PointSet::from(embedded, manifest);

  const int k = opt.k_override > 0
                    ? opt.k_override
                    : budget_k(manifest.duration_s, manifest.params.window_s, opt.ratio);
  const SelectOptions options{opt.cost_aware, opt.no_overlap};

  Summary summary;
  if (opt.algorithm == "lazy")
    summary = lazy_greedy_select(points, k, options);
  else if (opt.algorithm == "naive")
    summary = naive_greedy_select(points, k, options);
  else if (opt.algorithm == "exhaustive")
    summary = exhaustive_select(points, k);
  else if (opt.algorithm == "uniform")
    summary = uniform_baseline(points, k);
  else
    throw ValidationError("summarize: unknown algorithm '" + opt.algorithm + "'");

  write_summary(opt.out_path, {manifest.video_id, opt.algorithm, summary});
  err << "summarize: " << summary.selected.size() << "/" << points.size() << " segments (k=" << k
      << ", F=" << summary.objective_value << ", " << opt.algorithm << ") -> " << opt.out_path
      << "\n";
}

// ---- evaluate ---------------------------------------------------------------

struct EvaluateOpts {
  std::string summary_path;
  std::string references_path;
  std::string out_path;
};

void run_evaluate(const EvaluateOpts& opt, std::ostream& err) {
  const SummaryFile summary = read_summary(opt.summary_path);
  const ReferenceSummarySet refs = read_references(opt.references_path);
  if (summary.video_id != refs.video_id)
    throw ValidationError("evaluate: summary is for video '" + summary.video_id +
                          "' but references are for '" + refs.video_id + "'");
  const ScoreReport report =
      evaluate_summary(summary.summary.merged_timeline, refs, summary.algorithm);
  write_score_report(opt.out_path, report);
  err << "evaluate: '" << refs.video_id << "' f mean " << report.f_mean << " (min "
      << report.f_min << ", max " << report.f_max << ") over " << report.per_reference.size()
      << " references -> " << opt.out_path << "\n";
}

// ---- report -----------------------------------------------------------------

struct ReportOpts {
  std::vector<std::string> report_paths;
  std::string out_prefix;
};

void run_report(const ReportOpts& opt, const GlobalOpts& global, std::ostream& err) {
  std::vector<ScoreReport> reports;
  for (const std::string& path : opt.report_paths) reports.push_back(read_score_report(path));
  const std::vector<fs::path> written = emit_report(reports, opt.out_prefix, global.precision);
  err << "report: " << reports.size() << " score reports -> " << written.front().string()
      << " (+" << written.size() - 1 << " graphics)\n";
}

// ---- plot -------------------------------------------------------------------

struct PlotOpts {
  std::string points_path;
  std::string out_path;
  int clusters = 3;
};

void run_plot(const PlotOpts& opt, const GlobalOpts& global, std::ostream& err) {
  const EmbeddedPoints embedded = read_embedded_points(opt.points_path);
  std::vector<Eigen::VectorXd> xs;
  for (const auto& [index, x] : embedded.points) xs.push_back(x);
  const std::vector<Eigen::Vector2d> coords = pca_project(xs);
  const int k = std::min<int>(opt.clusters, static_cast<int>(xs.size()));
  const KMeansResult clusters = kmeans(xs, k, global.seed);

  // annotate a handful of evenly spaced segment indices
  std::vector<std::string> point_labels(xs.size());
  const std::size_t step = std::max<std::size_t>(1, xs.size() / 12);
  for (std::size_t i = 0; i < xs.size(); i += step)
    point_labels[i] = std::to_string(embedded.points[i].first);

  write_text(opt.out_path, scatter_svg(coords, clusters.labels, point_labels));
  err << "plot: " << xs.size() << " points, " << k << " clusters -> " << opt.out_path << "\n";
}

}  // namespace

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"joint video/text embedding, k-medoids summarization and f-measure evaluation"};
  app.name("dsfsum");
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.set_config("--config", "", "key=value config file; command line overrides it")
      ->envname("DSFSUM_CONFIG");
  app.allow_config_extras(CLI::config_extras_mode::error);

  GlobalOpts global;
  app.add_option("--seed", global.seed, "seed for every stochastic component");
  app.add_option("--precision", global.precision, "decimal digits in rendered tables and charts")
      ->check(CLI::Range(1, 12));

  SynthOpts synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  synth_cmd->add_option("--out", synth.out_dir, "output directory")->required();
  synth_cmd->add_option("--videos", synth.config.n_videos)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--clusters", synth.config.n_clusters)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--video-dim", synth.config.video_dim)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--text-dim", synth.config.text_dim)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--fps", synth.config.fps)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--duration", synth.config.duration_s)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--descs-per-video", synth.config.descs_per_video)
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--annotators", synth.config.annotators)->check(CLI::PositiveNumber);
  synth_cmd->add_option("--noise", synth.config.noise_scale)->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--latent-dim", synth.config.latent_dim)->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--latent-scale", synth.config.latent_scale)
      ->check(CLI::NonNegativeNumber);

  SegmentsOpts segments;
  CLI::App* segments_cmd = app.add_subcommand("segments", "extract sliding-window segments");
  segments_cmd->add_option("--track", segments.track_path, "feature track file")->required();
  segments_cmd->add_option("--out", segments.out_path, "segment manifest file")->required();
  segments_cmd->add_option("--window", segments.params.window_s)->check(CLI::PositiveNumber);
  segments_cmd->add_option("--stride", segments.params.stride_s)->check(CLI::PositiveNumber);
  segments_cmd->add_option("--sample-fps", segments.params.sample_fps)
      ->check(CLI::PositiveNumber);

  TrainOpts train_opts;
  CLI::App* train_cmd = app.add_subcommand("train", "train both projection heads jointly");
  train_cmd->add_option("--track", train_opts.track_paths, "feature track file (repeatable)")
      ->required();
  train_cmd->add_option("--descriptions", train_opts.descriptions_path)->required();
  train_cmd->add_option("--out", train_opts.model_path, "model file")->required();
  train_cmd->add_option("--log", train_opts.log_path, "training log file");
  train_cmd->add_option("--margin", train_opts.margin, "'derived' or 'fixed:<value>'");
  train_cmd->add_option("--negatives", train_opts.config.negatives_per_positive)
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", train_opts.config.learning_rate)->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--epochs", train_opts.config.epochs)->check(CLI::PositiveNumber);
  train_cmd->add_option("--hidden", train_opts.config.hidden_dim)->check(CLI::PositiveNumber);
  train_cmd->add_option("--embed-dim", train_opts.config.embed_dim)->check(CLI::PositiveNumber);
  train_cmd->add_option("--beta1", train_opts.config.beta1)->check(CLI::Range(0.0, 1.0));
  train_cmd->add_option("--beta2", train_opts.config.beta2)->check(CLI::Range(0.0, 1.0));
  train_cmd->add_option("--epsilon", train_opts.config.epsilon)->check(CLI::PositiveNumber);
  train_cmd->add_option("--window", train_opts.window_s)->check(CLI::PositiveNumber);
  train_cmd->add_option("--sample-fps", train_opts.sample_fps)->check(CLI::PositiveNumber);

  GradCheckOpts gradcheck;
  CLI::App* gradcheck_cmd =
      app.add_subcommand("gradcheck", "analytic vs finite-difference gradients");
  gradcheck_cmd->add_option("--tolerance", gradcheck.tolerance)->check(CLI::PositiveNumber);
  gradcheck_cmd->add_option("--seeds", gradcheck.seeds)->check(CLI::PositiveNumber);
  gradcheck_cmd->add_option("--fd-step", gradcheck.fd_step)->check(CLI::PositiveNumber);
  gradcheck_cmd->add_option("--video-dim", gradcheck.dims.video_dim)->check(CLI::PositiveNumber);
  gradcheck_cmd->add_option("--text-dim", gradcheck.dims.text_dim)->check(CLI::PositiveNumber);
  gradcheck_cmd->add_option("--hidden", gradcheck.dims.hidden_dim)->check(CLI::PositiveNumber);
  gradcheck_cmd->add_option("--embed-dim", gradcheck.dims.embed_dim)->check(CLI::PositiveNumber);
  gradcheck_cmd->add_option("--frames", gradcheck.dims.frames)->check(CLI::PositiveNumber);

  EmbedOpts embed;
  CLI::App* embed_cmd = app.add_subcommand("embed", "map segments into the semantic space");
  embed_cmd->add_option("--model", embed.model_path)->required();
  embed_cmd->add_option("--manifest", embed.manifest_path)->required();
  embed_cmd->add_option("--track", embed.track_path)->required();
  embed_cmd->add_option("--out", embed.out_path, "embedded-points file")->required();

  SummarizeOpts summarize;
  CLI::App* summarize_cmd = app.add_subcommand("summarize", "select representative segments");
  summarize_cmd->add_option("--points", summarize.points_path)->required();
  summarize_cmd->add_option("--manifest", summarize.manifest_path)->required();
  summarize_cmd->add_option("--out", summarize.out_path, "summary file")->required();
  summarize_cmd->add_option("--ratio", summarize.ratio)->check(CLI::PositiveNumber);
  summarize_cmd->add_option("--k", summarize.k_override, "override the derived budget")
      ->check(CLI::NonNegativeNumber);
  summarize_cmd
      ->add_option("--algorithm", summarize.algorithm, "lazy | naive | exhaustive | uniform")
      ->check(CLI::IsMember({"lazy", "naive", "exhaustive", "uniform"}));
  summarize_cmd->add_flag("--no-overlap", summarize.no_overlap,
                          "reject candidates overlapping prior picks");
  summarize_cmd->add_flag("--cost-aware", summarize.cost_aware, "rank by gain / segment cost");

  EvaluateOpts evaluate;
  CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "score a summary against references");
  evaluate_cmd->add_option("--summary", evaluate.summary_path)->required();
  evaluate_cmd->add_option("--references", evaluate.references_path)->required();
  evaluate_cmd->add_option("--out", evaluate.out_path, "score report file")->required();

  ReportOpts report;
  CLI::App* report_cmd = app.add_subcommand("report", "aggregate score reports into a table");
  report_cmd->add_option("reports", report.report_paths, "score report files")
      ->required()
      ->expected(-1);
  report_cmd->add_option("--out-prefix", report.out_prefix, "output path prefix")->required();

  PlotOpts plot;
  CLI::App* plot_cmd = app.add_subcommand("plot", "2-D projection of embedded points");
  plot_cmd->add_option("--points", plot.points_path)->required();
  plot_cmd->add_option("--out", plot.out_path, "SVG file")->required();
  plot_cmd->add_option("--clusters", plot.clusters)->check(CLI::PositiveNumber);

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand(synth_cmd)) {
      run_synth(synth, global, err);
    } else if (app.got_subcommand(segments_cmd)) {
      run_segments(segments, err);
    } else if (app.got_subcommand(train_cmd)) {
      run_train(train_opts, global, err);
    } else if (app.got_subcommand(gradcheck_cmd)) {
      return run_gradcheck(gradcheck, global, out);
    } else if (app.got_subcommand(embed_cmd)) {
      run_embed(embed, err);
    } else if (app.got_subcommand(summarize_cmd)) {
      run_summarize(summarize, err);
    } else if (app.got_subcommand(evaluate_cmd)) {
      run_evaluate(evaluate, err);
    } else if (app.got_subcommand(report_cmd)) {
      run_report(report, global, err);
    } else if (app.got_subcommand(plot_cmd)) {
      run_plot(plot, global, err);
    }
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(std::move(args), std::cout, std::cerr);
}

}  // namespace dsf::cli
