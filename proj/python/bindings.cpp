#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "dsfsum/diagnostics.hpp"
#include "dsfsum/embedding.hpp"
#include "dsfsum/evaluator.hpp"
#include "dsfsum/feature_io.hpp"
#include "dsfsum/segmenter.hpp"
#include "dsfsum/summarizer.hpp"
#include "dsfsum/trainer.hpp"

namespace py = pybind11;
using namespace dsf;

namespace {

std::vector<Eigen::VectorXd> rows_of(const Eigen::MatrixXd& m) {
  std::vector<Eigen::VectorXd> rows;
  rows.reserve(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(m.row(i).transpose());
  return rows;
}

std::vector<Interval> to_intervals(const std::vector<std::pair<double, double>>& pairs) {
  std::vector<Interval> out;
  for (const auto& [s, e] : pairs) out.push_back({s, e});
  return out;
}

std::vector<std::pair<double, double>> from_intervals(const std::vector<Interval>& ivs) {
  std::vector<std::pair<double, double>> out;
  for (const Interval& iv : ivs) out.emplace_back(iv.start_s, iv.end_s);
  return out;
}

PointSet point_set(const Eigen::MatrixXd& xs, const std::vector<double>& starts,
                   const std::vector<double>& ends, const std::vector<double>& costs) {
  PointSet ps;
  const auto n = static_cast<std::size_t>(xs.rows());
  if ((!starts.empty() && starts.size() != n) || (!ends.empty() && ends.size() != n) ||
      (!costs.empty() && costs.size() != n))
    throw ValidationError("starts/ends/costs must match the number of points");
  for (std::size_t i = 0; i < n; ++i) {
    PointEntry e;
    e.index = static_cast<int>(i);
    e.start_s = starts.empty() ? static_cast<double>(i) : starts[i];
    e.end_s = ends.empty() ? e.start_s + 1.0 : ends[i];
    e.cost = costs.empty() ? 1.0 : costs[i];
    e.x = xs.row(static_cast<Eigen::Index>(i)).transpose();
    ps.points.push_back(std::move(e));
  }
  return ps;
}

py::dict summary_dict(const Summary& s) {
  py::dict d;
  d["selected"] = s.selected;
  d["k"] = s.k;
  d["objective"] = s.objective_value;
  d["timeline"] = from_intervals(s.merged_timeline);
  return d;
}

TrainingPair make_pair(const std::string& video_id, const Eigen::MatrixXd& frames,
                       const Eigen::VectorXd& y) {
  TrainingPair p;
  p.video_id = video_id;
  p.frames = rows_of(frames);
  p.y = y;
  p.positive = true;
  return p;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "joint video/text embedding, k-medoids summarization and f-measure evaluation";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<FeatureTrack>(m, "FeatureTrack")
      .def(py::init([](const std::string& video_id, double fps, double duration_s,
                       const std::vector<double>& times, const Eigen::MatrixXd& frames) {
             FeatureTrack t;
             t.video_id = video_id;
             t.dim = static_cast<int>(frames.cols());
             t.fps = fps;
             t.duration_s = duration_s;
             t.times = times;
             t.frames = rows_of(frames);
             validate(t);
             return t;
           }),
           py::arg("video_id"), py::arg("fps"), py::arg("duration_s"), py::arg("times"),
           py::arg("frames"))
      .def_readonly("video_id", &FeatureTrack::video_id)
      .def_readonly("dim", &FeatureTrack::dim)
      .def_readonly("fps", &FeatureTrack::fps)
      .def_readonly("duration_s", &FeatureTrack::duration_s)
      .def_readonly("times", &FeatureTrack::times)
      .def_readonly("frames", &FeatureTrack::frames)
      .def("__len__", &FeatureTrack::frame_count);

  py::class_<Segment>(m, "Segment")
      .def_readonly("index", &Segment::index)
      .def_readonly("start_s", &Segment::start_s)
      .def_readonly("end_s", &Segment::end_s)
      .def_readonly("cost", &Segment::cost)
      .def_readonly("degenerate", &Segment::degenerate)
      .def_readonly("frame_indices", &Segment::frame_indices)
      .def_readonly("frames", &Segment::frames);

  py::class_<ProjectionHead>(m, "ProjectionHead")
      .def_readonly("W1", &ProjectionHead::W1)
      .def_readonly("b1", &ProjectionHead::b1)
      .def_readonly("W2", &ProjectionHead::W2)
      .def_readonly("b2", &ProjectionHead::b2)
      .def_property_readonly("input_dim", &ProjectionHead::input_dim)
      .def_property_readonly("hidden_dim", &ProjectionHead::hidden_dim)
      .def_property_readonly("output_dim", &ProjectionHead::output_dim);

  m.def("read_feature_track", &read_feature_track, py::arg("path"));
  m.def("write_feature_track", &write_feature_track, py::arg("path"), py::arg("track"));

  m.def(
      "extract_segments",
      [](const FeatureTrack& track, double window_s, double stride_s, double sample_fps) {
        return extract_segments(track, {window_s, stride_s, sample_fps});
      },
      py::arg("track"), py::arg("window_s") = 5.0, py::arg("stride_s") = 1.0,
      py::arg("sample_fps") = 1.0);
  m.def("segment_count", &segment_count, py::arg("duration_s"), py::arg("window_s"),
        py::arg("stride_s"));

  m.def("init_head", &init_head, py::arg("d_in"), py::arg("hidden"), py::arg("d_out"),
        py::arg("seed"));
  m.def(
      "video_forward",
      [](const Eigen::MatrixXd& frames, const ProjectionHead& head) {
        const auto rows = rows_of(frames);
        return video_forward(std::span<const Eigen::VectorXd>(rows), head);
      },
      py::arg("frames"), py::arg("head"), "Rows of `frames` are the segment's descriptors.");
  m.def("text_forward", &text_forward, py::arg("y"), py::arg("head"));
  m.def("distance", &distance, py::arg("x"), py::arg("y"));

  m.def("contrastive_loss", &contrastive_loss, py::arg("x"), py::arg("y"), py::arg("positive"),
        py::arg("alpha"));
  m.def(
      "train",
      [](const std::vector<std::tuple<std::string, Eigen::MatrixXd, Eigen::VectorXd>>& pairs,
         int negatives_per_positive, double learning_rate, int epochs, int hidden_dim,
         int embed_dim, std::uint64_t seed, double fixed_margin) {
        std::vector<TrainingPair> ps;
        for (const auto& [vid, frames, y] : pairs) ps.push_back(make_pair(vid, frames, y));
        TrainConfig cfg;
        cfg.negatives_per_positive = negatives_per_positive;
        cfg.learning_rate = learning_rate;
        cfg.epochs = epochs;
        cfg.hidden_dim = hidden_dim;
        cfg.embed_dim = embed_dim;
        cfg.seed = seed;
        if (fixed_margin > 0) {
          cfg.margin_policy = TrainConfig::MarginPolicy::kFixed;
          cfg.fixed_margin = fixed_margin;
        }
        const TrainResult r = train(ps, cfg);
        py::dict out;
        out["video_head"] = r.video;
        out["text_head"] = r.text;
        out["alpha"] = r.log.alpha;
        std::vector<double> losses;
        for (const auto& s : r.log.steps) losses.push_back(s.loss);
        out["step_losses"] = losses;
        out["epoch_mean_loss"] = r.log.epoch_mean_loss;
        return out;
      },
      py::arg("pairs"), py::arg("negatives_per_positive") = 20, py::arg("learning_rate") = 2e-4,
      py::arg("epochs") = 4, py::arg("hidden_dim") = 1000, py::arg("embed_dim") = 300,
      py::arg("seed") = 0, py::arg("fixed_margin") = 0.0,
      "Pairs are (video_id, frames matrix, description vector) positives.");
  m.def(
      "gradient_check",
      [](std::uint64_t seed, int video_dim, int text_dim, int hidden_dim, int embed_dim,
         int frames, double fd_step) {
        const GradCheckReport r =
            gradient_check(seed, {video_dim, text_dim, hidden_dim, embed_dim, frames}, fd_step);
        py::dict out;
        for (const auto& e : r.tensors) out[py::str(e.tensor)] = e.max_rel_error;
        out["max_rel_error"] = r.max_rel_error;
        return out;
      },
      py::arg("seed") = 0, py::arg("video_dim") = 5, py::arg("text_dim") = 6,
      py::arg("hidden_dim") = 4, py::arg("embed_dim") = 3, py::arg("frames") = 2,
      py::arg("fd_step") = 1e-3);

  const auto select_args = [](auto&& fn) { return fn; };
  m.def(
      "lazy_greedy_select",
      select_args([](const Eigen::MatrixXd& xs, int k, const std::vector<double>& starts,
                     const std::vector<double>& ends, const std::vector<double>& costs,
                     bool cost_aware, bool no_overlap) {
        return summary_dict(
            lazy_greedy_select(point_set(xs, starts, ends, costs), k, {cost_aware, no_overlap}));
      }),
      py::arg("points"), py::arg("k"), py::arg("starts") = std::vector<double>{},
      py::arg("ends") = std::vector<double>{}, py::arg("costs") = std::vector<double>{},
      py::arg("cost_aware") = false, py::arg("no_overlap") = false);
  m.def(
      "naive_greedy_select",
      select_args([](const Eigen::MatrixXd& xs, int k, const std::vector<double>& starts,
                     const std::vector<double>& ends, const std::vector<double>& costs,
                     bool cost_aware, bool no_overlap) {
        return summary_dict(
            naive_greedy_select(point_set(xs, starts, ends, costs), k, {cost_aware, no_overlap}));
      }),
      py::arg("points"), py::arg("k"), py::arg("starts") = std::vector<double>{},
      py::arg("ends") = std::vector<double>{}, py::arg("costs") = std::vector<double>{},
      py::arg("cost_aware") = false, py::arg("no_overlap") = false);
  m.def(
      "exhaustive_select",
      [](const Eigen::MatrixXd& xs, int k) {
        return summary_dict(exhaustive_select(point_set(xs, {}, {}, {}), k));
      },
      py::arg("points"), py::arg("k"));
  m.def(
      "uniform_baseline",
      [](const Eigen::MatrixXd& xs, int k) {
        return summary_dict(uniform_baseline(point_set(xs, {}, {}, {}), k));
      },
      py::arg("points"), py::arg("k"));
  m.def(
      "objective",
      [](const Eigen::MatrixXd& xs, const std::vector<int>& medoids) {
        return objective(point_set(xs, {}, {}, {}), medoids);
      },
      py::arg("points"), py::arg("medoids"));
  m.def("budget_k", &budget_k, py::arg("duration_s"), py::arg("window_s"),
        py::arg("ratio") = 0.15);

  m.def(
      "to_mask",
      [](const std::vector<std::pair<double, double>>& intervals, double fps, double duration_s) {
        const FrameMask mask = to_mask(to_intervals(intervals), fps, duration_s);
        std::vector<bool> bits(mask.bits.begin(), mask.bits.end());
        return bits;
      },
      py::arg("intervals"), py::arg("fps"), py::arg("duration_s"));
  m.def(
      "f_measure",
      [](const std::vector<bool>& candidate, const std::vector<bool>& reference) {
        FrameMask c, r;
        c.fps = r.fps = 1.0;
        c.bits.assign(candidate.begin(), candidate.end());
        r.bits.assign(reference.begin(), reference.end());
        const PRF prf = f_measure(c, r);
        return py::make_tuple(prf.precision, prf.recall, prf.f);
      },
      py::arg("candidate"), py::arg("reference"));
  m.def(
      "human_agreement",
      [](const std::vector<std::vector<std::pair<double, double>>>& annotators, double fps,
         double duration_s) {
        ReferenceSummarySet refs;
        refs.video_id = "py";
        refs.fps = fps;
        refs.duration_s = duration_s;
        for (std::size_t i = 0; i < annotators.size(); ++i)
          refs.references.push_back(
              {"a" + std::to_string(i), to_intervals(annotators[i])});
        const HumanAgreement agreement = human_agreement(refs);
        py::dict out;
        std::vector<double> per;
        for (const auto& e : agreement.per_annotator) per.push_back(e.mean_f);
        out["per_annotator"] = per;
        out["min"] = agreement.f_min;
        out["mean"] = agreement.f_mean;
        out["max"] = agreement.f_max;
        return out;
      },
      py::arg("annotators"), py::arg("fps"), py::arg("duration_s"));

  m.def(
      "pca_project",
      [](const Eigen::MatrixXd& xs) {
        const auto coords = pca_project(rows_of(xs));
        Eigen::MatrixXd out(static_cast<Eigen::Index>(coords.size()), 2);
        for (std::size_t i = 0; i < coords.size(); ++i)
          out.row(static_cast<Eigen::Index>(i)) = coords[i].transpose();
        return out;
      },
      py::arg("points"));

  py::class_<SyntheticWorld>(m, "SyntheticWorld")
      .def_readonly("tracks", &SyntheticWorld::tracks)
      .def_readonly("cluster_of_video", &SyntheticWorld::cluster_of_video)
      .def("training_pairs",
           [](const SyntheticWorld& w, int frames_per_pair) {
             std::vector<std::tuple<std::string, Eigen::MatrixXd, Eigen::VectorXd>> out;
             for (const TrainingPair& p : w.training_pairs(frames_per_pair)) {
               Eigen::MatrixXd frames(static_cast<Eigen::Index>(p.frames.size()),
                                      p.frames.front().size());
               for (std::size_t i = 0; i < p.frames.size(); ++i)
                 frames.row(static_cast<Eigen::Index>(i)) = p.frames[i].transpose();
               out.emplace_back(p.video_id, std::move(frames), p.y);
             }
             return out;
           },
           py::arg("frames_per_pair"));
  m.def(
      "make_synthetic_world",
      [](std::uint64_t seed, int n_videos, int n_clusters, int video_dim, int text_dim,
         double fps, double duration_s, int descs_per_video, int annotators, double noise_scale,
         int latent_dim, double latent_scale, double center_scale) {
        SynthConfig cfg;
        cfg.seed = seed;
        cfg.n_videos = n_videos;
        cfg.n_clusters = n_clusters;
        cfg.video_dim = video_dim;
        cfg.text_dim = text_dim;
        cfg.fps = fps;
        cfg.duration_s = duration_s;
        cfg.descs_per_video = descs_per_video;
        cfg.annotators = annotators;
        cfg.noise_scale = noise_scale;
        cfg.latent_dim = latent_dim;
        cfg.latent_scale = latent_scale;
        cfg.center_scale = center_scale;
        return make_synthetic_world(cfg);
      },
      py::arg("seed") = 0, py::arg("n_videos") = 8, py::arg("n_clusters") = 2,
      py::arg("video_dim") = 16, py::arg("text_dim") = 12, py::arg("fps") = 2.0,
      py::arg("duration_s") = 30.0, py::arg("descs_per_video") = 1, py::arg("annotators") = 3,
      py::arg("noise_scale") = 0.05, py::arg("latent_dim") = 2, py::arg("latent_scale") = 0.5,
      py::arg("center_scale") = 0.8);
  m.def("make_scene_track", &make_scene_track, py::arg("seed"), py::arg("n_scenes"),
        py::arg("scene_len_s"), py::arg("n_blocks"), py::arg("dim"), py::arg("fps"),
        py::arg("noise_scale"), py::arg("video_id") = "scene_track");

#ifdef VERSION_INFO
#define STRINGIFY(x) #x
#define MACRO_STRINGIFY(x) STRINGIFY(x)
  m.attr("__version__") = MACRO_STRINGIFY(VERSION_INFO);
#else
  m.attr("__version__") = "dev";
#endif
}
