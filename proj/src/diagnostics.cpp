#include "dsfsum/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "dsfsum/rng.hpp"
#include "dsfsum/segmenter.hpp"

namespace dsf {
namespace {

Eigen::VectorXd gaussian_vector(std::mt19937_64& rng, int dim, double scale) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = gauss(rng) * scale;
  return v;
}

// bounded support keeps fresh draws inside the range spanned by earlier ones
Eigen::VectorXd uniform_vector(std::mt19937_64& rng, int dim, double half_width) {
  std::uniform_real_distribution<double> u(-half_width, half_width);
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = u(rng);
  return v;
}

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

std::vector<Eigen::Vector2d> pca_project(std::span<const Eigen::VectorXd> points) {
  if (points.size() < 2) throw ValidationError("pca_project: need at least 2 points");
  const Eigen::Index dim = points.front().size();
  for (const Eigen::VectorXd& p : points)
    if (p.size() != dim) throw ValidationError("pca_project: inconsistent dimensions");

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  for (const Eigen::VectorXd& p : points) mean += p;
  mean /= static_cast<double>(points.size());

  Eigen::MatrixXd centered(static_cast<Eigen::Index>(points.size()), dim);
  for (std::size_t i = 0; i < points.size(); ++i)
    centered.row(static_cast<Eigen::Index>(i)) = (points[i] - mean).transpose();

  const Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(points.size());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw Error("pca_project: eigendecomposition failed");

  // eigenvalues come out ascending; take the last two columns
  auto principal = [&solver, dim](Eigen::Index which) {
    Eigen::VectorXd v = solver.eigenvectors().col(dim - 1 - which);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0.0) v = -v;
    return v;
  };
  const Eigen::VectorXd pc1 = principal(0);
  const Eigen::VectorXd pc2 = dim >= 2 ? principal(1) : Eigen::VectorXd::Zero(dim);

  std::vector<Eigen::Vector2d> out;
  out.reserve(points.size());
  for (Eigen::Index i = 0; i < centered.rows(); ++i)
    out.emplace_back(centered.row(i).dot(pc1), centered.row(i).dot(pc2));
  return out;
}

KMeansResult kmeans(std::span<const Eigen::VectorXd> points, int k, std::uint64_t seed,
                    int max_iterations, int restarts) {
  if (points.empty()) throw ValidationError("kmeans: no points");
  if (k < 1 || static_cast<std::size_t>(k) > points.size())
    throw ValidationError("kmeans: k must be in [1, number of points]");
  if (max_iterations < 1 || restarts < 1)
    throw ValidationError("kmeans: iterations and restarts must be >= 1");

  const std::size_t n = points.size();
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();

  for (int restart = 0; restart < restarts; ++restart) {
    std::mt19937_64 rng(derive_seed(seed, static_cast<std::uint64_t>(restart)));
    // k distinct starting points via a partial Fisher-Yates shuffle
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (int i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), n - 1);
      std::swap(idx[static_cast<std::size_t>(i)], idx[pick(rng)]);
    }
    std::vector<Eigen::VectorXd> centers;
    for (int i = 0; i < k; ++i) centers.push_back(points[idx[static_cast<std::size_t>(i)]]);

    std::vector<int> labels(n, 0);
    for (int iter = 0; iter < max_iterations; ++iter) {
      bool changed = false;
      for (std::size_t i = 0; i < n; ++i) {
        int arg = 0;
        double bestd = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
          const double d = (points[i] - centers[static_cast<std::size_t>(c)]).squaredNorm();
          if (d < bestd) {
            bestd = d;
            arg = c;
          }
        }
        if (labels[i] != arg) {
          labels[i] = arg;
          changed = true;
        }
      }
      if (!changed && iter > 0) break;
      std::vector<Eigen::VectorXd> sums(static_cast<std::size_t>(k),
                                        Eigen::VectorXd::Zero(points.front().size()));
      std::vector<int> counts(static_cast<std::size_t>(k), 0);
      for (std::size_t i = 0; i < n; ++i) {
        sums[static_cast<std::size_t>(labels[i])] += points[i];
        counts[static_cast<std::size_t>(labels[i])] += 1;
      }
      for (int c = 0; c < k; ++c)
        if (counts[static_cast<std::size_t>(c)] > 0)
          centers[static_cast<std::size_t>(c)] =
              sums[static_cast<std::size_t>(c)] / counts[static_cast<std::size_t>(c)];
      // empty clusters keep their previous center
    }

    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      inertia += (points[i] - centers[static_cast<std::size_t>(labels[i])]).squaredNorm();
    if (inertia < best.inertia) {
      best.labels = labels;
      best.centers = centers;
      best.inertia = inertia;
    }
  }
  return best;
}

std::string scatter_svg(std::span<const Eigen::Vector2d> coords, std::span<const int> labels,
                        std::span<const std::string> point_labels) {
  if (coords.empty()) throw ValidationError("scatter_svg: no points");
  if (!labels.empty() && labels.size() != coords.size())
    throw ValidationError("scatter_svg: labels size mismatch");
  if (!point_labels.empty() && point_labels.size() != coords.size())
    throw ValidationError("scatter_svg: point_labels size mismatch");

  double min_x = coords[0].x(), max_x = coords[0].x();
  double min_y = coords[0].y(), max_y = coords[0].y();
  for (const Eigen::Vector2d& c : coords) {
    min_x = std::min(min_x, c.x());
    max_x = std::max(max_x, c.x());
    min_y = std::min(min_y, c.y());
    max_y = std::max(max_y, c.y());
  }
  const double span_x = std::max(max_x - min_x, 1e-12);
  const double span_y = std::max(max_y - min_y, 1e-12);

  const int size = 640;
  const int margin = 40;
  const double plot = size - 2.0 * margin;
  auto sx = [&](double x) { return margin + (x - min_x) / span_x * plot; };
  auto sy = [&](double y) { return margin + (max_y - y) / span_y * plot; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
      << "\" viewBox=\"0 0 " << size << " " << size << "\">\n";
  svg << "<rect width=\"" << size << "\" height=\"" << size << "\" fill=\"white\"/>\n";

  // temporal adjacency
  svg << "<polyline fill=\"none\" stroke=\"#bbbbbb\" stroke-width=\"1\" points=\"";
  for (const Eigen::Vector2d& c : coords) svg << sx(c.x()) << "," << sy(c.y()) << " ";
  svg << "\"/>\n";

  constexpr std::size_t palette_n = sizeof(kPalette) / sizeof(kPalette[0]);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const char* color =
        labels.empty() ? kPalette[0]
                       : kPalette[static_cast<std::size_t>(labels[i]) % palette_n];
    svg << "<circle cx=\"" << sx(coords[i].x()) << "\" cy=\"" << sy(coords[i].y())
        << "\" r=\"4\" fill=\"" << color << "\" fill-opacity=\"0.8\"/>\n";
    if (!point_labels.empty() && !point_labels[i].empty())
      svg << "<text x=\"" << (sx(coords[i].x()) + 6) << "\" y=\"" << (sy(coords[i].y()) - 6)
          << "\" font-size=\"10\">" << point_labels[i] << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

const FeatureTrack& SyntheticWorld::track_of(const std::string& video_id) const {
  for (const FeatureTrack& t : tracks)
    if (t.video_id == video_id) return t;
  throw ValidationError("synthetic world has no track '" + video_id + "'");
}

std::vector<TrainingPair> SyntheticWorld::training_pairs(int frames_per_pair) const {
  if (frames_per_pair < 1)
    throw ValidationError("training_pairs: frames_per_pair must be >= 1");
  std::vector<TrainingPair> out;
  for (const DescriptionVector& d : descriptions) {
    const FeatureTrack& track = track_of(d.video_id);
    TrainingPair p;
    p.video_id = d.video_id;
    p.y = d.y;
    p.positive = true;
    for (std::size_t idx : resample_indices(track, d.start_s, d.end_s, frames_per_pair))
      p.frames.push_back(track.frames[idx]);
    out.push_back(std::move(p));
  }
  return out;
}

SyntheticWorld make_synthetic_world(const SynthConfig& cfg) {
  if (cfg.n_videos < 1 || cfg.n_clusters < 1)
    throw ValidationError("synthetic world: need at least one video and one cluster");
  if (cfg.video_dim < 1 || cfg.text_dim < 1)
    throw ValidationError("synthetic world: dimensions must be positive");
  if (!(cfg.fps > 0) || !(cfg.duration_s > 0))
    throw ValidationError("synthetic world: fps and duration must be positive");
  if (cfg.descs_per_video < 1 || cfg.annotators < 1)
    throw ValidationError("synthetic world: need at least one description and one annotator");
  if (cfg.latent_dim < 0 || !(cfg.noise_scale >= 0))
    throw ValidationError("synthetic world: bad latent_dim or noise_scale");

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SyntheticWorld world;
  world.config = cfg;

  const double latent_col_scale =
      cfg.latent_dim > 0 ? cfg.latent_scale / std::sqrt(static_cast<double>(cfg.latent_dim)) : 0.0;
  for (int k = 0; k < cfg.n_clusters; ++k) {
    world.video_centers.push_back(gaussian_vector(rng, cfg.video_dim, cfg.center_scale));
    world.text_centers.push_back(gaussian_vector(rng, cfg.text_dim, cfg.center_scale));
  }
  // one latent->feature map per modality, shared by all clusters
  Eigen::MatrixXd video_map(cfg.video_dim, cfg.latent_dim);
  Eigen::MatrixXd text_map(cfg.text_dim, cfg.latent_dim);
  for (int j = 0; j < cfg.latent_dim; ++j) {
    video_map.col(j) = gaussian_vector(rng, cfg.video_dim, latent_col_scale);
    text_map.col(j) = gaussian_vector(rng, cfg.text_dim, latent_col_scale);
  }

  char buf[48];
  for (int i = 0; i < cfg.n_videos; ++i) {
    const int cluster = i % cfg.n_clusters;
    world.cluster_of_video.push_back(cluster);
    std::snprintf(buf, sizeof(buf), "video_%04d", i);
    const std::string video_id = buf;

    Eigen::VectorXd latent = uniform_vector(rng, std::max(cfg.latent_dim, 1), 1.0);
    latent.conservativeResize(cfg.latent_dim);
    const Eigen::VectorXd video_base =
        world.video_centers[static_cast<std::size_t>(cluster)] +
        (cfg.latent_dim > 0 ? Eigen::VectorXd(video_map * latent)
                            : Eigen::VectorXd::Zero(cfg.video_dim));
    const Eigen::VectorXd text_base =
        world.text_centers[static_cast<std::size_t>(cluster)] +
        (cfg.latent_dim > 0 ? Eigen::VectorXd(text_map * latent)
                            : Eigen::VectorXd::Zero(cfg.text_dim));

    FeatureTrack track;
    track.video_id = video_id;
    track.dim = cfg.video_dim;
    track.fps = cfg.fps;
    track.duration_s = cfg.duration_s;
    for (long j = 0;; ++j) {
      const double t = static_cast<double>(j) / cfg.fps;
      if (t > cfg.duration_s) break;
      track.times.push_back(t);
      track.frames.push_back(video_base + gaussian_vector(rng, cfg.video_dim, cfg.noise_scale));
    }
    world.tracks.push_back(std::move(track));

    for (int d = 0; d < cfg.descs_per_video; ++d) {
      DescriptionVector desc;
      std::snprintf(buf, sizeof(buf), "%s_desc_%02d", video_id.c_str(), d);
      desc.desc_id = buf;
      desc.video_id = video_id;
      desc.start_s = 0.0;
      desc.end_s = cfg.duration_s;
      desc.y = text_base + gaussian_vector(rng, cfg.text_dim, cfg.noise_scale);
      world.descriptions.push_back(std::move(desc));
    }

    ReferenceSummarySet refs;
    refs.video_id = video_id;
    refs.fps = cfg.fps;
    refs.duration_s = cfg.duration_s;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int a = 0; a < cfg.annotators; ++a) {
      ReferenceSummarySet::Reference ref;
      std::snprintf(buf, sizeof(buf), "annotator_%02d", a);
      ref.annotator_id = buf;
      // ~15% of the duration split over disjoint zones
      const int n_intervals = 1 + static_cast<int>(rng() % 2);
      const double zone = cfg.duration_s / n_intervals;
      const double len = 0.15 * cfg.duration_s / n_intervals;
      for (int z = 0; z < n_intervals; ++z) {
        const double start = z * zone + unit(rng) * (zone - len);
        ref.intervals.push_back({start, start + len});
      }
      refs.references.push_back(std::move(ref));
    }
    world.references.push_back(std::move(refs));
  }
  return world;
}

FeatureTrack make_scene_track(std::uint64_t seed, int n_scenes, double scene_len_s, int n_blocks,
                              int dim, double fps, double noise_scale,
                              const std::string& video_id) {
  if (n_scenes < 1 || n_blocks < 1 || dim < 1)
    throw ValidationError("make_scene_track: scenes, blocks and dim must be >= 1");
  if (!(scene_len_s > 0) || !(fps > 0))
    throw ValidationError("make_scene_track: scene_len_s and fps must be positive");

  std::mt19937_64 rng(seed);
  std::vector<Eigen::VectorXd> centers;
  for (int s = 0; s < n_scenes; ++s) centers.push_back(gaussian_vector(rng, dim, 0.8));

  FeatureTrack track;
  track.video_id = video_id;
  track.dim = dim;
  track.fps = fps;
  track.duration_s = scene_len_s * n_scenes * n_blocks;
  for (long j = 0;; ++j) {
    const double t = static_cast<double>(j) / fps;
    if (t > track.duration_s) break;
    const long block = static_cast<long>(t / scene_len_s);
    const int scene = static_cast<int>(block % n_scenes);
    track.times.push_back(t);
    track.frames.push_back(centers[static_cast<std::size_t>(scene)] +
                           gaussian_vector(rng, dim, noise_scale));
  }
  return track;
}

}  // namespace dsf
