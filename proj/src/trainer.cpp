#include "dsfsum/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>

#include "dsfsum/rng.hpp"

namespace dsf {
namespace {

using nlohmann::ordered_json;

void check_config(const TrainConfig& c) {
  if (c.negatives_per_positive < 1)
    throw ValidationError("train: negatives_per_positive must be >= 1");
  if (!(c.learning_rate >= 0) || !std::isfinite(c.learning_rate))
    throw ValidationError("train: learning_rate must be finite and >= 0");
  if (c.epochs < 1) throw ValidationError("train: epochs must be >= 1");
  if (!(c.beta1 >= 0 && c.beta1 < 1) || !(c.beta2 >= 0 && c.beta2 < 1))
    throw ValidationError("train: betas must be in [0, 1)");
  if (!(c.epsilon > 0)) throw ValidationError("train: epsilon must be > 0");
  if (c.hidden_dim < 1 || c.embed_dim < 1)
    throw ValidationError("train: hidden_dim and embed_dim must be >= 1");
}

// dL/dX for the pair loss given X, Y. dL/dY is its negation.
Eigen::VectorXd loss_grad_wrt_x(const SemanticPoint& x, const SemanticPoint& y, bool positive,
                                double alpha) {
  if (positive) return 2.0 * (x - y);
  const double d = (x - y).squaredNorm();
  if (d >= alpha) return Eigen::VectorXd::Zero(x.size());
  return -2.0 * (x - y);
}

// Backpropagates g_out (dL/d pooled output) through one branch.
HeadGradients branch_backward(const BranchCache& cache, std::span<const Eigen::VectorXd> inputs,
                              const ProjectionHead& head, const Eigen::VectorXd& g_out,
                              bool pooled) {
  HeadGradients g = HeadGradients::zeros_like(head);
  const double scale = pooled ? 1.0 / static_cast<double>(inputs.size()) : 1.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Eigen::VectorXd& a1 = cache.a1[i];
    const Eigen::VectorXd& a2 = cache.a2[i];
    const Eigen::VectorXd g_z2 =
        (g_out * scale).cwiseProduct(Eigen::VectorXd::Ones(a2.size()) - a2.cwiseProduct(a2));
    g.b2 += g_z2;
    g.w2 += a1 * g_z2.transpose();
    const Eigen::VectorXd g_a1 = head.W2 * g_z2;
    const Eigen::VectorXd g_z1 =
        g_a1.cwiseProduct(Eigen::VectorXd::Ones(a1.size()) - a1.cwiseProduct(a1));
    g.b1 += g_z1;
    g.w1 += inputs[i] * g_z1.transpose();
  }
  return g;
}

double pair_loss_value(std::span<const Eigen::VectorXd> frames, const Eigen::VectorXd& y,
                       bool positive, const ProjectionHead& video_head,
                       const ProjectionHead& text_head, double alpha) {
  return contrastive_loss(video_forward(frames, video_head), text_forward(y, text_head), positive,
                          alpha);
}

template <typename Tensor>
void adam_update(Tensor& p, const Tensor& g, Tensor& m, Tensor& v, double lr, double beta1,
                 double beta2, double eps, double bias1, double bias2) {
  m = beta1 * m + (1.0 - beta1) * g;
  v = (beta2 * v.array() + (1.0 - beta2) * g.array().square()).matrix();
  p.array() -= lr * (m.array() / bias1) / ((v.array() / bias2).sqrt() + eps);
}

}  // namespace

HeadGradients HeadGradients::zeros_like(const ProjectionHead& head) {
  HeadGradients g;
  g.w1 = Eigen::MatrixXd::Zero(head.W1.rows(), head.W1.cols());
  g.b1 = Eigen::VectorXd::Zero(head.b1.size());
  g.w2 = Eigen::MatrixXd::Zero(head.W2.rows(), head.W2.cols());
  g.b2 = Eigen::VectorXd::Zero(head.b2.size());
  return g;
}

void HeadGradients::operator+=(const HeadGradients& other) {
  w1 += other.w1;
  b1 += other.b1;
  w2 += other.w2;
  b2 += other.b2;
}

void PairGradients::operator+=(const PairGradients& other) {
  loss += other.loss;
  video += other.video;
  text += other.text;
}

double contrastive_loss(const SemanticPoint& x, const SemanticPoint& y, bool positive,
                        double alpha) {
  if (!(alpha > 0) || !std::isfinite(alpha))
    throw ValidationError("contrastive_loss: alpha must be finite and > 0");
  const double d = distance(x, y);
  return positive ? d : std::max(0.0, alpha - d);
}

double derive_margin(std::span<const TrainingPair> positives, const ProjectionHead& video_head,
                     const ProjectionHead& text_head) {
  double alpha = -1.0;
  for (const TrainingPair& p : positives) {
    if (!p.positive) continue;
    const double d = distance(video_forward(std::span<const Eigen::VectorXd>(p.frames), video_head),
                              text_forward(p.y, text_head));
    alpha = std::max(alpha, d);
  }
  if (alpha < 0) throw ValidationError("derive_margin: no positive pairs");
  return alpha;
}

PairGradients loss_gradients(std::span<const Eigen::VectorXd> frames, const Eigen::VectorXd& y,
                             bool positive, const ProjectionHead& video_head,
                             const ProjectionHead& text_head, double alpha) {
  const BranchCache video_cache = video_forward_cached(frames, video_head);
  const BranchCache text_cache = text_forward_cached(y, text_head);

  PairGradients g;
  g.loss = contrastive_loss(video_cache.out, text_cache.out, positive, alpha);
  const Eigen::VectorXd g_x = loss_grad_wrt_x(video_cache.out, text_cache.out, positive, alpha);
  if (g_x.isZero(0.0)) {
    g.video = HeadGradients::zeros_like(video_head);
    g.text = HeadGradients::zeros_like(text_head);
    return g;
  }
  const std::vector<Eigen::VectorXd> y_in = {y};
  g.video = branch_backward(video_cache, frames, video_head, g_x, /*pooled=*/true);
  g.text = branch_backward(text_cache, y_in, text_head, -g_x, /*pooled=*/false);
  return g;
}

PairGradients loss_gradients(const TrainingPair& pair, const ProjectionHead& video_head,
                             const ProjectionHead& text_head, double alpha) {
  return loss_gradients(std::span<const Eigen::VectorXd>(pair.frames), pair.y, pair.positive,
                        video_head, text_head, alpha);
}

AdamState AdamState::zeros_like(const ProjectionHead& video, const ProjectionHead& text) {
  AdamState s;
  s.m_video = HeadGradients::zeros_like(video);
  s.v_video = HeadGradients::zeros_like(video);
  s.m_text = HeadGradients::zeros_like(text);
  s.v_text = HeadGradients::zeros_like(text);
  s.step = 0;
  return s;
}

void adam_step(ProjectionHead& video, ProjectionHead& text, const HeadGradients& grad_video,
               const HeadGradients& grad_text, AdamState& state, const TrainConfig& c) {
  state.step += 1;
  const double bias1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  auto apply = [&](ProjectionHead& h, const HeadGradients& g, HeadGradients& m, HeadGradients& v) {
    adam_update(h.W1, g.w1, m.w1, v.w1, c.learning_rate, c.beta1, c.beta2, c.epsilon, bias1, bias2);
    adam_update(h.b1, g.b1, m.b1, v.b1, c.learning_rate, c.beta1, c.beta2, c.epsilon, bias1, bias2);
    adam_update(h.W2, g.w2, m.w2, v.w2, c.learning_rate, c.beta1, c.beta2, c.epsilon, bias1, bias2);
    adam_update(h.b2, g.b2, m.b2, v.b2, c.learning_rate, c.beta1, c.beta2, c.epsilon, bias1, bias2);
  };
  apply(video, grad_video, state.m_video, state.v_video);
  apply(text, grad_text, state.m_text, state.v_text);
}

std::vector<int> negative_pool(std::span<const TrainingPair> pairs, const std::string& video_id) {
  std::vector<int> out;
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if (pairs[i].video_id != video_id) out.push_back(static_cast<int>(i));
  return out;
}

TrainResult train(std::span<const TrainingPair> positives, const TrainConfig& cfg) {
  check_config(cfg);
  if (positives.empty()) throw ValidationError("train: no positive pairs");

  const Eigen::Index d_video = positives.front().frames.empty()
                                   ? 0
                                   : positives.front().frames.front().size();
  const Eigen::Index d_text = positives.front().y.size();
  std::map<std::string, int> videos;
  for (std::size_t i = 0; i < positives.size(); ++i) {
    const TrainingPair& p = positives[i];
    if (!p.positive)
      throw ValidationError("train: pair " + std::to_string(i) + " is not a positive pair");
    if (p.frames.empty())
      throw ValidationError("train: pair " + std::to_string(i) + " has no frames");
    for (const Eigen::VectorXd& f : p.frames)
      if (f.size() != d_video)
        throw ValidationError("train: inconsistent video feature dimension at pair " +
                              std::to_string(i));
    if (p.y.size() != d_text)
      throw ValidationError("train: inconsistent description dimension at pair " +
                            std::to_string(i));
    videos.emplace(p.video_id, 0);
  }
  if (videos.size() < 2)
    throw ValidationError("train: need at least 2 distinct videos to sample negatives");

  TrainResult r;
  r.video = init_head(static_cast<int>(d_video), cfg.hidden_dim, cfg.embed_dim,
                      derive_seed(cfg.seed, 0));
  r.text =
      init_head(static_cast<int>(d_text), cfg.hidden_dim, cfg.embed_dim, derive_seed(cfg.seed, 1));

  const double alpha = cfg.margin_policy == TrainConfig::MarginPolicy::kDerived
                           ? derive_margin(positives, r.video, r.text)
                           : cfg.fixed_margin;
  if (!(alpha > 0) || !std::isfinite(alpha))
    throw ValidationError("train: degenerate margin alpha=" + std::to_string(alpha) +
                          "; every negative hinge would be inactive or undefined");
  r.log.alpha = alpha;

  // negative candidates per video, in input order
  std::map<std::string, std::vector<int>> pools;
  for (const auto& [vid, unused] : videos) pools[vid] = negative_pool(positives, vid);

  std::mt19937_64 rng(derive_seed(cfg.seed, 2));
  std::vector<std::size_t> order(positives.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  AdamState adam = AdamState::zeros_like(r.video, r.text);
  int global_step = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t idx : order) {
      const TrainingPair& pos = positives[idx];
      const std::vector<int>& pool = pools[pos.video_id];
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);

      // shared video forward: the segment is the same across the 1 + N pairs,
      // so dL/dX terms are summed and backpropagated once
      const BranchCache video_cache =
          video_forward_cached(std::span<const Eigen::VectorXd>(pos.frames), r.video);
      Eigen::VectorXd g_x = Eigen::VectorXd::Zero(video_cache.out.size());
      PairGradients acc;
      acc.video = HeadGradients::zeros_like(r.video);
      acc.text = HeadGradients::zeros_like(r.text);

      auto accumulate = [&](const Eigen::VectorXd& y, bool positive) {
        const BranchCache text_cache = text_forward_cached(y, r.text);
        acc.loss += contrastive_loss(video_cache.out, text_cache.out, positive, alpha);
        const Eigen::VectorXd g = loss_grad_wrt_x(video_cache.out, text_cache.out, positive, alpha);
        if (g.isZero(0.0)) return;
        g_x += g;
        const std::vector<Eigen::VectorXd> y_in = {y};
        acc.text += branch_backward(text_cache, y_in, r.text, -g, /*pooled=*/false);
      };

      accumulate(pos.y, true);
      for (int k = 0; k < cfg.negatives_per_positive; ++k)
        accumulate(positives[static_cast<std::size_t>(pool[pick(rng)])].y, false);

      if (!g_x.isZero(0.0))
        acc.video = branch_backward(video_cache, std::span<const Eigen::VectorXd>(pos.frames),
                                    r.video, g_x, /*pooled=*/true);

      if (!std::isfinite(acc.loss))
        throw Error("train: non-finite loss at epoch " + std::to_string(epoch) + ", step " +
                    std::to_string(global_step + 1) + "; aborting");

      adam_step(r.video, r.text, acc.video, acc.text, adam, cfg);
      ++global_step;
      r.log.steps.push_back({epoch, global_step, acc.loss});
      epoch_loss += acc.loss;
    }
    r.log.epoch_mean_loss.push_back(epoch_loss / static_cast<double>(positives.size()));
  }
  return r;
}

void write_train_log(const std::filesystem::path& path, const TrainLog& log,
                     const TrainConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  ordered_json h;
  h["alpha"] = log.alpha;
  h["epochs"] = cfg.epochs;
  h["steps"] = log.steps.size();
  ordered_json c;
  c["margin_policy"] =
      cfg.margin_policy == TrainConfig::MarginPolicy::kDerived ? "derived" : "fixed";
  if (cfg.margin_policy == TrainConfig::MarginPolicy::kFixed) c["fixed_margin"] = cfg.fixed_margin;
  c["negatives_per_positive"] = cfg.negatives_per_positive;
  c["learning_rate"] = cfg.learning_rate;
  c["beta1"] = cfg.beta1;
  c["beta2"] = cfg.beta2;
  c["epsilon"] = cfg.epsilon;
  c["seed"] = cfg.seed;
  c["hidden_dim"] = cfg.hidden_dim;
  c["embed_dim"] = cfg.embed_dim;
  h["config"] = c;
  out << h.dump() << "\n";
  std::size_t next = 0;
  for (std::size_t epoch = 0; epoch < log.epoch_mean_loss.size(); ++epoch) {
    while (next < log.steps.size() &&
           log.steps[next].epoch == static_cast<int>(epoch) + 1) {
      const TrainLog::Step& s = log.steps[next];
      ordered_json r;
      r["epoch"] = s.epoch;
      r["step"] = s.step;
      r["loss"] = s.loss;
      out << r.dump() << "\n";
      ++next;
    }
    ordered_json e;
    e["epoch"] = epoch + 1;
    e["mean_loss"] = log.epoch_mean_loss[epoch];
    out << e.dump() << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

GradCheckReport gradient_check(std::uint64_t seed, const GradCheckDims& dims, double fd_step) {
  if (dims.video_dim < 1 || dims.text_dim < 1 || dims.hidden_dim < 1 || dims.embed_dim < 1 ||
      dims.frames < 1)
    throw ValidationError("gradient_check: dimensions must be positive");
  if (!(fd_step > 0)) throw ValidationError("gradient_check: fd_step must be > 0");

  ProjectionHead video =
      init_head(dims.video_dim, dims.hidden_dim, dims.embed_dim, derive_seed(seed, 0));
  ProjectionHead text =
      init_head(dims.text_dim, dims.hidden_dim, dims.embed_dim, derive_seed(seed, 1));

  std::mt19937_64 rng(derive_seed(seed, 2));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Eigen::VectorXd> frames(static_cast<std::size_t>(dims.frames));
  for (auto& f : frames) {
    f.resize(dims.video_dim);
    for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = u(rng);
  }
  Eigen::VectorXd y(dims.text_dim);
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = u(rng);

  // margin comfortably above the current distance keeps the negative hinge
  // active and away from its kink across the finite-difference probes
  const double d0 = distance(video_forward(std::span<const Eigen::VectorXd>(frames), video),
                             text_forward(y, text));
  const double alpha = d0 + 0.5;

  GradCheckReport report;
  const char* names[8] = {"video.W1", "video.b1", "video.W2", "video.b2",
                          "text.W1",  "text.b1",  "text.W2",  "text.b2"};
  for (const char* n : names) report.tensors.push_back({n, 0.0});

  auto tensor_of = [](ProjectionHead& v, ProjectionHead& t, int which) -> Eigen::Map<Eigen::VectorXd> {
    switch (which) {
      case 0: return {v.W1.data(), v.W1.size()};
      case 1: return {v.b1.data(), v.b1.size()};
      case 2: return {v.W2.data(), v.W2.size()};
      case 3: return {v.b2.data(), v.b2.size()};
      case 4: return {t.W1.data(), t.W1.size()};
      case 5: return {t.b1.data(), t.b1.size()};
      case 6: return {t.W2.data(), t.W2.size()};
      default: return {t.b2.data(), t.b2.size()};
    }
  };

  for (bool positive : {true, false}) {
    const PairGradients analytic = loss_gradients(std::span<const Eigen::VectorXd>(frames), y,
                                                  positive, video, text, alpha);
    const Eigen::MatrixXd* mats[8] = {&analytic.video.w1, nullptr, &analytic.video.w2, nullptr,
                                      &analytic.text.w1,  nullptr, &analytic.text.w2,  nullptr};
    const Eigen::VectorXd* vecs[8] = {nullptr, &analytic.video.b1, nullptr, &analytic.video.b2,
                                      nullptr, &analytic.text.b1,  nullptr, &analytic.text.b2};
    for (int which = 0; which < 8; ++which) {
      ProjectionHead pv = video;
      ProjectionHead pt = text;
      auto params = tensor_of(pv, pt, which);
      for (Eigen::Index i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + fd_step;
        const double up = pair_loss_value(frames, y, positive, pv, pt, alpha);
        params[i] = saved - fd_step;
        const double down = pair_loss_value(frames, y, positive, pv, pt, alpha);
        params[i] = saved;
        const double numeric = (up - down) / (2.0 * fd_step);
        const double exact = mats[which] != nullptr ? (*mats[which])(i % mats[which]->rows(),
                                                                     i / mats[which]->rows())
                                                    : (*vecs[which])[i];
        const double rel = std::abs(exact - numeric) /
                           std::max({1.0, std::abs(exact), std::abs(numeric)});
        report.tensors[static_cast<std::size_t>(which)].max_rel_error =
            std::max(report.tensors[static_cast<std::size_t>(which)].max_rel_error, rel);
      }
    }
  }
  for (const auto& e : report.tensors)
    report.max_rel_error = std::max(report.max_rel_error, e.max_rel_error);
  return report;
}

}  // namespace dsf
