#include "dsfsum/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace dsf {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void check_input_dim(Eigen::Index got, const ProjectionHead& head, const char* what) {
  if (got != head.W1.rows())
    throw ValidationError(std::string(what) + ": input has " + std::to_string(got) +
                          " components, head expects " + std::to_string(head.W1.rows()));
}

void check_head(const ProjectionHead& head) {
  if (head.W1.rows() < 1 || head.W1.cols() < 1 || head.W2.rows() < 1 || head.W2.cols() < 1)
    throw ValidationError("projection head: empty weight matrix");
  if (head.b1.size() != head.W1.cols() || head.W2.rows() != head.W1.cols() ||
      head.b2.size() != head.W2.cols())
    throw ValidationError("projection head: inconsistent parameter shapes");
}

Eigen::VectorXd lex_min_order_sum(const std::vector<Eigen::VectorXd>& outs) {
  // canonical (sorted) accumulation order: permutation invariant bit-for-bit
  std::vector<std::size_t> order(outs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&outs](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(outs[a].data(), outs[a].data() + outs[a].size(),
                                        outs[b].data(), outs[b].data() + outs[b].size());
  });
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(outs.front().size());
  for (std::size_t i : order) sum += outs[i];
  return sum;
}

ModelFile::Tensor matrix_tensor(const std::string& name, const Eigen::MatrixXd& m) {
  ModelFile::Tensor t;
  t.name = name;
  t.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  t.data.resize(static_cast<std::size_t>(m.size()));
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) t.data[k++] = static_cast<float>(m(i, j));
  return t;
}

ModelFile::Tensor vector_tensor(const std::string& name, const Eigen::VectorXd& v) {
  ModelFile::Tensor t;
  t.name = name;
  t.dims = {static_cast<std::uint64_t>(v.size())};
  t.data.resize(static_cast<std::size_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) t.data[static_cast<std::size_t>(i)] =
      static_cast<float>(v[i]);
  return t;
}

Eigen::MatrixXd tensor_matrix(const ModelFile::Tensor& t) {
  if (t.dims.size() != 2)
    throw ValidationError("model tensor '" + t.name + "': expected rank 2");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(t.dims[0]), static_cast<Eigen::Index>(t.dims[1]));
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = static_cast<double>(t.data[k++]);
  return m;
}

Eigen::VectorXd tensor_vector(const ModelFile::Tensor& t) {
  if (t.dims.size() != 1)
    throw ValidationError("model tensor '" + t.name + "': expected rank 1");
  Eigen::VectorXd v(static_cast<Eigen::Index>(t.dims[0]));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = static_cast<double>(t.data[i]);
  return v;
}

}  // namespace

ProjectionHead init_head(int d_in, int h, int d_out, std::uint64_t seed) {
  if (d_in <= 0 || h <= 0 || d_out <= 0)
    throw ValidationError("init_head: dimensions must be positive");
  std::mt19937_64 rng(seed);
  auto fill = [&rng](Eigen::MatrixXd& w) {
    const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = u(rng);
  };
  ProjectionHead head;
  head.W1.resize(d_in, h);
  head.b1 = Eigen::VectorXd::Zero(h);
  head.W2.resize(h, d_out);
  head.b2 = Eigen::VectorXd::Zero(d_out);
  fill(head.W1);
  fill(head.W2);
  return head;
}

SemanticPoint text_forward(const Eigen::VectorXd& y, const ProjectionHead& head) {
  check_head(head);
  check_input_dim(y.size(), head, "text_forward");
  const Eigen::VectorXd a1 = (head.W1.transpose() * y + head.b1).array().tanh();
  return (head.W2.transpose() * a1 + head.b2).array().tanh();
}

SemanticPoint video_forward(std::span<const Eigen::VectorXd> frames, const ProjectionHead& head) {
  check_head(head);
  if (frames.empty()) throw ValidationError("video_forward: segment has no frames");
  std::vector<Eigen::VectorXd> outs;
  outs.reserve(frames.size());
  for (const Eigen::VectorXd& v : frames) outs.push_back(text_forward(v, head));
  return lex_min_order_sum(outs) / static_cast<double>(frames.size());
}

SemanticPoint video_forward(const Segment& segment, const ProjectionHead& head) {
  return video_forward(std::span<const Eigen::VectorXd>(segment.frames), head);
}

double distance(const SemanticPoint& x, const SemanticPoint& y) {
  if (x.size() != y.size())
    throw ValidationError("distance: dimension mismatch (" + std::to_string(x.size()) + " vs " +
                          std::to_string(y.size()) + ")");
  return (x - y).squaredNorm();
}

BranchCache text_forward_cached(const Eigen::VectorXd& y, const ProjectionHead& head) {
  check_head(head);
  check_input_dim(y.size(), head, "text_forward");
  BranchCache c;
  c.a1.push_back((head.W1.transpose() * y + head.b1).array().tanh());
  c.a2.push_back((head.W2.transpose() * c.a1.back() + head.b2).array().tanh());
  c.out = c.a2.back();
  return c;
}

BranchCache video_forward_cached(std::span<const Eigen::VectorXd> frames,
                                 const ProjectionHead& head) {
  check_head(head);
  if (frames.empty()) throw ValidationError("video_forward: segment has no frames");
  BranchCache c;
  c.a1.reserve(frames.size());
  c.a2.reserve(frames.size());
  for (const Eigen::VectorXd& v : frames) {
    check_input_dim(v.size(), head, "video_forward");
    c.a1.push_back((head.W1.transpose() * v + head.b1).array().tanh());
    c.a2.push_back((head.W2.transpose() * c.a1.back() + head.b2).array().tanh());
  }
  c.out = lex_min_order_sum(c.a2) / static_cast<double>(frames.size());
  return c;
}

ModelFile heads_to_model(const ProjectionHead& video, const ProjectionHead& text,
                         nlohmann::json metadata) {
  check_head(video);
  check_head(text);
  if (video.hidden_dim() != text.hidden_dim() || video.output_dim() != text.output_dim())
    throw ValidationError("heads_to_model: video/text heads disagree on hidden or output size");
  ModelFile m;
  if (metadata.is_null()) metadata = nlohmann::json::object();
  metadata["video_input_dim"] = video.input_dim();
  metadata["text_input_dim"] = text.input_dim();
  metadata["hidden_dim"] = video.hidden_dim();
  metadata["embed_dim"] = video.output_dim();
  m.metadata = std::move(metadata);
  m.tensors.push_back(matrix_tensor("video.W1", video.W1));
  m.tensors.push_back(vector_tensor("video.b1", video.b1));
  m.tensors.push_back(matrix_tensor("video.W2", video.W2));
  m.tensors.push_back(vector_tensor("video.b2", video.b2));
  m.tensors.push_back(matrix_tensor("text.W1", text.W1));
  m.tensors.push_back(vector_tensor("text.b1", text.b1));
  m.tensors.push_back(matrix_tensor("text.W2", text.W2));
  m.tensors.push_back(vector_tensor("text.b2", text.b2));
  return m;
}

std::pair<ProjectionHead, ProjectionHead> heads_from_model(const ModelFile& model) {
  validate(model);
  auto load = [&model](const char* prefix) {
    ProjectionHead h;
    h.W1 = tensor_matrix(model.require(std::string(prefix) + ".W1"));
    h.b1 = tensor_vector(model.require(std::string(prefix) + ".b1"));
    h.W2 = tensor_matrix(model.require(std::string(prefix) + ".W2"));
    h.b2 = tensor_vector(model.require(std::string(prefix) + ".b2"));
    check_head(h);
    return h;
  };
  ProjectionHead video = load("video");
  ProjectionHead text = load("text");
  if (video.hidden_dim() != text.hidden_dim() || video.output_dim() != text.output_dim())
    throw ValidationError("model: video/text heads disagree on hidden or output size");
  return {std::move(video), std::move(text)};
}

void write_embedded_points(const std::filesystem::path& path, const EmbeddedPoints& pts) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  ordered_json h;
  h["video_id"] = pts.video_id;
  h["dim"] = pts.dim;
  h["count"] = pts.points.size();
  out << h.dump() << "\n";
  for (const auto& [index, x] : pts.points) {
    if (x.size() != pts.dim)
      throw ValidationError("embedded points: point " + std::to_string(index) +
                            " has wrong dimension");
    ordered_json r;
    r["index"] = index;
    json arr = json::array();
    for (Eigen::Index i = 0; i < x.size(); ++i) arr.push_back(x[i]);
    r["x"] = arr;
    out << r.dump() << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

EmbeddedPoints read_embedded_points(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  auto bad = [&path, &lineno](const std::string& msg) {
    return ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + msg);
  };

  if (!std::getline(in, line)) throw ValidationError(path.string() + ": empty points file");
  ++lineno;
  json h;
  try {
    h = json::parse(line);
  } catch (const json::exception& e) {
    throw bad(std::string("malformed JSON record: ") + e.what());
  }

  EmbeddedPoints pts;
  try {
    pts.video_id = h.at("video_id").get<std::string>();
    pts.dim = h.at("dim").get<int>();
  } catch (const json::exception& e) {
    throw bad(std::string("malformed header: ") + e.what());
  }
  if (pts.dim <= 0) throw bad("dim must be positive");

  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json r;
    try {
      r = json::parse(line);
    } catch (const json::exception& e) {
      throw bad(std::string("malformed JSON record: ") + e.what());
    }
    int index = 0;
    Eigen::VectorXd x;
    try {
      index = r.at("index").get<int>();
      const auto& arr = r.at("x");
      x.resize(static_cast<Eigen::Index>(arr.size()));
      for (std::size_t i = 0; i < arr.size(); ++i) x[static_cast<Eigen::Index>(i)] =
          arr[i].get<double>();
    } catch (const json::exception& e) {
      throw bad(std::string("malformed point record: ") + e.what());
    }
    if (x.size() != pts.dim) throw bad("point has wrong dimension");
    for (Eigen::Index i = 0; i < x.size(); ++i)
      if (!std::isfinite(x[i])) throw bad("non-finite component in point");
    pts.points.emplace_back(index, std::move(x));
  }
  return pts;
}

}  // namespace dsf
