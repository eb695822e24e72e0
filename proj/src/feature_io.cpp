#include "dsfsum/feature_io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace dsf {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string loc(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line);
}

std::ifstream open_input(const std::filesystem::path& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

json parse_line(const std::string& text, const std::filesystem::path& path, std::size_t line) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {  // parse errors and number overflow
    throw ValidationError(loc(path, line) + ": malformed JSON record: " + e.what());
  }
}

const json& field(const json& j, const char* key, const std::filesystem::path& path,
                  std::size_t line) {
  auto it = j.find(key);
  if (it == j.end())
    throw ValidationError(loc(path, line) + ": missing field '" + std::string(key) + "'");
  return *it;
}

std::string string_field(const json& j, const char* key, const std::filesystem::path& path,
                         std::size_t line) {
  const json& v = field(j, key, path, line);
  if (!v.is_string())
    throw ValidationError(loc(path, line) + ": field '" + std::string(key) +
                          "' must be a string");
  return v.get<std::string>();
}

double finite_field(const json& j, const char* key, const std::filesystem::path& path,
                    std::size_t line) {
  const json& v = field(j, key, path, line);
  if (!v.is_number())
    throw ValidationError(loc(path, line) + ": field '" + std::string(key) +
                          "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x))
    throw ValidationError(loc(path, line) + ": field '" + std::string(key) + "' is not finite");
  return x;
}

Eigen::VectorXd vector_field(const json& j, const char* key, const std::filesystem::path& path,
                             std::size_t line) {
  const json& v = field(j, key, path, line);
  if (!v.is_array())
    throw ValidationError(loc(path, line) + ": field '" + std::string(key) +
                          "' must be an array");
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number())
      throw ValidationError(loc(path, line) + ": '" + std::string(key) + "[" +
                            std::to_string(i) + "]' must be a number");
    const double x = v[i].get<double>();
    if (!std::isfinite(x))
      throw ValidationError(loc(path, line) + ": '" + std::string(key) + "[" +
                            std::to_string(i) + "]' is not finite");
    out[static_cast<Eigen::Index>(i)] = x;
  }
  return out;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

void require_finite_vector(const Eigen::VectorXd& v, const std::string& what) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i]))
      throw ValidationError(what + " contains a non-finite value at component " +
                            std::to_string(i));
}

// ---- binary model container -------------------------------------------------

constexpr std::array<char, 4> kModelMagic = {'D', 'S', 'F', 'E'};
constexpr std::uint32_t kModelVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                 static_cast<char>((v >> 16) & 0xff),
                                 static_cast<char>((v >> 24) & 0xff)};
  out.write(b.data(), b.size());
}

void put_u64(std::ostream& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v & 0xffffffffull));
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
}

void read_exact(std::istream& in, char* dst, std::size_t n, const std::string& what) {
  in.read(dst, static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n)
    throw ValidationError("model file truncated while reading " + what);
}

std::uint32_t get_u32(std::istream& in, const std::string& what) {
  std::array<unsigned char, 4> b;
  read_exact(in, reinterpret_cast<char*>(b.data()), 4, what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t get_u64(std::istream& in, const std::string& what) {
  const std::uint64_t lo = get_u32(in, what);
  const std::uint64_t hi = get_u32(in, what);
  return lo | (hi << 32);
}

void put_f32_block(std::ostream& out, const std::vector<float>& v) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(float)));
  } else {
    for (float f : v) put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
}

void get_f32_block(std::istream& in, std::vector<float>& v, const std::string& what) {
  if constexpr (std::endian::native == std::endian::little) {
    read_exact(in, reinterpret_cast<char*>(v.data()), v.size() * sizeof(float), what);
  } else {
    for (float& f : v) f = std::bit_cast<float>(get_u32(in, what));
  }
}

constexpr std::uint64_t kMaxTensorElements = 1ull << 30;

}  // namespace

const ModelFile::Tensor* ModelFile::find(const std::string& name) const {
  for (const Tensor& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

const ModelFile::Tensor& ModelFile::require(const std::string& name) const {
  const Tensor* t = find(name);
  if (t == nullptr) throw ValidationError("model is missing tensor '" + name + "'");
  return *t;
}

// ---- validation -------------------------------------------------------------

void validate(const FeatureTrack& track) {
  if (track.video_id.empty()) throw ValidationError("feature track: empty video_id");
  if (track.dim <= 0) throw ValidationError("feature track: dim must be positive");
  if (!(track.fps > 0) || !std::isfinite(track.fps))
    throw ValidationError("feature track: fps must be positive");
  if (!(track.duration_s > 0) || !std::isfinite(track.duration_s))
    throw ValidationError("feature track: duration_s must be positive");
  if (track.times.size() != track.frames.size())
    throw ValidationError("feature track: times/frames size mismatch");
  double prev = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < track.times.size(); ++i) {
    const double t = track.times[i];
    if (!std::isfinite(t) || t < 0.0 || t > track.duration_s)
      throw ValidationError("feature track: timestamp " + std::to_string(t) +
                            " outside [0, duration_s] at frame " + std::to_string(i));
    if (!(t > prev))
      throw ValidationError("feature track: timestamps not strictly increasing at frame " +
                            std::to_string(i));
    prev = t;
    if (track.frames[i].size() != track.dim)
      throw ValidationError("feature track: frame " + std::to_string(i) + " has " +
                            std::to_string(track.frames[i].size()) + " values, expected dim=" +
                            std::to_string(track.dim));
    require_finite_vector(track.frames[i], "feature track frame " + std::to_string(i));
  }
}

void validate(const DescriptionVector& desc) {
  if (desc.desc_id.empty()) throw ValidationError("description: empty desc_id");
  if (desc.video_id.empty()) throw ValidationError("description: empty video_id");
  if (!std::isfinite(desc.start_s) || !std::isfinite(desc.end_s) || !(desc.start_s < desc.end_s))
    throw ValidationError("description '" + desc.desc_id + "': malformed span (start >= end)");
  if (desc.y.size() == 0) throw ValidationError("description '" + desc.desc_id + "': empty y");
  require_finite_vector(desc.y, "description '" + desc.desc_id + "' vector");
}

void validate(const ReferenceSummarySet& refs) {
  if (refs.video_id.empty()) throw ValidationError("references: empty video_id");
  if (!(refs.fps > 0) || !std::isfinite(refs.fps))
    throw ValidationError("references: fps must be positive");
  if (!(refs.duration_s > 0) || !std::isfinite(refs.duration_s))
    throw ValidationError("references: duration_s must be positive");
  if (refs.references.empty()) throw ValidationError("references: at least one reference required");
  for (const auto& r : refs.references) {
    for (const Interval& iv : r.intervals) {
      if (!std::isfinite(iv.start_s) || !std::isfinite(iv.end_s) || !(iv.start_s < iv.end_s) ||
          iv.start_s < 0.0 || iv.end_s > refs.duration_s)
        throw ValidationError("references: annotator '" + r.annotator_id +
                              "' has an interval outside [0, duration_s] or with start >= end");
    }
  }
}

void validate(const ModelFile& model) {
  if (model.version != kModelVersion)
    throw ValidationError("model: unsupported version " + std::to_string(model.version));
  for (const ModelFile::Tensor& t : model.tensors) {
    if (t.name.empty()) throw ValidationError("model: tensor with empty name");
    if (t.dims.empty()) throw ValidationError("model tensor '" + t.name + "': empty shape");
    std::uint64_t n = 1;
    for (std::uint64_t d : t.dims) {
      if (d == 0 || d > kMaxTensorElements)
        throw ValidationError("model tensor '" + t.name + "': bad dimension");
      n *= d;
      if (n > kMaxTensorElements)
        throw ValidationError("model tensor '" + t.name + "': too many elements");
    }
    if (t.data.size() != n)
      throw ValidationError("model tensor '" + t.name + "': data size " +
                            std::to_string(t.data.size()) + " does not match shape product " +
                            std::to_string(n));
    for (float f : t.data)
      if (!std::isfinite(f))
        throw ValidationError("model tensor '" + t.name + "': non-finite value");
  }
}

// ---- feature tracks ---------------------------------------------------------

FeatureTrack read_feature_track(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::string line;
  std::size_t lineno = 0;

  if (!std::getline(in, line))
    throw ValidationError(path.string() + ": empty file, expected a header line");
  ++lineno;
  const json h = parse_line(line, path, lineno);

  FeatureTrack track;
  track.video_id = string_field(h, "video_id", path, lineno);
  const double dim = finite_field(h, "dim", path, lineno);
  if (dim < 1 || dim != std::floor(dim))
    throw ValidationError(loc(path, lineno) + ": malformed header: dim must be a positive integer");
  track.dim = static_cast<int>(dim);
  track.fps = finite_field(h, "fps", path, lineno);
  track.duration_s = finite_field(h, "duration_s", path, lineno);
  if (!(track.fps > 0))
    throw ValidationError(loc(path, lineno) + ": malformed header: fps must be positive");
  if (!(track.duration_s > 0))
    throw ValidationError(loc(path, lineno) + ": malformed header: duration_s must be positive");

  double prev = -std::numeric_limits<double>::infinity();
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json r = parse_line(line, path, lineno);
    const double t = finite_field(r, "t", path, lineno);
    if (t < 0.0 || t > track.duration_s)
      throw ValidationError(loc(path, lineno) + ": timestamp outside [0, duration_s]");
    if (!(t > prev))
      throw ValidationError(loc(path, lineno) + ": timestamps must be strictly increasing");
    prev = t;
    Eigen::VectorXd v = vector_field(r, "v", path, lineno);
    if (v.size() != track.dim)
      throw ValidationError(loc(path, lineno) + ": expected dim=" + std::to_string(track.dim) +
                            " values, got " + std::to_string(v.size()));
    track.times.push_back(t);
    track.frames.push_back(std::move(v));
  }
  return track;
}

void write_feature_track(const std::filesystem::path& path, const FeatureTrack& track) {
  validate(track);
  std::ofstream out = open_output(path);
  ordered_json h;
  h["video_id"] = track.video_id;
  h["dim"] = track.dim;
  h["fps"] = track.fps;
  h["duration_s"] = track.duration_s;
  out << h.dump() << "\n";
  for (std::size_t i = 0; i < track.frames.size(); ++i) {
    ordered_json r;
    r["t"] = track.times[i];
    r["v"] = vector_to_json(track.frames[i]);
    out << r.dump() << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

// ---- descriptions -----------------------------------------------------------

std::vector<DescriptionVector> read_descriptions(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::vector<DescriptionVector> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json r = parse_line(line, path, lineno);
    DescriptionVector d;
    d.desc_id = string_field(r, "desc_id", path, lineno);
    d.video_id = string_field(r, "video_id", path, lineno);
    d.start_s = finite_field(r, "start_s", path, lineno);
    d.end_s = finite_field(r, "end_s", path, lineno);
    if (!(d.start_s < d.end_s))
      throw ValidationError(loc(path, lineno) + ": malformed span (start_s >= end_s)");
    d.y = vector_field(r, "y", path, lineno);
    if (d.y.size() == 0) throw ValidationError(loc(path, lineno) + ": empty vector 'y'");
    if (auto it = r.find("text"); it != r.end() && it->is_string())
      d.text = it->get<std::string>();
    out.push_back(std::move(d));
  }
  return out;
}

void write_descriptions(const std::filesystem::path& path,
                        const std::vector<DescriptionVector>& descs) {
  for (const DescriptionVector& d : descs) validate(d);
  std::ofstream out = open_output(path);
  for (const DescriptionVector& d : descs) {
    ordered_json r;
    r["desc_id"] = d.desc_id;
    r["video_id"] = d.video_id;
    r["start_s"] = d.start_s;
    r["end_s"] = d.end_s;
    r["y"] = vector_to_json(d.y);
    if (!d.text.empty()) r["text"] = d.text;
    out << r.dump() << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

// ---- reference summaries ----------------------------------------------------

ReferenceSummarySet read_references(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  std::string line;
  std::size_t lineno = 0;

  if (!std::getline(in, line))
    throw ValidationError(path.string() + ": empty file, expected a header line");
  ++lineno;
  const json h = parse_line(line, path, lineno);

  ReferenceSummarySet refs;
  refs.video_id = string_field(h, "video_id", path, lineno);
  refs.fps = finite_field(h, "fps", path, lineno);
  refs.duration_s = finite_field(h, "duration_s", path, lineno);
  if (!(refs.fps > 0))
    throw ValidationError(loc(path, lineno) + ": malformed header: fps must be positive");
  if (!(refs.duration_s > 0))
    throw ValidationError(loc(path, lineno) + ": malformed header: duration_s must be positive");

  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const json r = parse_line(line, path, lineno);
    ReferenceSummarySet::Reference ref;
    ref.annotator_id = string_field(r, "annotator_id", path, lineno);
    const json& arr = field(r, "intervals", path, lineno);
    if (!arr.is_array())
      throw ValidationError(loc(path, lineno) + ": field 'intervals' must be an array");
    for (const json& e : arr) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number())
        throw ValidationError(loc(path, lineno) + ": each interval must be a [start, end] pair");
      double s = e[0].get<double>();
      double t = e[1].get<double>();
      if (!std::isfinite(s) || !std::isfinite(t))
        throw ValidationError(loc(path, lineno) + ": non-finite interval bound");
      if (!(s < t))
        throw ValidationError(loc(path, lineno) + ": malformed interval [" + std::to_string(s) +
                              ", " + std::to_string(t) + "] (start >= end)");
      // clip to the video; intervals entirely outside are dropped
      s = std::max(0.0, s);
      t = std::min(refs.duration_s, t);
      if (s < t) ref.intervals.push_back({s, t});
    }
    refs.references.push_back(std::move(ref));
  }
  if (refs.references.empty())
    throw ValidationError(path.string() + ": at least one reference required");
  return refs;
}

void write_references(const std::filesystem::path& path, const ReferenceSummarySet& refs) {
  validate(refs);
  std::ofstream out = open_output(path);
  ordered_json h;
  h["video_id"] = refs.video_id;
  h["fps"] = refs.fps;
  h["duration_s"] = refs.duration_s;
  out << h.dump() << "\n";
  for (const auto& r : refs.references) {
    ordered_json rec;
    rec["annotator_id"] = r.annotator_id;
    json ivs = json::array();
    for (const Interval& iv : r.intervals) ivs.push_back({iv.start_s, iv.end_s});
    rec["intervals"] = ivs;
    out << rec.dump() << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

// ---- binary models ----------------------------------------------------------

void write_model(const std::filesystem::path& path, const ModelFile& model) {
  validate(model);
  std::ofstream out = open_output(path, /*binary=*/true);
  out.write(kModelMagic.data(), kModelMagic.size());
  put_u32(out, model.version);
  const std::string meta = model.metadata.is_null() ? "{}" : model.metadata.dump();
  put_u64(out, meta.size());
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  put_u32(out, static_cast<std::uint32_t>(model.tensors.size()));
  for (const ModelFile::Tensor& t : model.tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (std::uint64_t d : t.dims) put_u64(out, d);
    put_f32_block(out, t.data);
  }
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

ModelFile read_model(const std::filesystem::path& path) {
  std::ifstream in = open_input(path, /*binary=*/true);

  std::array<char, 4> magic;
  read_exact(in, magic.data(), magic.size(), "magic");
  if (magic != kModelMagic)
    throw ValidationError(path.string() + ": bad magic, not a model file");

  ModelFile model;
  model.version = get_u32(in, "version");
  if (model.version != kModelVersion)
    throw ValidationError(path.string() + ": unsupported model version " +
                          std::to_string(model.version));

  const std::uint64_t meta_len = get_u64(in, "metadata length");
  if (meta_len > (1ull << 30))
    throw ValidationError(path.string() + ": implausible metadata length");
  std::string meta(meta_len, '\0');
  read_exact(in, meta.data(), meta_len, "metadata");
  try {
    model.metadata = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": malformed model metadata: " + e.what());
  }

  const std::uint32_t count = get_u32(in, "tensor count");
  if (count > 4096) throw ValidationError(path.string() + ": implausible tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    ModelFile::Tensor t;
    const std::uint32_t name_len = get_u32(in, "tensor name length");
    if (name_len == 0 || name_len > 4096)
      throw ValidationError(path.string() + ": implausible tensor name length");
    t.name.resize(name_len);
    read_exact(in, t.name.data(), name_len, "tensor name");
    const std::uint32_t rank = get_u32(in, "rank of '" + t.name + "'");
    if (rank == 0 || rank > 8)
      throw ValidationError(path.string() + ": tensor '" + t.name + "' has implausible rank");
    std::uint64_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      const std::uint64_t d = get_u64(in, "dims of '" + t.name + "'");
      if (d == 0 || d > kMaxTensorElements || (n *= d) > kMaxTensorElements)
        throw ValidationError(path.string() + ": tensor '" + t.name + "' has implausible shape");
      t.dims.push_back(d);
    }
    t.data.resize(n);
    get_f32_block(in, t.data, "tensor payload for '" + t.name + "'");
    for (float f : t.data)
      if (!std::isfinite(f))
        throw ValidationError(path.string() + ": tensor '" + t.name + "' has a non-finite value");
    model.tensors.push_back(std::move(t));
  }
  // the container is self-delimiting; trailing bytes mean corruption
  char extra;
  if (in.read(&extra, 1), in.gcount() != 0)
    throw ValidationError(path.string() + ": trailing bytes after last tensor");
  return model;
}

}  // namespace dsf
