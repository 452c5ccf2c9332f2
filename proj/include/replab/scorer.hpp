#pragma once

// Grasp-quality features and the lightweight learned scorers (logistic heads)
// used by the cropped-image and full-image planners.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "replab/calibration.hpp"
#include "replab/camera.hpp"
#include "replab/geometry.hpp"
#include "replab/grasp.hpp"

namespace replab {

enum class ScorerKind : std::uint8_t { cropped = 0, full = 1 };

inline std::string_view to_string(ScorerKind k) { return k == ScorerKind::cropped ? "cropped" : "full"; }
inline ScorerKind scorer_kind_from_string(std::string_view s) {
  if (s == "cropped") return ScorerKind::cropped;
  if (s == "full") return ScorerKind::full;
  throw InvalidArgument("planners", "unknown scorer kind '" + std::string(s) + "'");
}

struct FeatureSpec {
  int crop = 24;          // samples per side of the cropped patch
  int crop_stride = 2;    // pixels between samples
  int bins = 18;          // theta bins (cropped heads)
  int thumb_width = 32;
  int thumb_height = 24;
  double height_floor = 0.5;  // heights below this are treated as floor [cm]

  std::size_t crop_size() const { return static_cast<std::size_t>(crop) * static_cast<std::size_t>(crop); }
  std::size_t thumb_size() const {
    return static_cast<std::size_t>(thumb_width) * static_cast<std::size_t>(thumb_height);
  }
  std::size_t dimension(ScorerKind k) const { return k == ScorerKind::cropped ? crop_size() : thumb_size() + 5; }
  int heads(ScorerKind k) const { return k == ScorerKind::cropped ? bins : 1; }
  int bin_of(double theta) const {
    const int b = static_cast<int>(std::floor(wrap_half_turn(theta) / kPi * bins));
    return std::clamp(b, 0, bins - 1);
  }
  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

/// What feature extraction needs to know about the cell: the calibration
/// (for projecting grasps into the image) and the floor depth it implies.
struct FeatureContext {
  CalibrationModel calib;
  CameraIntrinsics k;
  DepthImage floor;
  FeatureSpec spec;

  FeatureContext() = default;
  FeatureContext(const CalibrationModel& c, const CameraIntrinsics& intr, double floor_z, FeatureSpec s = {})
      : calib(c), k(intr), floor(floor_depth(c.linear(), c.offset(), floor_z, intr)), spec(s) {}

  /// Height of the visible surface above the floor at a pixel, 0 on floor,
  /// missing returns and outside the image.
  float height(int u, int v, const DepthImage& depth) const {
    if (u < 0 || v < 0 || u >= k.width || v >= k.height) return 0.0f;
    const float d = depth.at(u, v), f = floor.at(u, v);
    if (!(d > 0.0f) || !(f > 0.0f)) return 0.0f;
    const float h = f - d;
    return h > spec.height_floor ? h : 0.0f;
  }

  PixelCoord pixel_of(Vec3 robot_point) const {
    const auto px = project(calib.unapply(robot_point), k);
    if (!px || !k.in_bounds(px->u, px->v)) throw OutOfViewError("planners", "grasp point projects outside the image");
    return *px;
  }
};

/// Patch of surface heights around the grasp point's pixel, row-major.
inline std::vector<float> crop_features(const DepthImage& depth, const FeatureContext& ctx, Vec3 grasp_point) {
  const PixelCoord c = ctx.pixel_of(grasp_point);
  const int uc = static_cast<int>(std::lround(c.u)), vc = static_cast<int>(std::lround(c.v));
  const int n = ctx.spec.crop, s = ctx.spec.crop_stride;
  std::vector<float> out;
  out.reserve(ctx.spec.crop_size());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      // Sample offsets are symmetric about the center pixel.
      const int dv = s * (2 * i - n + 1) / 2, du = s * (2 * j - n + 1) / 2;
      out.push_back(ctx.height(uc + du, vc + dv, depth));
    }
  return out;
}

/// Whole-image height thumbnail by block means.
inline std::vector<float> thumbnail_features(const DepthImage& depth, const FeatureContext& ctx) {
  const int tw = ctx.spec.thumb_width, th = ctx.spec.thumb_height;
  const int bw = ctx.k.width / tw, bh = ctx.k.height / th;
  if (bw < 1 || bh < 1) throw ConfigError("planners", "thumbnail larger than the image");
  std::vector<float> out(ctx.spec.thumb_size(), 0.0f);
  for (int ty = 0; ty < th; ++ty)
    for (int tx = 0; tx < tw; ++tx) {
      double sum = 0.0;
      for (int v = ty * bh; v < (ty + 1) * bh; ++v)
        for (int u = tx * bw; u < (tx + 1) * bw; ++u) sum += ctx.height(u, v, depth);
      out[static_cast<std::size_t>(ty * tw + tx)] = static_cast<float>(sum / (bw * bh));
    }
  return out;
}

/// Full-image features: thumbnail followed by (x, y, z, sin 2theta, cos 2theta).
inline std::vector<float> full_features(std::span<const float> thumbnail, const GraspPose& g) {
  std::vector<float> out(thumbnail.begin(), thumbnail.end());
  out.push_back(static_cast<float>(g.x));
  out.push_back(static_cast<float>(g.y));
  out.push_back(static_cast<float>(g.z));
  out.push_back(static_cast<float>(std::sin(2.0 * g.theta)));
  out.push_back(static_cast<float>(std::cos(2.0 * g.theta)));
  return out;
}

inline std::vector<float> extract_features(const DepthImage& depth, const FeatureContext& ctx, const GraspPose& g,
                                           ScorerKind kind) {
  if (kind == ScorerKind::cropped) return crop_features(depth, ctx, g.position());
  (void)ctx.pixel_of(g.position());
  return full_features(thumbnail_features(depth, ctx), g);
}

// ---------------------------------------------------------------------------
// Model

struct ScorerModel {
  ScorerKind kind = ScorerKind::cropped;
  FeatureSpec spec{};
  std::vector<double> mean;     // feature standardization
  std::vector<double> scale;
  std::vector<double> weights;  // heads x (dimension + 1), bias last
  double heldout_balanced_accuracy = 0.0;

  std::size_t dimension() const { return spec.dimension(kind); }
  int heads() const { return spec.heads(kind); }

  void validate() const {
    const std::size_t d = dimension();
    if (mean.size() != d || scale.size() != d || weights.size() != static_cast<std::size_t>(heads()) * (d + 1))
      throw ConfigError("planners", "scorer model parameter sizes do not match its feature spec");
    if (kind == ScorerKind::cropped && spec.bins != 18)
      throw ConfigError("planners", "cropped scorer needs 18 theta-bin heads");
    for (double w : weights)
      if (!std::isfinite(w)) throw ConfigError("planners", "scorer model has non-finite parameters");
  }

  /// Logit of head `head` on raw (unstandardized) features.
  double logit(std::span<const float> f, int head) const {
    const std::size_t d = dimension();
    if (f.size() != d) throw InvalidArgument("planners", "feature length does not match the scorer model");
    const double* w = weights.data() + static_cast<std::size_t>(head) * (d + 1);
    double z = w[d];
    for (std::size_t i = 0; i < d; ++i) z += w[i] * ((f[i] - mean[i]) / scale[i]);
    return z;
  }
  double score(std::span<const float> f, double theta) const {
    const int head = kind == ScorerKind::cropped ? spec.bin_of(theta) : 0;
    return 1.0 / (1.0 + std::exp(-logit(f, head)));
  }
  friend bool operator==(const ScorerModel&, const ScorerModel&) = default;
};

struct LabeledExample {
  std::vector<float> features;
  int theta_bin = 0;
  int label = 0;
};

struct TrainConfig {
  int epochs = 40;
  int batch_size = 64;
  double learning_rate = 0.05;
  double l2 = 1e-3;
  double holdout_fraction = 0.2;
  bool full_batch = false;
};

struct TrainResult {
  ScorerModel model;
  std::vector<double> loss_history;  // weighted training loss after each epoch
  std::size_t train_size = 0;
  std::size_t holdout_size = 0;
};

namespace detail {

/// Splits indices into a class-balanced held-out set and the rest.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> balanced_split(
    std::span<const LabeledExample> data, double fraction, Rng& rng) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < data.size(); ++i) (data[i].label ? pos : neg).push_back(i);
  std::shuffle(pos.begin(), pos.end(), rng.engine());
  std::shuffle(neg.begin(), neg.end(), rng.engine());
  const std::size_t per_class = std::min(
      {pos.size() / 2, neg.size() / 2, static_cast<std::size_t>(fraction * static_cast<double>(data.size()) / 2.0)});
  std::vector<std::size_t> held, train;
  held.insert(held.end(), pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(per_class));
  held.insert(held.end(), neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(per_class));
  train.insert(train.end(), pos.begin() + static_cast<std::ptrdiff_t>(per_class), pos.end());
  train.insert(train.end(), neg.begin() + static_cast<std::ptrdiff_t>(per_class), neg.end());
  std::sort(held.begin(), held.end());
  std::sort(train.begin(), train.end());
  return {held, train};
}

}  // namespace detail

inline double balanced_accuracy(const ScorerModel& m, std::span<const LabeledExample> data,
                                std::span<const std::size_t> idx) {
  std::size_t tp = 0, pos = 0, tn = 0, neg = 0;
  for (std::size_t i : idx) {
    const auto& e = data[i];
    const int head = m.kind == ScorerKind::cropped ? e.theta_bin : 0;
    const bool predicted = m.logit(e.features, head) > 0.0;
    if (e.label) {
      ++pos;
      tp += predicted;
    } else {
      ++neg;
      tn += !predicted;
    }
  }
  if (pos == 0 || neg == 0) return 0.5;
  return 0.5 * (static_cast<double>(tp) / static_cast<double>(pos) + static_cast<double>(tn) / static_cast<double>(neg));
}

namespace detail {

inline void check_examples(std::span<const LabeledExample> data, ScorerKind kind, const FeatureSpec& spec) {
  if (data.size() < 100) throw DegenerateInput("planners", "train_scorer needs at least 100 examples");
  const std::size_t d = spec.dimension(kind);
  std::size_t n_pos = 0;
  for (const auto& e : data) {
    if (e.features.size() != d) throw InvalidArgument("planners", "example feature length does not match the kind");
    if (e.theta_bin < 0 || e.theta_bin >= spec.bins) throw InvalidArgument("planners", "theta bin out of range");
    n_pos += e.label != 0;
  }
  if (n_pos == 0 || n_pos == data.size()) throw DegenerateInput("planners", "training data has a single class");
}

}  // namespace detail

/// Fits logistic heads on `data[train]` by mini-batch gradient descent with
/// class rebalancing and L2. Standardization statistics come from the
/// training rows only.
inline TrainResult fit_scorer(std::span<const LabeledExample> data, std::span<const std::size_t> train,
                              ScorerKind kind, const TrainConfig& hyper, Rng& rng, const FeatureSpec& spec = {}) {
  if (train.empty()) throw DegenerateInput("planners", "empty training set");
  const std::size_t d = spec.dimension(kind);
  TrainResult out;
  ScorerModel& m = out.model;
  m.kind = kind;
  m.spec = spec;
  m.mean.assign(d, 0.0);
  m.scale.assign(d, 0.0);
  for (std::size_t i : train)
    for (std::size_t j = 0; j < d; ++j) m.mean[j] += data[i].features[j];
  for (double& v : m.mean) v /= static_cast<double>(train.size());
  for (std::size_t i : train)
    for (std::size_t j = 0; j < d; ++j) {
      const double c = data[i].features[j] - m.mean[j];
      m.scale[j] += c * c;
    }
  for (double& v : m.scale) {
    v = std::sqrt(v / static_cast<double>(train.size()));
    if (!(v > 1e-6)) v = 1.0;
  }
  const int heads = spec.heads(kind);
  m.weights.assign(static_cast<std::size_t>(heads) * (d + 1), 0.0);

  std::size_t train_pos = 0;
  for (std::size_t i : train) train_pos += data[i].label != 0;
  const double w_pos = static_cast<double>(train.size()) / (2.0 * static_cast<double>(std::max<std::size_t>(train_pos, 1)));
  const double w_neg =
      static_cast<double>(train.size()) / (2.0 * static_cast<double>(std::max<std::size_t>(train.size() - train_pos, 1)));

  std::vector<double> x(d);
  auto head_of = [&](const LabeledExample& e) { return kind == ScorerKind::cropped ? e.theta_bin : 0; };
  auto standardize = [&](const LabeledExample& e) {
    for (std::size_t j = 0; j < d; ++j) x[j] = (e.features[j] - m.mean[j]) / m.scale[j];
  };
  auto weighted_loss = [&]() {
    double loss = 0.0;
    for (std::size_t i : train) {
      const auto& e = data[i];
      const double z = m.logit(e.features, head_of(e));
      // log(1 + exp(-y z)) computed stably.
      const double yz = e.label ? z : -z;
      loss += (e.label ? w_pos : w_neg) * (yz > 0 ? std::log1p(std::exp(-yz)) : -yz + std::log1p(std::exp(yz)));
    }
    double reg = 0.0;
    for (int h = 0; h < heads; ++h)
      for (std::size_t j = 0; j < d; ++j) {
        const double w = m.weights[static_cast<std::size_t>(h) * (d + 1) + j];
        reg += w * w;
      }
    return loss / static_cast<double>(train.size()) + 0.5 * hyper.l2 * reg;
  };

  const std::size_t batch = hyper.full_batch ? train.size() : static_cast<std::size_t>(std::max(1, hyper.batch_size));
  std::vector<double> grad(m.weights.size());
  std::vector<std::size_t> order(train.begin(), train.end());
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    if (!hyper.full_batch) std::shuffle(order.begin(), order.end(), rng.engine());
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t b = start; b < stop; ++b) {
        const auto& e = data[order[b]];
        const int h = head_of(e);
        standardize(e);
        double* w = m.weights.data() + static_cast<std::size_t>(h) * (d + 1);
        double z = w[d];
        for (std::size_t j = 0; j < d; ++j) z += w[j] * x[j];
        const double p = 1.0 / (1.0 + std::exp(-z));
        const double r = (e.label ? w_pos : w_neg) * (p - (e.label ? 1.0 : 0.0));
        double* g = grad.data() + static_cast<std::size_t>(h) * (d + 1);
        for (std::size_t j = 0; j < d; ++j) g[j] += r * x[j];
        g[d] += r;
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (int h = 0; h < heads; ++h) {
        double* w = m.weights.data() + static_cast<std::size_t>(h) * (d + 1);
        const double* g = grad.data() + static_cast<std::size_t>(h) * (d + 1);
        for (std::size_t j = 0; j < d; ++j) w[j] -= hyper.learning_rate * (g[j] * inv + hyper.l2 * w[j]);
        w[d] -= hyper.learning_rate * g[d] * inv;
      }
    }
    out.loss_history.push_back(weighted_loss());
  }
  out.train_size = train.size();
  return out;
}

/// Trains on a class-balanced split and reports held-out balanced accuracy.
inline TrainResult train_scorer(std::span<const LabeledExample> data, ScorerKind kind, const TrainConfig& hyper,
                                Seed seed, const FeatureSpec& spec = {}) {
  detail::check_examples(data, kind, spec);
  Rng rng(seed.stream("planners/train"));
  const auto [held, train] = detail::balanced_split(data, hyper.holdout_fraction, rng);
  TrainResult out = fit_scorer(data, train, kind, hyper, rng, spec);
  out.model.heldout_balanced_accuracy = balanced_accuracy(out.model, data, held);
  out.holdout_size = held.size();
  return out;
}

// ---------------------------------------------------------------------------
// Binary model files

namespace detail {
inline constexpr char kScorerMagic[8] = {'R', 'P', 'L', 'B', 'S', 'C', 'O', 'R'};
inline constexpr std::uint32_t kScorerVersion = 1;
static_assert(std::endian::native == std::endian::little, "model files are little-endian");

template <class T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("planners", "truncated scorer model file");
  return v;
}
}  // namespace detail

inline void save_scorer(const ScorerModel& m, const std::string& path) {
  m.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("planners", "cannot open '" + path + "' for writing");
  os.write(detail::kScorerMagic, sizeof(detail::kScorerMagic));
  detail::put(os, detail::kScorerVersion);
  detail::put(os, static_cast<std::uint8_t>(m.kind));
  for (int v : {m.spec.crop, m.spec.crop_stride, m.spec.bins, m.spec.thumb_width, m.spec.thumb_height})
    detail::put(os, static_cast<std::int32_t>(v));
  detail::put(os, m.spec.height_floor);
  detail::put(os, static_cast<std::uint32_t>(m.heads()));
  detail::put(os, static_cast<std::uint64_t>(m.dimension()));
  detail::put(os, static_cast<std::uint64_t>(m.weights.size()));
  for (const auto* v : {&m.mean, &m.scale, &m.weights})
    os.write(reinterpret_cast<const char*>(v->data()), static_cast<std::streamsize>(v->size() * sizeof(double)));
  detail::put(os, m.heldout_balanced_accuracy);
  if (!os) throw IoError("planners", "failed writing '" + path + "'");
}

inline ScorerModel load_scorer(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("planners", "cannot open scorer model '" + path + "'");
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, detail::kScorerMagic, sizeof(magic)) != 0)
    throw IoError("planners", "'" + path + "' is not a scorer model file");
  if (detail::get<std::uint32_t>(is) != detail::kScorerVersion) throw IoError("planners", "unsupported model version");
  ScorerModel m;
  const auto kind = detail::get<std::uint8_t>(is);
  if (kind > 1) throw IoError("planners", "unknown scorer kind in model file");
  m.kind = static_cast<ScorerKind>(kind);
  m.spec.crop = detail::get<std::int32_t>(is);
  m.spec.crop_stride = detail::get<std::int32_t>(is);
  m.spec.bins = detail::get<std::int32_t>(is);
  m.spec.thumb_width = detail::get<std::int32_t>(is);
  m.spec.thumb_height = detail::get<std::int32_t>(is);
  m.spec.height_floor = detail::get<double>(is);
  const auto heads = detail::get<std::uint32_t>(is);
  const auto dim = detail::get<std::uint64_t>(is);
  const auto nw = detail::get<std::uint64_t>(is);
  if (heads != static_cast<std::uint32_t>(m.heads()) || dim != m.dimension() || nw != heads * (dim + 1))
    throw IoError("planners", "scorer model header is inconsistent");
  m.mean.resize(dim);
  m.scale.resize(dim);
  m.weights.resize(nw);
  for (auto* v : {&m.mean, &m.scale, &m.weights}) {
    is.read(reinterpret_cast<char*>(v->data()), static_cast<std::streamsize>(v->size() * sizeof(double)));
    if (!is) throw IoError("planners", "truncated scorer model file");
  }
  m.heldout_balanced_accuracy = detail::get<double>(is);
  m.validate();
  return m;
}

}  // namespace replab
