#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedrisk/dataset.hpp"
#include "fedrisk/error.hpp"
#include "fedrisk/matrix.hpp"
#include "fedrisk/random.hpp"

namespace fedrisk {

enum class ModelFamily { lr, mlp };

inline std::string_view family_name(ModelFamily f) { return f == ModelFamily::lr ? "lr" : "mlp"; }

inline ModelFamily parse_family(std::string_view s) {
  if (s == "lr") return ModelFamily::lr;
  if (s == "mlp") return ModelFamily::mlp;
  throw ConfigError("unknown model family '" + std::string(s) + "' (expected lr or mlp)");
}

inline constexpr std::size_t kHidden1 = 32;
inline constexpr std::size_t kHidden2 = 16;

inline std::size_t param_count(ModelFamily f, std::size_t d) {
  if (f == ModelFamily::lr) return d + 1;
  return kHidden1 * d + kHidden1 + kHidden2 * kHidden1 + kHidden2 + kHidden2 + 1;
}

inline std::string layout_tag(ModelFamily f, std::size_t d) {
  return std::string(family_name(f)) + "/v1/d=" + std::to_string(d);
}

// Flat parameters exchanged between server and institutions.
//   lr:  w[0..d), b
//   mlp: W1 (32 x d, row-major), b1, W2 (16 x 32), b2, W3 (1 x 16), b3
struct ParamVector {
  std::vector<double> values;
  std::string layout_tag;

  std::size_t size() const noexcept { return values.size(); }
  bool operator==(const ParamVector&) const = default;
};

// ---------------------------------------------------------------------------
// Scalar pieces

/// Logistic function, evaluated without overflow for large |z|.
inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline constexpr double kProbEpsilon = 1e-12;

inline double clamp_probability(double p) {
  return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
}

/// Binary cross-entropy with the prediction clamped to [1e-12, 1 - 1e-12].
inline double bce_loss(int y, double y_hat) {
  const double p = clamp_probability(y_hat);
  return -(y * std::log(p) + (1 - y) * std::log(1.0 - p));
}

inline double relu(double z) { return z > 0.0 ? z : 0.0; }

// Derivative at exactly 0 is taken as 0.
inline double relu_derivative(double z) { return z > 0.0 ? 1.0 : 0.0; }

// ---------------------------------------------------------------------------
// Logistic regression

struct LinearModel {
  std::vector<double> w;
  double b = 0.0;

  bool operator==(const LinearModel&) const = default;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double lr_forward(const LinearModel& m, std::span<const double> x) {
  if (x.size() != m.w.size()) {
    throw DataError("lr_forward: input has " + std::to_string(x.size()) + " features, model has " +
                    std::to_string(m.w.size()));
  }
  return sigmoid(dot(m.w, x) + m.b);
}

struct LinearGradient {
  std::vector<double> w;
  double b = 0.0;
};

/// Mean BCE gradient over `rows` plus l2_lambda * w. Rows are accumulated in
/// the order given.
inline LinearGradient lr_gradient(const LinearModel& m, const Matrix& X, std::span<const int> y,
                                  std::span<const std::size_t> rows, double l2_lambda,
                                  double* mean_loss = nullptr) {
  if (rows.empty()) throw DataError("lr_gradient: empty batch");
  LinearGradient g{std::vector<double>(m.w.size(), 0.0), 0.0};
  double loss = 0.0;
  for (auto r : rows) {
    const auto x = X.row(r);
    const double p = lr_forward(m, x);
    const double err = p - y[r];
    for (std::size_t j = 0; j < x.size(); ++j) g.w[j] += err * x[j];
    g.b += err;
    if (mean_loss) loss += bce_loss(y[r], p);
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (std::size_t j = 0; j < g.w.size(); ++j) g.w[j] = g.w[j] * inv + l2_lambda * m.w[j];
  g.b *= inv;
  if (mean_loss) *mean_loss = loss * inv + 0.5 * l2_lambda * dot(m.w, m.w);
  return g;
}

inline LinearGradient lr_gradient(const LinearModel& m, const Matrix& X, std::span<const int> y,
                                  double l2_lambda) {
  std::vector<std::size_t> rows(X.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return lr_gradient(m, X, y, rows, l2_lambda);
}

// ---------------------------------------------------------------------------
// Two-hidden-layer perceptron: d -> 32 (ReLU) -> 16 (ReLU) -> 1 (sigmoid)

struct MlpModel {
  std::size_t d = 0;
  std::vector<double> W1, b1, W2, b2, W3;
  double b3 = 0.0;

  static MlpModel zeros(std::size_t d) {
    return {d,
            std::vector<double>(kHidden1 * d, 0.0),
            std::vector<double>(kHidden1, 0.0),
            std::vector<double>(kHidden2 * kHidden1, 0.0),
            std::vector<double>(kHidden2, 0.0),
            std::vector<double>(kHidden2, 0.0),
            0.0};
  }

  bool operator==(const MlpModel&) const = default;
};

struct MlpCache {
  std::vector<double> z1, a1, z2, a2;
  double z3 = 0.0;
  double y_hat = 0.5;
};

inline MlpCache mlp_forward(const MlpModel& m, std::span<const double> x) {
  if (x.size() != m.d) {
    throw DataError("mlp_forward: input has " + std::to_string(x.size()) + " features, model has " +
                    std::to_string(m.d));
  }
  MlpCache c;
  c.z1.resize(kHidden1);
  c.a1.resize(kHidden1);
  for (std::size_t i = 0; i < kHidden1; ++i) {
    c.z1[i] = dot({m.W1.data() + i * m.d, m.d}, x) + m.b1[i];
    c.a1[i] = relu(c.z1[i]);
  }
  c.z2.resize(kHidden2);
  c.a2.resize(kHidden2);
  for (std::size_t j = 0; j < kHidden2; ++j) {
    c.z2[j] = dot({m.W2.data() + j * kHidden1, kHidden1}, c.a1) + m.b2[j];
    c.a2[j] = relu(c.z2[j]);
  }
  c.z3 = dot(m.W3, c.a2) + m.b3;
  c.y_hat = sigmoid(c.z3);
  return c;
}

/// Mean BCE gradients over `rows`, shaped like the model. The output delta
/// is y_hat - y (sigmoid and cross-entropy cancel).
inline MlpModel mlp_backprop(const MlpModel& m, const Matrix& X, std::span<const int> y,
                             std::span<const std::size_t> rows, double* mean_loss = nullptr) {
  if (rows.empty()) throw DataError("mlp_backprop: empty batch");
  MlpModel g = MlpModel::zeros(m.d);
  std::vector<double> delta1(kHidden1), delta2(kHidden2);
  double loss = 0.0;
  for (auto r : rows) {
    const auto x = X.row(r);
    const auto c = mlp_forward(m, x);
    const double delta3 = c.y_hat - y[r];
    if (mean_loss) loss += bce_loss(y[r], c.y_hat);

    for (std::size_t j = 0; j < kHidden2; ++j) {
      g.W3[j] += delta3 * c.a2[j];
      delta2[j] = delta3 * m.W3[j] * relu_derivative(c.z2[j]);
    }
    g.b3 += delta3;

    std::fill(delta1.begin(), delta1.end(), 0.0);
    for (std::size_t j = 0; j < kHidden2; ++j) {
      const double* w2 = m.W2.data() + j * kHidden1;
      double* gw2 = g.W2.data() + j * kHidden1;
      for (std::size_t i = 0; i < kHidden1; ++i) {
        gw2[i] += delta2[j] * c.a1[i];
        delta1[i] += w2[i] * delta2[j];
      }
      g.b2[j] += delta2[j];
    }
    for (std::size_t i = 0; i < kHidden1; ++i) {
      delta1[i] *= relu_derivative(c.z1[i]);
      double* gw1 = g.W1.data() + i * m.d;
      for (std::size_t k = 0; k < m.d; ++k) gw1[k] += delta1[i] * x[k];
      g.b1[i] += delta1[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (auto* v : {&g.W1, &g.b1, &g.W2, &g.b2, &g.W3}) {
    for (auto& e : *v) e *= inv;
  }
  g.b3 *= inv;
  if (mean_loss) *mean_loss = loss * inv;
  return g;
}

// ---------------------------------------------------------------------------
// Flat layout

inline ParamVector flatten(const LinearModel& m) {
  ParamVector p{m.w, layout_tag(ModelFamily::lr, m.w.size())};
  p.values.push_back(m.b);
  return p;
}

inline ParamVector flatten(const MlpModel& m) {
  ParamVector p;
  p.layout_tag = layout_tag(ModelFamily::mlp, m.d);
  p.values.reserve(param_count(ModelFamily::mlp, m.d));
  for (const auto* v : {&m.W1, &m.b1, &m.W2, &m.b2, &m.W3}) {
    p.values.insert(p.values.end(), v->begin(), v->end());
  }
  p.values.push_back(m.b3);
  return p;
}

namespace detail {

inline void check_layout(const ParamVector& p, ModelFamily f, std::size_t d) {
  const auto tag = layout_tag(f, d);
  if (p.layout_tag != tag) {
    throw DataError("parameter layout mismatch: got '" + p.layout_tag + "', expected '" + tag + "'");
  }
  if (p.values.size() != param_count(f, d)) {
    throw DataError("parameter length mismatch for " + tag + ": got " +
                    std::to_string(p.values.size()) + ", expected " +
                    std::to_string(param_count(f, d)));
  }
}

}  // namespace detail

/// Feature count encoded in a layout tag.
inline std::pair<ModelFamily, std::size_t> parse_layout_tag(std::string_view tag) {
  const auto slash = tag.find('/');
  const auto eq = tag.rfind("d=");
  if (slash == std::string_view::npos || eq == std::string_view::npos) {
    throw DataError("malformed layout tag '" + std::string(tag) + "'");
  }
  const auto family = parse_family(tag.substr(0, slash));
  const auto d = csv::parse_number<std::size_t>(tag.substr(eq + 2));
  if (!d) throw DataError("malformed layout tag '" + std::string(tag) + "'");
  return {family, *d};
}

inline LinearModel unflatten_linear(const ParamVector& p) {
  const auto [family, d] = parse_layout_tag(p.layout_tag);
  detail::check_layout(p, ModelFamily::lr, d);
  return {std::vector<double>(p.values.begin(), p.values.end() - 1), p.values.back()};
}

inline MlpModel unflatten_mlp(const ParamVector& p) {
  const auto [family, d] = parse_layout_tag(p.layout_tag);
  detail::check_layout(p, ModelFamily::mlp, d);
  MlpModel m = MlpModel::zeros(d);
  auto it = p.values.begin();
  for (auto* v : {&m.W1, &m.b1, &m.W2, &m.b2, &m.W3}) {
    std::copy(it, it + static_cast<std::ptrdiff_t>(v->size()), v->begin());
    it += static_cast<std::ptrdiff_t>(v->size());
  }
  m.b3 = *it;
  return m;
}

inline double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

/// LR starts at zero. MLP weights are uniform in +-sqrt(6 / (fan_in +
/// fan_out)) per layer with zero biases.
inline ParamVector init_params(ModelFamily family, std::size_t d, std::uint64_t seed) {
  if (d < 1) throw ConfigError("init_params: need at least one feature");
  if (family == ModelFamily::lr) {
    return {std::vector<double>(d + 1, 0.0), layout_tag(family, d)};
  }
  Rng rng(seed);
  MlpModel m = MlpModel::zeros(d);
  auto fill = [&](std::vector<double>& w, std::size_t fan_in, std::size_t fan_out) {
    const double limit = glorot_limit(fan_in, fan_out);
    for (auto& e : w) e = rng.uniform(-limit, limit);
  };
  fill(m.W1, d, kHidden1);
  fill(m.W2, kHidden1, kHidden2);
  fill(m.W3, kHidden2, 1);
  return flatten(m);
}

// ---------------------------------------------------------------------------
// Optimizers and training

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t t = 0;

  static AdamState zeros(std::size_t n) {
    return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0};
  }
  bool operator==(const AdamState&) const = default;
};

struct AdamHyper {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

inline void adam_update(std::span<double> params, std::span<const double> grad, AdamState& s,
                        const AdamHyper& h) {
  ++s.t;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(s.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m[i] = h.beta1 * s.m[i] + (1.0 - h.beta1) * grad[i];
    s.v[i] = h.beta2 * s.v[i] + (1.0 - h.beta2) * grad[i] * grad[i];
    const double m_hat = s.m[i] / c1;
    const double v_hat = s.v[i] / c2;
    params[i] -= h.learning_rate * m_hat / (std::sqrt(v_hat) + h.epsilon);
  }
}

inline std::pair<ParamVector, AdamState> adam_step(const ParamVector& p, const ParamVector& g,
                                                   const AdamState& s, const AdamHyper& h) {
  if (g.size() != p.size() || s.m.size() != p.size() || s.v.size() != p.size()) {
    throw DataError("adam_step: shape mismatch");
  }
  std::pair<ParamVector, AdamState> out{p, s};
  adam_update(out.first.values, g.values, out.second, h);
  return out;
}

enum class Optimizer { sgd, adam };

inline std::string_view optimizer_name(Optimizer o) { return o == Optimizer::sgd ? "sgd" : "adam"; }

inline Optimizer parse_optimizer(std::string_view s) {
  if (s == "sgd") return Optimizer::sgd;
  if (s == "adam") return Optimizer::adam;
  throw ConfigError("unknown optimizer '" + std::string(s) + "' (expected sgd or adam)");
}

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 100;
  std::size_t batch_size = 64;
  double l2_lambda = 1e-4;  // logistic regression only
  Optimizer optimizer = Optimizer::sgd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t shuffle_seed = 0;

  static TrainConfig lr_defaults() { return {}; }

  static TrainConfig mlp_defaults() {
    TrainConfig c;
    c.learning_rate = 0.001;
    c.epochs = 20;
    c.l2_lambda = 0.0;
    c.optimizer = Optimizer::adam;
    return c;
  }

  static TrainConfig defaults(ModelFamily f) {
    return f == ModelFamily::lr ? lr_defaults() : mlp_defaults();
  }

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
    if (epochs < 0) throw ConfigError("train: epochs must be non-negative");
    if (batch_size < 1) throw ConfigError("train: batch_size must be positive");
    if (!(l2_lambda >= 0.0)) throw ConfigError("train: l2_lambda must be non-negative");
    if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0 && adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
      throw ConfigError("train: adam betas must be in (0, 1)");
    }
    if (!(adam_epsilon > 0.0)) throw ConfigError("train: adam_epsilon must be positive");
  }

  bool operator==(const TrainConfig&) const = default;
};

struct TrainResult {
  ParamVector params;
  std::vector<double> epoch_loss;  // mean objective over the epoch's batches
};

namespace detail {

// Mean loss and flat gradient of one batch at `params`.
inline double batch_gradient(ModelFamily family, const ParamVector& params, const LabeledDataset& ds,
                             std::span<const std::size_t> rows, double l2_lambda,
                             std::vector<double>& grad) {
  double loss = 0.0;
  if (family == ModelFamily::lr) {
    const auto m = unflatten_linear(params);
    const auto g = lr_gradient(m, ds.X, ds.y, rows, l2_lambda, &loss);
    grad = g.w;
    grad.push_back(g.b);
  } else {
    const auto m = unflatten_mlp(params);
    grad = flatten(mlp_backprop(m, ds.X, ds.y, rows, &loss)).values;
  }
  return loss;
}

}  // namespace detail

/// Mini-batch training from `init`. Each epoch draws a fresh permutation
/// from one Rng seeded with shuffle_seed; the last short batch is kept.
/// Throws TrainingError when the loss or parameters stop being finite.
inline TrainResult train(ModelFamily family, const LabeledDataset& ds, const TrainConfig& cfg,
                         const ParamVector& init) {
  cfg.validate();
  detail::check_layout(init, family, ds.feature_count());
  TrainResult out{init, {}};
  if (cfg.epochs == 0) return out;
  if (ds.empty()) throw DataError("train: empty dataset");

  Rng rng(cfg.shuffle_seed);
  std::vector<std::size_t> order(ds.size());
  std::vector<double> grad;
  AdamState adam = AdamState::zeros(init.size());
  const AdamHyper hyper{cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon};
  const double l2 = family == ModelFamily::lr ? cfg.l2_lambda : 0.0;
  auto& p = out.params.values;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, order.size() - start);
      const std::span<const std::size_t> rows(order.data() + start, len);
      loss_sum += detail::batch_gradient(family, out.params, ds, rows, l2, grad);
      ++batches;
      if (cfg.optimizer == Optimizer::adam) {
        adam_update(p, grad, adam, hyper);
      } else {
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= cfg.learning_rate * grad[i];
      }
    }
    const double loss = loss_sum / static_cast<double>(batches);
    const bool finite = std::isfinite(loss) &&
                        std::all_of(p.begin(), p.end(), [](double v) { return std::isfinite(v); });
    if (!finite) {
      throw TrainingError("training diverged at epoch " + std::to_string(epoch + 1) +
                          " (learning_rate " + csv::format_double(cfg.learning_rate) + ")");
    }
    out.epoch_loss.push_back(loss);
  }
  return out;
}

/// Predicted probabilities for every row of X.
inline std::vector<double> predict_proba(ModelFamily family, const ParamVector& params,
                                         const Matrix& X) {
  std::vector<double> out;
  out.reserve(X.rows());
  if (family == ModelFamily::lr) {
    const auto m = unflatten_linear(params);
    for (std::size_t r = 0; r < X.rows(); ++r) out.push_back(lr_forward(m, X.row(r)));
  } else {
    const auto m = unflatten_mlp(params);
    for (std::size_t r = 0; r < X.rows(); ++r) out.push_back(mlp_forward(m, X.row(r)).y_hat);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints: {"layout_tag": "...", "values": [...]} with round-trip doubles.

inline nlohmann::json to_json(const ParamVector& p) {
  return {{"layout_tag", p.layout_tag}, {"values", p.values}};
}

inline ParamVector params_from_json(const nlohmann::json& j) {
  try {
    ParamVector p{j.at("values").get<std::vector<double>>(), j.at("layout_tag").get<std::string>()};
    const auto [family, d] = parse_layout_tag(p.layout_tag);
    detail::check_layout(p, family, d);
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed parameter checkpoint: ") + e.what());
  }
}

inline void save_params(const ParamVector& p, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << to_json(p).dump() << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

inline ParamVector load_params(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("cannot parse " + path.string() + ": " + e.what());
  }
  return params_from_json(j);
}

}  // namespace fedrisk
