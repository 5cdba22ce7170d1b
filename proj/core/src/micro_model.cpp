#include "batchplan/micro_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "batchplan/error.hpp"

namespace batchplan {

namespace {

// Parameter layout per layer: weights (out x in, row-major) then biases (out).
std::size_t mlp_param_count(const std::vector<int>& layers) {
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    n += static_cast<std::size_t>(layers[l + 1]) * (static_cast<std::size_t>(layers[l]) + 1);
  }
  return n;
}

// log(1 + exp(-m)) without overflow.
double softplus_neg(double m) {
  return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

double mlp_loss(const MlpObjective& obj, std::span<const double> w, std::vector<double>* grad) {
  const auto& layers = obj.layers;
  const std::size_t depth = layers.size() - 1;
  const auto in_dim = static_cast<std::size_t>(layers.front());
  const std::size_t samples = obj.labels.size();
  if (grad) grad->assign(w.size(), 0.0);

  std::vector<std::vector<double>> act(depth + 1);
  std::vector<std::size_t> offset(depth);
  for (std::size_t l = 0, o = 0; l < depth; ++l) {
    offset[l] = o;
    o += static_cast<std::size_t>(layers[l + 1]) * (static_cast<std::size_t>(layers[l]) + 1);
  }

  double total = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    act[0].assign(obj.features.begin() + static_cast<std::ptrdiff_t>(s * in_dim),
                  obj.features.begin() + static_cast<std::ptrdiff_t>((s + 1) * in_dim));
    for (std::size_t l = 0; l < depth; ++l) {
      const auto in = static_cast<std::size_t>(layers[l]);
      const auto out = static_cast<std::size_t>(layers[l + 1]);
      const double* W = w.data() + offset[l];
      const double* bias = W + out * in;
      act[l + 1].assign(out, 0.0);
      for (std::size_t j = 0; j < out; ++j) {
        double z = bias[j];
        for (std::size_t i = 0; i < in; ++i) z += W[j * in + i] * act[l][i];
        act[l + 1][j] = (l + 1 == depth) ? z : std::tanh(z);
      }
    }
    const double y = obj.labels[s];
    const double margin = y * act[depth][0];
    total += softplus_neg(margin);
    if (!grad) continue;

    // dloss/dlogit = -y * sigmoid(-margin)
    std::vector<double> delta{-y / (1.0 + std::exp(margin))};
    for (std::size_t l = depth; l-- > 0;) {
      const auto in = static_cast<std::size_t>(layers[l]);
      const auto out = static_cast<std::size_t>(layers[l + 1]);
      const double* W = w.data() + offset[l];
      double* gW = grad->data() + offset[l];
      double* gb = gW + out * in;
      std::vector<double> prev(in, 0.0);
      for (std::size_t j = 0; j < out; ++j) {
        gb[j] += delta[j];
        for (std::size_t i = 0; i < in; ++i) {
          gW[j * in + i] += delta[j] * act[l][i];
          prev[i] += W[j * in + i] * delta[j];
        }
      }
      if (l > 0) {
        for (std::size_t i = 0; i < in; ++i) prev[i] *= 1.0 - act[l][i] * act[l][i];
      }
      delta = std::move(prev);
    }
  }
  const double inv = 1.0 / static_cast<double>(samples);
  if (grad) {
    for (auto& g : *grad) g *= inv;
  }
  return total * inv;
}

}  // namespace

MicroModel MicroModel::quadratic(std::vector<double> curvature, std::vector<double> optimum,
                                 std::vector<double> start) {
  if (curvature.empty() || curvature.size() != optimum.size() || curvature.size() != start.size()) {
    throw Error(ErrorKind::InvalidInput, "quadratic dimensions disagree");
  }
  if (std::any_of(curvature.begin(), curvature.end(), [](double h) { return !(h > 0.0); })) {
    throw Error(ErrorKind::InvalidInput, "curvatures must be positive");
  }
  return MicroModel(QuadraticObjective{std::move(curvature), std::move(optimum)}, std::move(start));
}

MicroModel MicroModel::quadratic(double smoothness, std::size_t dim) {
  return quadratic(std::vector<double>(dim, smoothness), std::vector<double>(dim, 0.0),
                   std::vector<double>(dim, 1.0));
}

MicroModel MicroModel::logistic_mlp(std::vector<int> layers, int samples, std::uint64_t seed) {
  if (layers.size() < 2 || layers.back() != 1 || samples < 1 ||
      std::any_of(layers.begin(), layers.end(), [](int d) { return d < 1; })) {
    throw Error(ErrorKind::InvalidInput, "invalid MLP shape");
  }
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto in_dim = static_cast<std::size_t>(layers.front());

  MlpObjective obj;
  obj.layers = layers;
  std::vector<double> teacher(in_dim);
  for (auto& t : teacher) t = normal(rng);
  for (int s = 0; s < samples; ++s) {
    double dot = 0.0;
    for (std::size_t i = 0; i < in_dim; ++i) {
      const double x = normal(rng);
      obj.features.push_back(x);
      dot += teacher[i] * x;
    }
    obj.labels.push_back(dot >= 0.0 ? 1.0 : -1.0);
  }

  std::vector<double> weights;
  weights.reserve(mlp_param_count(layers));
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(layers[l]));
    const auto n_w = static_cast<std::size_t>(layers[l + 1]) * static_cast<std::size_t>(layers[l]);
    for (std::size_t k = 0; k < n_w; ++k) weights.push_back(scale * normal(rng));
    for (int k = 0; k < layers[l + 1]; ++k) weights.push_back(0.0);
  }
  return MicroModel(std::move(obj), std::move(weights));
}

double MicroModel::loss_at(std::span<const double> w) const {
  if (const auto* q = std::get_if<QuadraticObjective>(&objective_)) {
    double f = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double d = w[i] - q->optimum[i];
      f += 0.5 * q->curvature[i] * d * d;
    }
    return f;
  }
  return mlp_loss(std::get<MlpObjective>(objective_), w, nullptr);
}

std::vector<double> MicroModel::gradient_at(std::span<const double> w) const {
  if (const auto* q = std::get_if<QuadraticObjective>(&objective_)) {
    std::vector<double> g(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) g[i] = q->curvature[i] * (w[i] - q->optimum[i]);
    return g;
  }
  std::vector<double> g;
  mlp_loss(std::get<MlpObjective>(objective_), w, &g);
  return g;
}

std::optional<double> MicroModel::smoothness() const {
  if (const auto* q = std::get_if<QuadraticObjective>(&objective_)) {
    return *std::max_element(q->curvature.begin(), q->curvature.end());
  }
  return std::nullopt;
}

std::vector<double> stochastic_gradient(const MicroModel& model, int batch_size, double sigma,
                                        Rng& rng) {
  if (batch_size < 1) throw Error(ErrorKind::InvalidInput, "batch_size must be positive");
  auto g = model.full_gradient();
  if (sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma / std::sqrt(static_cast<double>(batch_size)));
    for (auto& gi : g) gi += noise(rng);
  }
  return g;
}

double squared_norm(std::span<const double> v) {
  return std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
}

}  // namespace batchplan
