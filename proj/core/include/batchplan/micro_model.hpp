#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <variant>
#include <vector>

namespace batchplan {

using Rng = std::mt19937_64;

/// f(w) = 1/2 * sum_i h_i (w_i - w*_i)^2; L-smooth with L = max_i h_i.
struct QuadraticObjective {
  std::vector<double> curvature;
  std::vector<double> optimum;
};

/// Binary logistic loss of a tanh MLP over a fixed synthetic dataset.
struct MlpObjective {
  std::vector<int> layers;       // input, hidden..., 1
  std::vector<double> features;  // row-major, samples x layers.front()
  std::vector<double> labels;    // +1 / -1
};

class MicroModel {
 public:
  static MicroModel quadratic(std::vector<double> curvature, std::vector<double> optimum,
                              std::vector<double> start);
  /// Isotropic quadratic with curvature L in `dim` coordinates, optimum at 0,
  /// starting from all-ones.
  static MicroModel quadratic(double smoothness, std::size_t dim);
  static MicroModel logistic_mlp(std::vector<int> layers, int samples, std::uint64_t seed);

  std::span<double> params() { return weights_; }
  std::span<const double> params() const { return weights_; }
  std::size_t size() const { return weights_.size(); }

  double loss() const { return loss_at(weights_); }
  double loss_at(std::span<const double> w) const;
  std::vector<double> full_gradient() const { return gradient_at(weights_); }
  std::vector<double> gradient_at(std::span<const double> w) const;

  /// Known smoothness constant (quadratic only).
  std::optional<double> smoothness() const;
  /// inf f; exact for the quadratic, 0 as a lower bound for the logistic loss.
  double min_value() const { return 0.0; }

  bool is_quadratic() const { return std::holds_alternative<QuadraticObjective>(objective_); }

 private:
  MicroModel(std::variant<QuadraticObjective, MlpObjective> objective, std::vector<double> weights)
      : objective_(std::move(objective)), weights_(std::move(weights)) {}

  std::variant<QuadraticObjective, MlpObjective> objective_;
  std::vector<double> weights_;
};

/// Mini-batch gradient estimate: the exact gradient plus zero-mean Gaussian
/// noise of per-coordinate variance sigma^2 / batch_size.
std::vector<double> stochastic_gradient(const MicroModel& model, int batch_size, double sigma,
                                        Rng& rng);

double squared_norm(std::span<const double> v);

}  // namespace batchplan
