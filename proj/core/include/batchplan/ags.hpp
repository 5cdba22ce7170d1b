#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "batchplan/micro_model.hpp"

namespace batchplan {

struct TrainerConfig {
  int b_small = 32;
  int b_large = 1024;
  double eta = 0.1;
  double delta = 0.5;     // sensitivity threshold on the gradient-variability metric
  double epsilon = 1e-8;  // stabilizer in the per-parameter ratio
  int scale_update_period = 50;  // steps per simulated epoch
  double noise_sigma = 1.0;
  std::optional<double> static_scale;

  void validate() const;
  /// sqrt(b_large / b_small)
  double s_max() const;
};

/// |(|G_i|^2 - |G_{i-1}|^2) / |G_{i-1}|^2|
double relative_sq_norm_change(double prev_sq_norm, double sq_norm);

/// Tracks the gradient-variability metric across steps. The first observation
/// (and any change away from a zero-norm gradient) reports kSensitive, which is
/// at least any finite threshold.
class SensitivityTracker {
 public:
  static constexpr double kSensitive = std::numeric_limits<double>::max();

  explicit SensitivityTracker(double delta);

  double observe(std::span<const double> grad);
  bool is_sensitive(double variability) const { return variability >= delta_; }

  double threshold() const { return delta_; }
  double last_delta() const { return last_delta_; }
  std::optional<double> prev_sq_norm() const;

 private:
  double delta_;
  // Extended precision: consecutive norms are often close, and their
  // difference would otherwise lose most of its significant digits.
  std::optional<long double> prev_sq_norm_;
  double last_delta_ = kSensitive;
};

struct GradScaleMap {
  std::vector<double> scales;
  double s_max = 1.0;
  double epsilon = 1e-8;

  static GradScaleMap ones(std::size_t n, double s_max, double epsilon = 1e-8);
  double min() const;
  double max() const;
};

/// s_i = min(|g_small,i / (g_large,i + eps)|, s_max), floored at eps so every
/// factor stays strictly positive.
std::vector<double> gradient_scales(std::span<const double> g_small, std::span<const double> g_large,
                                    double s_max, double epsilon);

/// Draws a small- and a large-batch gradient at the current weights and
/// returns a fresh per-parameter map.
GradScaleMap update_grad_scale(const MicroModel& model, const TrainerConfig& config, Rng& rng);

struct StepRecord {
  std::int64_t step = 0;
  double f = 0.0;             // loss before the update
  double grad_sq_norm = 0.0;  // |grad f(w)|^2 before the update
  double delta = 0.0;
  bool scaled = false;
  double scale_min = 1.0;
  double scale_max = 1.0;
  std::vector<double> large_grad;  // filled only when logging gradients
};

struct AgsState {
  SensitivityTracker tracker;
  GradScaleMap scale_map;
  std::int64_t steps_taken = 0;
  bool frozen = false;  // keep scale_map fixed (no periodic refresh)

  AgsState(const MicroModel& model, const TrainerConfig& config);
};

/// w <- w - eta * G_large; the tracker still observes the gradient.
StepRecord vanilla_step(MicroModel& model, const TrainerConfig& config, SensitivityTracker& tracker,
                        Rng& rng, double eta);

/// Uniform factor `config.static_scale` on insensitive steps, 1 otherwise.
StepRecord static_scale_step(MicroModel& model, const TrainerConfig& config,
                             SensitivityTracker& tracker, Rng& rng);

/// One adaptive-gradient-scaling iteration. The map is refreshed after every
/// `scale_update_period` steps unless the state is frozen.
StepRecord ags_step(MicroModel& model, const TrainerConfig& config, AgsState& state, Rng& rng,
                    Rng& profile_rng);

/// Linear learning-rate scaling baseline: eta_base * b_large / base_batch.
StepRecord lrs_baseline_step(MicroModel& model, const TrainerConfig& config,
                             SensitivityTracker& tracker, int base_batch, double eta_base, Rng& rng);

enum class TrainMode { Vanilla, Static, Ags, Lrs };

struct RunOptions {
  TrainMode mode = TrainMode::Ags;
  int lrs_base_batch = 128;
  bool log_gradients = false;
  std::optional<GradScaleMap> frozen_scales{};  // AGS only
  double divergence_factor = 1e6;
};

struct TrajectorySummary {
  double final_f = 0.0;
  double scaled_fraction = 0.0;
  bool diverged = false;
  std::int64_t steps_completed = 0;
};

struct TrajectoryReport {
  std::vector<StepRecord> rows;
  TrajectorySummary summary;
};

/// Deterministic for a given seed. Stops early and flags divergence once the
/// loss exceeds divergence_factor times its initial value.
TrajectoryReport run_training(MicroModel model, const TrainerConfig& config, std::int64_t steps,
                              std::uint64_t seed, const RunOptions& options = {});

}  // namespace batchplan
