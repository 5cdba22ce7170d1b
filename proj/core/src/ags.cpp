#include "batchplan/ags.hpp"

#include <algorithm>
#include <cmath>

#include "batchplan/error.hpp"

namespace batchplan {

namespace {

StepRecord begin_record(const MicroModel& model) {
  StepRecord r;
  r.f = model.loss();
  r.grad_sq_norm = squared_norm(model.full_gradient());
  return r;
}

void apply(MicroModel& model, std::span<const double> update, double eta) {
  auto w = model.params();
  for (std::size_t i = 0; i < w.size(); ++i) w[i] -= eta * update[i];
}

}  // namespace

void TrainerConfig::validate() const {
  if (b_small < 1 || b_large < 1 || b_small > b_large) {
    throw Error(ErrorKind::InvalidInput, "require 1 <= b_small <= b_large");
  }
  if (!(eta > 0.0) || !(delta >= 0.0) || !(epsilon > 0.0) || scale_update_period < 1 ||
      !(noise_sigma >= 0.0)) {
    throw Error(ErrorKind::InvalidInput, "invalid trainer configuration");
  }
  if (static_scale && !(*static_scale > 0.0)) {
    throw Error(ErrorKind::InvalidInput, "static scale must be positive");
  }
}

double TrainerConfig::s_max() const {
  return std::sqrt(static_cast<double>(b_large) / static_cast<double>(b_small));
}

double relative_sq_norm_change(double prev_sq_norm, double sq_norm) {
  return std::abs((sq_norm - prev_sq_norm) / prev_sq_norm);
}

SensitivityTracker::SensitivityTracker(double delta) : delta_(delta) {}

double SensitivityTracker::observe(std::span<const double> grad) {
  long double sq = 0.0L;
  for (const double g : grad) sq += static_cast<long double>(g) * g;
  if (!prev_sq_norm_) {
    last_delta_ = kSensitive;
  } else if (*prev_sq_norm_ == 0.0L) {
    last_delta_ = sq == 0.0L ? 0.0 : kSensitive;
  } else {
    last_delta_ = static_cast<double>(std::fabs((sq - *prev_sq_norm_) / *prev_sq_norm_));
  }
  prev_sq_norm_ = sq;
  return last_delta_;
}

std::optional<double> SensitivityTracker::prev_sq_norm() const {
  if (!prev_sq_norm_) return std::nullopt;
  return static_cast<double>(*prev_sq_norm_);
}

GradScaleMap GradScaleMap::ones(std::size_t n, double s_max, double epsilon) {
  return {std::vector<double>(n, 1.0), s_max, epsilon};
}

double GradScaleMap::min() const {
  return scales.empty() ? 1.0 : *std::min_element(scales.begin(), scales.end());
}

double GradScaleMap::max() const {
  return scales.empty() ? 1.0 : *std::max_element(scales.begin(), scales.end());
}

std::vector<double> gradient_scales(std::span<const double> g_small, std::span<const double> g_large,
                                    double s_max, double epsilon) {
  if (g_small.size() != g_large.size()) {
    throw Error(ErrorKind::InvalidInput, "gradient sizes differ");
  }
  std::vector<double> s(g_small.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    // epsilon is added to the signed large-batch gradient.
    const double ratio = std::abs(g_small[i] / (g_large[i] + epsilon));
    s[i] = std::max(std::min(ratio, s_max), epsilon);
  }
  return s;
}

GradScaleMap update_grad_scale(const MicroModel& model, const TrainerConfig& config, Rng& rng) {
  const auto g_small = stochastic_gradient(model, config.b_small, config.noise_sigma, rng);
  const auto g_large = stochastic_gradient(model, config.b_large, config.noise_sigma, rng);
  const double s_max = config.s_max();
  return {gradient_scales(g_small, g_large, s_max, config.epsilon), s_max, config.epsilon};
}

AgsState::AgsState(const MicroModel& model, const TrainerConfig& config)
    : tracker(config.delta), scale_map(GradScaleMap::ones(model.size(), config.s_max(), config.epsilon)) {}

StepRecord vanilla_step(MicroModel& model, const TrainerConfig& config, SensitivityTracker& tracker,
                        Rng& rng, double eta) {
  StepRecord r = begin_record(model);
  auto g = stochastic_gradient(model, config.b_large, config.noise_sigma, rng);
  r.delta = tracker.observe(g);
  apply(model, g, eta);
  r.large_grad = std::move(g);
  return r;
}

StepRecord static_scale_step(MicroModel& model, const TrainerConfig& config,
                             SensitivityTracker& tracker, Rng& rng) {
  if (!config.static_scale) throw Error(ErrorKind::InvalidInput, "static_scale not set");
  StepRecord r = begin_record(model);
  auto g = stochastic_gradient(model, config.b_large, config.noise_sigma, rng);
  r.delta = tracker.observe(g);
  if (tracker.is_sensitive(r.delta)) {
    apply(model, g, config.eta);
  } else {
    const double s = *config.static_scale;
    std::vector<double> scaled(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) scaled[i] = s * g[i];
    apply(model, scaled, config.eta);
    r.scaled = true;
    r.scale_min = r.scale_max = s;
  }
  r.large_grad = std::move(g);
  return r;
}

StepRecord ags_step(MicroModel& model, const TrainerConfig& config, AgsState& state, Rng& rng,
                    Rng& profile_rng) {
  StepRecord r = begin_record(model);
  r.step = state.steps_taken;
  auto g = stochastic_gradient(model, config.b_large, config.noise_sigma, rng);
  r.delta = state.tracker.observe(g);
  if (state.tracker.is_sensitive(r.delta)) {
    apply(model, g, config.eta);
  } else {
    const auto& s = state.scale_map.scales;
    std::vector<double> scaled(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) scaled[i] = s[i] * g[i];
    apply(model, scaled, config.eta);
    r.scaled = true;
    r.scale_min = state.scale_map.min();
    r.scale_max = state.scale_map.max();
  }
  r.large_grad = std::move(g);

  ++state.steps_taken;
  if (!state.frozen && state.steps_taken % config.scale_update_period == 0) {
    state.scale_map = update_grad_scale(model, config, profile_rng);
  }
  return r;
}

StepRecord lrs_baseline_step(MicroModel& model, const TrainerConfig& config,
                             SensitivityTracker& tracker, int base_batch, double eta_base, Rng& rng) {
  if (base_batch < 1) throw Error(ErrorKind::InvalidInput, "base_batch must be positive");
  const double eta = eta_base * (static_cast<double>(config.b_large) / base_batch);
  return vanilla_step(model, config, tracker, rng, eta);
}

TrajectoryReport run_training(MicroModel model, const TrainerConfig& config, std::int64_t steps,
                              std::uint64_t seed, const RunOptions& options) {
  config.validate();
  if (steps < 1) throw Error(ErrorKind::InvalidInput, "steps must be positive");
  if (options.mode == TrainMode::Static && !config.static_scale) {
    throw Error(ErrorKind::InvalidInput, "static mode needs a scale");
  }

  Rng rng(seed);
  std::seed_seq profile_seed{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                             0x5ca1eu};
  Rng profile_rng(profile_seed);

  AgsState state(model, config);
  if (options.frozen_scales) {
    if (options.frozen_scales->scales.size() != model.size()) {
      throw Error(ErrorKind::InvalidInput, "frozen scale map has the wrong size");
    }
    state.scale_map = *options.frozen_scales;
    state.frozen = true;
  }
  SensitivityTracker& tracker = state.tracker;

  TrajectoryReport report;
  const double f0 = model.loss();
  const double limit = options.divergence_factor * std::max(f0, std::numeric_limits<double>::min());
  std::int64_t scaled = 0;

  for (std::int64_t i = 0; i < steps; ++i) {
    StepRecord r;
    switch (options.mode) {
      case TrainMode::Vanilla: r = vanilla_step(model, config, tracker, rng, config.eta); break;
      case TrainMode::Static: r = static_scale_step(model, config, tracker, rng); break;
      case TrainMode::Ags: r = ags_step(model, config, state, rng, profile_rng); break;
      case TrainMode::Lrs:
        r = lrs_baseline_step(model, config, tracker, options.lrs_base_batch, config.eta, rng);
        break;
    }
    r.step = i;
    if (!options.log_gradients) r.large_grad.clear();
    scaled += r.scaled ? 1 : 0;
    report.rows.push_back(std::move(r));

    const double f = model.loss();
    if (!std::isfinite(f) || f > limit) {
      report.summary.diverged = true;
      break;
    }
  }

  report.summary.final_f = model.loss();
  report.summary.steps_completed = static_cast<std::int64_t>(report.rows.size());
  report.summary.scaled_fraction =
      static_cast<double>(scaled) / static_cast<double>(report.summary.steps_completed);
  return report;
}

}  // namespace batchplan
