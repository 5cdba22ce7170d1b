#include "batchplan/kneedle.hpp"

#include <algorithm>
#include <optional>
#include <vector>

#include "batchplan/error.hpp"

namespace batchplan {

KneeResult kneedle(std::span<const double> xs, std::span<const double> ys, double sensitivity) {
  const std::size_t n = xs.size();
  if (n < 3 || ys.size() != n) {
    throw Error(ErrorKind::InvalidInput, "kneedle needs at least three points");
  }
  for (std::size_t i = 1; i < n; ++i) {
    if (!(xs[i] > xs[i - 1])) throw Error(ErrorKind::InvalidInput, "xs must be strictly increasing");
  }

  const auto [ymin_it, ymax_it] = std::minmax_element(ys.begin(), ys.end());
  const double x_span = xs[n - 1] - xs[0];
  const double y_span = *ymax_it - *ymin_it;

  // Difference curve of the flipped (increasing, concave) normalized curve.
  std::vector<double> diff(n, 0.0);
  if (y_span > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      const double xn = (xs[i] - xs[0]) / x_span;
      const double yn = 1.0 - (ys[i] - *ymin_it) / y_span;
      diff[i] = yn - xn;
    }
  }

  std::vector<bool> local_max(n, false);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    local_max[i] = diff[i] > diff[i - 1] && diff[i] >= diff[i + 1];
  }

  // Normalized x spacing averages to 1 / (n - 1).
  const double step = 1.0 / static_cast<double>(n - 1);
  std::optional<std::size_t> best;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!local_max[i]) continue;
    const double threshold = diff[i] - sensitivity * step;
    bool confirmed = false;
    for (std::size_t j = i + 1; j < n; ++j) {
      if (local_max[j]) break;
      if (diff[j] < threshold) {
        confirmed = true;
        break;
      }
    }
    if (confirmed && (!best || diff[i] > diff[*best])) best = i;
  }
  if (best) return {*best, false};

  // Fallback: in normalized space the distance to the chord joining the
  // endpoints is proportional to the difference curve.
  std::size_t arg = 1;
  for (std::size_t i = 2; i + 1 < n; ++i) {
    if (diff[i] > diff[arg]) arg = i;
  }
  return {arg, true};
}

}  // namespace batchplan
