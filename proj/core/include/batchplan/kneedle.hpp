#pragma once

#include <cstddef>
#include <span>

namespace batchplan {

struct KneeResult {
  std::size_t index = 0;
  // No difference-curve maximum cleared its threshold; `index` is the point
  // farthest from the endpoint chord instead.
  bool weak = false;
};

/// Kneedle knee detection for a decreasing convex curve (e.g. training time
/// against batch size). Needs at least three points with strictly increasing
/// xs. Ties resolve toward the smaller x.
KneeResult kneedle(std::span<const double> xs, std::span<const double> ys,
                   double sensitivity = 1.0);

}  // namespace batchplan
