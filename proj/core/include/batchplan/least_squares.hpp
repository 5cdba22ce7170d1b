#pragma once

#include <optional>
#include <span>
#include <vector>

namespace batchplan {

// Column-major design matrix: one vector per regressor, all of equal length.
using Design = std::vector<std::vector<double>>;

/// Ordinary least squares through the normal equations. Columns are scaled to
/// unit norm before forming the Gram matrix; returns nullopt when the design
/// is rank deficient.
std::optional<std::vector<double>> solve_least_squares(const Design& columns,
                                                       std::span<const double> y);

/// Least squares where coefficients flagged in `non_negative` are clamped:
/// any that come out negative are pinned to zero (most negative first) and the
/// remaining terms are refit.
std::optional<std::vector<double>> clamped_least_squares(const Design& columns,
                                                         std::span<const double> y,
                                                         const std::vector<bool>& non_negative);

}  // namespace batchplan
