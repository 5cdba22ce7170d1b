#include "batchplan/least_squares.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace batchplan {

std::optional<std::vector<double>> solve_least_squares(const Design& columns,
                                                       std::span<const double> y) {
  const auto k = static_cast<Eigen::Index>(columns.size());
  const auto n = static_cast<Eigen::Index>(y.size());
  if (k == 0) return std::vector<double>{};
  if (n < k) return std::nullopt;

  Eigen::MatrixXd x(n, k);
  Eigen::VectorXd scale(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const auto& col = columns[static_cast<std::size_t>(j)];
    if (static_cast<Eigen::Index>(col.size()) != n) return std::nullopt;
    for (Eigen::Index i = 0; i < n; ++i) x(i, j) = col[static_cast<std::size_t>(i)];
    scale(j) = x.col(j).norm();
    if (scale(j) == 0.0) return std::nullopt;
    x.col(j) /= scale(j);
  }
  const Eigen::Map<const Eigen::VectorXd> rhs(y.data(), n);

  const Eigen::MatrixXd gram = x.transpose() * x;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(gram);
  lu.setThreshold(1e-12);
  if (lu.rank() < k) return std::nullopt;

  const Eigen::VectorXd z = gram.ldlt().solve(x.transpose() * rhs);
  std::vector<double> coef(static_cast<std::size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j) coef[static_cast<std::size_t>(j)] = z(j) / scale(j);
  return coef;
}

std::optional<std::vector<double>> clamped_least_squares(const Design& columns,
                                                         std::span<const double> y,
                                                         const std::vector<bool>& non_negative) {
  std::vector<bool> pinned(columns.size(), false);
  for (;;) {
    Design active;
    std::vector<std::size_t> index;
    for (std::size_t j = 0; j < columns.size(); ++j) {
      if (!pinned[j]) {
        active.push_back(columns[j]);
        index.push_back(j);
      }
    }
    auto sol = solve_least_squares(active, y);
    if (!sol) return std::nullopt;

    std::vector<double> coef(columns.size(), 0.0);
    std::optional<std::size_t> worst;
    for (std::size_t a = 0; a < index.size(); ++a) {
      const std::size_t j = index[a];
      coef[j] = (*sol)[a];
      if (non_negative[j] && coef[j] < 0.0 && (!worst || coef[j] < coef[*worst])) worst = j;
    }
    if (!worst) return coef;
    pinned[*worst] = true;
  }
}

}  // namespace batchplan
