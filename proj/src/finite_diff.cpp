#include "tckae/finite_diff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tckae {

std::vector<Matrix> finite_diff_gradient(const LossFn& loss, std::vector<Matrix> params,
                                         double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_gradient: step must be positive");
  std::vector<Matrix> grads;
  grads.reserve(params.size());
  for (auto& p : params) grads.emplace_back(p.rows(), p.cols());

  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k].data();
    auto g = grads[k].data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = loss(params);
      values[i] = saved - h;
      const double down = loss(params);
      values[i] = saved;
      g[i] = (up - down) / (2.0 * h);
    }
  }
  return grads;
}

double max_relative_error(const std::vector<Matrix>& a, const std::vector<Matrix>& b,
                          double floor) {
  if (a.size() != b.size()) throw DimensionError("max_relative_error: gradient set sizes differ");
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!same_shape(a[k], b[k])) {
      throw DimensionError("max_relative_error: " + a[k].shape() + " vs " + b[k].shape());
    }
    auto ad = a[k].data();
    auto bd = b[k].data();
    for (std::size_t i = 0; i < ad.size(); ++i) {
      const double denom = std::max({std::abs(ad[i]), std::abs(bd[i]), floor});
      worst = std::max(worst, std::abs(ad[i] - bd[i]) / denom);
    }
  }
  return worst;
}

}  // namespace tckae
