#pragma once

#include <functional>
#include <vector>

#include "tckae/matrix.hpp"

namespace tckae {

using LossFn = std::function<double(const std::vector<Matrix>&)>;

/// Central differences (f(p + h) - f(p - h)) / 2h, one coordinate at a time.
/// Test oracle for the tape; cost is 2 * (total parameter count) loss evaluations.
std::vector<Matrix> finite_diff_gradient(const LossFn& loss, std::vector<Matrix> params,
                                         double h = 1e-6);

/// max over entries of |a - b| / max(|a|, |b|, floor)
double max_relative_error(const std::vector<Matrix>& a, const std::vector<Matrix>& b,
                          double floor = 1e-8);

}  // namespace tckae
