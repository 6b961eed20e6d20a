// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "crossyield/common.hpp"

namespace crossyield {

/// Root-mean-squared error of predictions against observations.
/// Throws InputError when the vectors are empty or differ in length.
double rmse(const Vec& predictions, const Vec& observations);

/// Pearson correlation coefficient as a percentage in [-100, 100].
/// Returns 0 when either vector has zero variance, so a constant
/// predictor scores 0 rather than NaN.
double pearson_pct(const Vec& predictions, const Vec& observations);

}  // namespace crossyield
