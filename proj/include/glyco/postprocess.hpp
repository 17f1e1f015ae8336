// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "glyco/metrics.hpp"

namespace glyco::postprocess {

enum class SmoothingMode { moving_average, exponential };

struct SmoothingConfig {
  int window = 3;  // moving average length
  SmoothingMode mode = SmoothingMode::moving_average;
  double alpha = 0.5;  // exponential smoothing weight on the newest prediction
};

/// Causal moving average within each segment; the first window-1 points of a
/// segment average over what is available. y_true is left untouched.
metrics::PredictionTrace moving_average(const metrics::PredictionTrace& trace, int window = 3);

/// s_t = alpha * yhat_t + (1 - alpha) * s_{t-1}, restarted at every segment.
metrics::PredictionTrace exponential_smoothing(const metrics::PredictionTrace& trace,
                                               double alpha = 0.5);

metrics::PredictionTrace smooth(const metrics::PredictionTrace& trace, const SmoothingConfig& config);

}  // namespace glyco::postprocess
