// SPDX-License-Identifier: Apache-2.0
#include "glyco/postprocess.hpp"

#include "glyco/error.hpp"

namespace glyco::postprocess {

namespace {

bool starts_segment(const metrics::PredictionTrace& trace, std::size_t i) {
  return i == 0 || trace[i].segment_id != trace[i - 1].segment_id;
}

}  // namespace

metrics::PredictionTrace moving_average(const metrics::PredictionTrace& trace, int window) {
  if (window < 1) throw ContractError("moving average window must be >= 1");
  metrics::PredictionTrace out = trace;
  std::size_t seg_begin = 0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (starts_segment(trace, i)) seg_begin = i;
    std::size_t first = i + 1 >= seg_begin + static_cast<std::size_t>(window)
                            ? i + 1 - static_cast<std::size_t>(window)
                            : seg_begin;
    double acc = 0;
    for (std::size_t k = first; k <= i; ++k) acc += trace[k].y_pred;
    out[i].y_pred = acc / static_cast<double>(i - first + 1);
  }
  return out;
}

metrics::PredictionTrace exponential_smoothing(const metrics::PredictionTrace& trace, double alpha) {
  if (!(alpha > 0 && alpha <= 1)) throw ContractError("exponential smoothing needs alpha in (0, 1]");
  metrics::PredictionTrace out = trace;
  for (std::size_t i = 0; i < trace.size(); ++i)
    if (!starts_segment(trace, i))
      out[i].y_pred = alpha * trace[i].y_pred + (1 - alpha) * out[i - 1].y_pred;
  return out;
}

metrics::PredictionTrace smooth(const metrics::PredictionTrace& trace, const SmoothingConfig& config) {
  switch (config.mode) {
    case SmoothingMode::moving_average: return moving_average(trace, config.window);
    case SmoothingMode::exponential: return exponential_smoothing(trace, config.alpha);
  }
  return trace;
}

}  // namespace glyco::postprocess
