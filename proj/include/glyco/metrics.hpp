// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "glyco/data_model.hpp"

namespace glyco::metrics {

struct TracePoint {
  TimePoint timestamp{};  // time of the predicted value
  double y_true = 0;      // mg/dL
  double y_pred = 0;      // mg/dL
  int segment_id = 0;

  friend bool operator==(const TracePoint&, const TracePoint&) = default;
};

/// Within a segment, timestamps advance by exactly one 5-minute step.
using PredictionTrace = std::vector<TracePoint>;

void write_trace_csv(std::ostream& out, const PredictionTrace& trace);
PredictionTrace read_trace_csv(std::istream& in);

double rmse(const PredictionTrace& trace);

/// RMSE of (dy_true - dy_pred) over consecutive same-segment pairs, in mg/dL
/// per 5-minute step.
double drmse(const PredictionTrace& trace);

/// Same as drmse, expressed per minute.
double drmse_per_minute(const PredictionTrace& trace);

struct RatePoint {
  std::size_t index = 0;  // trace position of the later point
  double true_rate = 0;   // mg/dL/min
  double pred_rate = 0;   // mg/dL/min
};

/// One RatePoint per point that has a same-segment predecessor.
std::vector<RatePoint> rate_of_change(const PredictionTrace& trace);

enum class Zone : unsigned char { A, B, uC, lC, uD, lD, uE, lE };
inline constexpr std::size_t kZoneCount = 8;
std::string_view to_string(Zone zone);

enum class Region : unsigned char { hypo, eu, hyper };
inline constexpr double kHypoThreshold = 70.0;    // y_true <= 70
inline constexpr double kHyperThreshold = 180.0;  // y_true >= 180
Region region_of(double y_true);
std::string_view to_string(Region region);

enum class Label : unsigned char { AP, BE, EP };
std::string_view to_string(Label label);

/// Point-error grid. Zone limits widen by 10 mg/dL when the reference moves
/// 1-2 mg/dL/min and by 20 mg/dL beyond 2 mg/dL/min: upper limits for rising,
/// lower limits for falling glucose.
Zone p_ega(double y_true, double y_pred, double true_rate);

/// Rate-error grid on (reference rate, predicted rate) in mg/dL/min.
Zone r_ega(double true_rate, double pred_rate);
inline Zone r_ega(const RatePoint& r) { return r_ega(r.true_rate, r.pred_rate); }

/// Region-specific combination of the two grids.
Label cg_ega_classify(Zone p, Zone r, Region region);

struct ScoredPoint {
  std::size_t index = 0;
  double y_true = 0, y_pred = 0, true_rate = 0, pred_rate = 0;
  Region region = Region::eu;
  Zone p_zone = Zone::A, r_zone = Zone::A;
  Label label = Label::AP;
};

std::vector<ScoredPoint> cg_ega_points(const PredictionTrace& trace);

struct LabelRates {
  std::size_t count = 0;
  double ap = 0, be = 0, ep = 0;  // percent; NaN when count == 0
};

struct CgEgaReport {
  std::array<LabelRates, 3> regions{};  // indexed by Region
  LabelRates overall;
  double rmse = 0;
  double drmse = 0;
  double drmse_per_minute = 0;
};

CgEgaReport cg_ega_report(const PredictionTrace& trace);

/// `y_true,y_pred,true_rate,pred_rate,p_zone,r_zone,label`
void write_ega_csv(std::ostream& out, std::span<const ScoredPoint> points);

}  // namespace glyco::metrics
