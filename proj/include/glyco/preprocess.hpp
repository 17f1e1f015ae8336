// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "glyco/data_model.hpp"

namespace glyco::preprocess {

/// Monotone piecewise cubic Hermite interpolant (Fritsch-Carlson).
///
/// Node abscissae must be strictly increasing. Between two adjacent nodes the
/// curve stays inside the rectangle the nodes span, so no new local extrema
/// appear.
class Pchip {
 public:
  Pchip(std::vector<double> x, std::vector<double> y);

  double operator()(double xq) const;
  std::span<const double> slopes() const { return slopes_; }

 private:
  std::vector<double> x_, y_, slopes_;
};

inline constexpr double kDefaultSpikeThreshold = 40.0;
inline constexpr int kMaxGapMinutes = 30;

/// Averages glucose, sums cho and insulin per 5-minute slot over
/// [first event, last event].
UniformSeries resample_5min(const PatientRecord& record);

/// Drops days with a glucose gap longer than 30 minutes or without readings
/// in their first or last hour. Throws DataError if nothing survives.
UniformSeries remove_incomplete_days(const UniformSeries& series);

/// Marks isolated excursions (both neighbor differences above `threshold`,
/// opposite signs) as missing.
UniformSeries remove_spikes(const UniformSeries& series,
                            double threshold = kDefaultSpikeThreshold);

/// Fills missing glucose inside each day with a per-day Pchip. Slots before a
/// day's first or after its last reading stay missing.
UniformSeries pchip_interpolate(const UniformSeries& series);

struct SplitSpec {
  double train_fraction = 0.50;
  double valid_fraction = 0.25;
  double test_fraction = 0.25;
  std::uint64_t seed = 0;  // chronological assignment ignores it
};

struct DaySplit {
  std::vector<std::int64_t> train, valid, test;
};

/// Chronological whole-day split: floor(0.5 n) / floor(0.25 n) / remainder.
DaySplit split_days(const UniformSeries& series, const SplitSpec& spec = {});

enum Channel : int { kGlucose = 0, kCho = 1, kInsulin = 2 };
inline constexpr int kChannels = 3;

struct Scaler {
  std::array<double, kChannels> mean{};
  std::array<double, kChannels> std{};  // population

  double scale(int channel, double x) const { return (x - mean[channel]) / std[channel]; }
  double unscale(int channel, double z) const { return z * std[channel] + mean[channel]; }
};

Scaler fit_scaler(const UniformSeries& series, const std::vector<std::int64_t>& train_days);
UniformSeries apply_scaler(const UniformSeries& series, const Scaler& scaler);
/// Maps standardized glucose values back to mg/dL.
std::vector<double> invert_scaler(std::span<const double> values, const Scaler& scaler);

struct WindowConfig {
  int history_steps = 36;  // 3 h
  int horizon_steps = 6;   // 30 min
};

struct SampleWindow {
  Eigen::MatrixXd features;  // history_steps x 3, oldest row first
  double target_final = 0;   // glucose at t + PH
  double target_prev = 0;    // glucose at t + PH - 1
  TimePoint timestamp{};     // time t of the last observed step
  std::int64_t day_index = 0;
  int segment_id = 0;

  TimePoint prediction_time(const WindowConfig& config) const {
    return timestamp + std::chrono::minutes(kStepMinutes * config.horizon_steps);
  }
};

/// One window per t whose history and both targets are present and lie in a
/// single contiguous stretch of one day in `days`.
std::vector<SampleWindow> build_windows(const UniformSeries& series, const WindowConfig& config,
                                        const std::vector<std::int64_t>& days);

/// Resample, clean, despike and interpolate one patient.
UniformSeries clean_series(const PatientRecord& record,
                           double spike_threshold = kDefaultSpikeThreshold);

/// Writes `datetime,glucose,cho,insulin,interpolated,day_index,split`.
void export_preprocessed_csv(std::ostream& out, const UniformSeries& series, const DaySplit& split);

}  // namespace glyco::preprocess
