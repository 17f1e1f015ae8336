// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "glyco/data_model.hpp"

namespace glyco::synth {

/// Parameters of the synthetic patient model. Glucose is
///
///   baseline + circadian sinusoid
///     + sum_meals  cho   * cho_gain     * k_meal(t - t_meal)
///     - sum_bolus  units * insulin_gain * k_ins(t - t_bolus)
///     + AR(1) noise
///
/// clipped to [40, 400], where k(tau) = (tau/p)^a exp(a (1 - tau/p)) is a
/// gamma-shaped kernel with unit peak at tau = p and a = (p / width)^2.
struct SynthConfig {
  int days = 14;
  int meals_min = 3;
  int meals_max = 4;
  double cho_min = 20;  // g
  double cho_max = 80;
  double bolus_units_per_10g = 1.0;
  double bolus_error = 0.15;  // relative std of the dose
  double baseline = 130;      // mg/dL
  double circadian_amplitude = 15;
  double circadian_peak_hour = 5;  // dawn phenomenon
  double meal_peak_minutes = 45;
  double meal_width_minutes = 30;
  double insulin_peak_minutes = 75;
  double insulin_width_minutes = 45;
  double cho_gain = 2.0;        // mg/dL per gram at the kernel peak
  double insulin_gain = 13.0;   // mg/dL per unit at the kernel peak
  double noise_std = 4;         // stationary std of the AR(1) noise
  double noise_correlation = 0.7;
  double missing_rate = 0.0;    // probability that a single reading is dropped
  double outage_day_rate = 0.0; // probability that a day loses a 2-hour block
  TimePoint start = std::chrono::sys_days{std::chrono::year{2020} / 1 / 1};
  std::uint64_t seed = 1;
};

inline constexpr double kClipLow = 40;
inline constexpr double kClipHigh = 400;

/// Unit-peak gamma-shaped kernel; zero for tau <= 0.
double response_kernel(double tau_minutes, double peak_minutes, double width_minutes);

/// Throws ConfigError on an invalid configuration.
void check(const SynthConfig& config);

PatientRecord generate_patient(const SynthConfig& config, std::string patient_id = "synth-001");

/// `n` patients with seeded per-patient jitter of baseline, gains, noise and
/// meal pattern; ids `synth-001`, `synth-002`, ...
std::vector<PatientRecord> generate_cohort(int n, const SynthConfig& base, std::uint64_t seed);

}  // namespace glyco::synth
