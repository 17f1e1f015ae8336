// SPDX-License-Identifier: Apache-2.0
#include "glyco/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "glyco/error.hpp"
#include "glyco/rng.hpp"

namespace glyco::synth {

namespace {

struct Dose {
  double minute;  // since start
  double amount;
};

// Typical meal windows (start hour, length in hours), in eating order.
constexpr std::pair<double, double> kMealWindows[] = {
    {7.0, 2.0}, {12.0, 1.5}, {19.0, 1.5}, {15.5, 1.0}, {22.0, 0.5}, {10.0, 0.5}};

}  // namespace

double response_kernel(double tau, double peak, double width) {
  if (tau <= 0) return 0.0;
  const double a = (peak / width) * (peak / width);
  const double r = tau / peak;
  return std::exp(a * (std::log(r) + 1.0 - r));
}

void check(const SynthConfig& c) {
  if (c.days < 4) throw ConfigError("synthetic patient needs at least 4 days");
  if (c.meals_min < 0 || c.meals_max < c.meals_min || c.meals_max > 6)
    throw ConfigError("meals per day must satisfy 0 <= min <= max <= 6");
  if (c.cho_min < 0 || c.cho_max < c.cho_min) throw ConfigError("invalid CHO range");
  if (c.noise_std < 0 || c.bolus_error < 0 || c.bolus_units_per_10g < 0)
    throw ConfigError("noise, bolus error and bolus policy must be >= 0");
  if (!(c.meal_peak_minutes > 0 && c.meal_width_minutes > 0 && c.insulin_peak_minutes > 0 &&
        c.insulin_width_minutes > 0))
    throw ConfigError("kernel parameters must be > 0");
  if (!(c.noise_correlation >= 0 && c.noise_correlation < 1))
    throw ConfigError("noise correlation must be in [0, 1)");
  if (c.missing_rate < 0 || c.missing_rate >= 1 || c.outage_day_rate < 0 || c.outage_day_rate > 1)
    throw ConfigError("missing and outage rates must be probabilities");
}

PatientRecord generate_patient(const SynthConfig& c, std::string patient_id) {
  check(c);
  SplitMix64 rng(c.seed);
  SplitMix64 meal_rng = rng.fork();
  SplitMix64 noise_rng = rng.fork();
  SplitMix64 sensor_rng = rng.fork();

  std::vector<Dose> meals, boluses;
  for (int d = 0; d < c.days; ++d) {
    int count = c.meals_min + static_cast<int>(meal_rng.below(static_cast<std::uint64_t>(c.meals_max - c.meals_min) + 1));
    for (int m = 0; m < count; ++m) {
      auto [hour, span] = kMealWindows[m];
      double minute = std::round(d * 1440.0 + 60.0 * (hour + span * meal_rng.uniform()));
      double cho = std::round(meal_rng.uniform(c.cho_min, c.cho_max));
      double factor = std::max(0.0, 1.0 + c.bolus_error * meal_rng.normal());
      double units = std::round(10.0 * c.bolus_units_per_10g * cho / 10.0 * factor) / 10.0;
      meals.push_back({minute, cho});
      if (units > 0) boluses.push_back({minute, units});
    }
  }
  std::vector<bool> outage_day(static_cast<std::size_t>(c.days), false);
  std::vector<double> outage_start(static_cast<std::size_t>(c.days), 0.0);
  for (int d = 0; d < c.days; ++d) {
    outage_day[static_cast<std::size_t>(d)] = sensor_rng.uniform() < c.outage_day_rate;
    outage_start[static_cast<std::size_t>(d)] = d * 1440.0 + 60.0 * sensor_rng.uniform(2.0, 20.0);
  }

  PatientRecord record;
  record.patient_id = std::move(patient_id);
  record.diabetes_type = DiabetesType::synthetic;

  const double horizon = 8 * 60;  // kernels are negligible beyond 8 h
  const int samples = c.days * kSlotsPerDay;
  const double innovation = c.noise_std * std::sqrt(1 - c.noise_correlation * c.noise_correlation);
  double noise = c.noise_std * noise_rng.normal();
  std::size_t clipped = 0, emitted = 0;
  std::size_t meal_i = 0, bolus_i = 0;
  for (int s = 0; s < samples; ++s) {
    const double t = s * static_cast<double>(kStepMinutes);
    if (s > 0) noise = c.noise_correlation * noise + innovation * noise_rng.normal();
    const double hour = std::fmod(t / 60.0, 24.0);
    double g = c.baseline +
               c.circadian_amplitude * std::cos(2 * std::numbers::pi * (hour - c.circadian_peak_hour) / 24.0);
    for (const auto& m : meals)
      if (t > m.minute && t - m.minute < horizon)
        g += m.amount * c.cho_gain * response_kernel(t - m.minute, c.meal_peak_minutes, c.meal_width_minutes);
    for (const auto& b : boluses)
      if (t > b.minute && t - b.minute < horizon)
        g -= b.amount * c.insulin_gain *
             response_kernel(t - b.minute, c.insulin_peak_minutes, c.insulin_width_minutes);
    g += noise;
    if (g <= kClipLow || g >= kClipHigh) ++clipped;
    g = std::clamp(g, kClipLow, kClipHigh);
    g = std::round(g * 10.0) / 10.0;

    const TimePoint when = c.start + std::chrono::minutes(static_cast<int>(t));
    // exogenous events due at or before this sample, in time order
    while (meal_i < meals.size() && meals[meal_i].minute <= t) {
      record.events.push_back({c.start + std::chrono::minutes(static_cast<int>(meals[meal_i].minute)),
                               EventKind::cho, meals[meal_i].amount});
      ++meal_i;
    }
    while (bolus_i < boluses.size() && boluses[bolus_i].minute <= t) {
      record.events.push_back({c.start + std::chrono::minutes(static_cast<int>(boluses[bolus_i].minute)),
                               EventKind::insulin, boluses[bolus_i].amount});
      ++bolus_i;
    }

    const auto day = static_cast<std::size_t>(s / kSlotsPerDay);
    bool dropped = sensor_rng.uniform() < c.missing_rate;
    if (outage_day[day] && t >= outage_start[day] && t < outage_start[day] + 120) dropped = true;
    if (!dropped) {
      record.events.push_back({when, EventKind::glucose, g});
      ++emitted;
    }
  }
  std::stable_sort(record.events.begin(), record.events.end(),
                   [](const RawEvent& a, const RawEvent& b) { return a.timestamp < b.timestamp; });

  if (static_cast<double>(clipped) > 0.2 * samples) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "glucose at the clip bounds for %.1f%% of samples",
                  100.0 * static_cast<double>(clipped) / samples);
    record.warnings.emplace_back(buf);
  }
  if (emitted == 0) record.warnings.emplace_back("no glucose reading survived the sensor model");
  return record;
}

std::vector<PatientRecord> generate_cohort(int n, const SynthConfig& base, std::uint64_t seed) {
  if (n < 1) throw ConfigError("cohort size must be >= 1");
  SplitMix64 rng(seed);
  std::vector<PatientRecord> out;
  for (int i = 0; i < n; ++i) {
    SynthConfig c = base;
    c.baseline = base.baseline * rng.uniform(0.85, 1.15);
    c.cho_gain = base.cho_gain * rng.uniform(0.8, 1.2);
    c.insulin_gain = base.insulin_gain * rng.uniform(0.8, 1.2);
    c.noise_std = base.noise_std * rng.uniform(0.8, 1.2);
    c.circadian_amplitude = base.circadian_amplitude * rng.uniform(0.5, 1.5);
    c.meal_peak_minutes = base.meal_peak_minutes * rng.uniform(0.85, 1.15);
    c.insulin_peak_minutes = base.insulin_peak_minutes * rng.uniform(0.85, 1.15);
    c.seed = rng.next();
    char id[32];
    std::snprintf(id, sizeof id, "synth-%03d", i + 1);
    out.push_back(generate_patient(c, id));
  }
  return out;
}

}  // namespace glyco::synth
