// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <map>
#include <numeric>
#include <set>

#include "glyco/error.hpp"
#include "glyco/synth.hpp"

using namespace glyco;
using namespace glyco::synth;

namespace {

SynthConfig quiet_config() {
  SynthConfig c;
  c.days = 4;
  c.noise_std = 0;
  c.circadian_amplitude = 0;
  c.meals_min = c.meals_max = 0;
  return c;
}

std::vector<double> glucose(const PatientRecord& r) {
  std::vector<double> g;
  for (const auto& e : r.events)
    if (e.kind == EventKind::glucose) g.push_back(e.value);
  return g;
}

}  // namespace

TEST(Kernel, UnitPeak) {
  EXPECT_DOUBLE_EQ(response_kernel(45, 45, 30), 1.0);
  EXPECT_EQ(response_kernel(0, 45, 30), 0.0);
  EXPECT_EQ(response_kernel(-10, 45, 30), 0.0);
  EXPECT_LT(response_kernel(30, 45, 30), 1.0);
  EXPECT_LT(response_kernel(60, 45, 30), 1.0);
}

TEST(Generate, ConstantWithoutInputsOrNoise) {
  auto r = generate_patient(quiet_config());
  auto g = glucose(r);
  ASSERT_EQ(g.size(), 4u * kSlotsPerDay);
  for (double v : g) ASSERT_EQ(v, 130.0);
  EXPECT_EQ(r.diabetes_type, DiabetesType::synthetic);
}

TEST(Generate, Deterministic) {
  SynthConfig c;
  c.days = 5;
  c.seed = 99;
  c.missing_rate = 0.02;
  c.outage_day_rate = 0.5;
  auto a = generate_patient(c);
  EXPECT_EQ(a.events, generate_patient(c).events);
  c.seed = 100;
  EXPECT_NE(a.events, generate_patient(c).events);
}

TEST(Generate, MealRaisesGlucoseWithinAnHour) {
  SynthConfig c = quiet_config();
  c.meals_min = c.meals_max = 1;
  c.cho_min = c.cho_max = 50;
  c.bolus_units_per_10g = 0;
  auto r = generate_patient(c);
  std::map<TimePoint, double> g;
  std::vector<TimePoint> meals;
  for (const auto& e : r.events) {
    if (e.kind == EventKind::glucose) g[e.timestamp] = e.value;
    if (e.kind == EventKind::cho) meals.push_back(e.timestamp);
    EXPECT_NE(e.kind, EventKind::insulin);
  }
  ASSERT_EQ(meals.size(), 4u);
  for (auto m : meals) {
    auto before = g.lower_bound(m);
    ASSERT_NE(before, g.end());
    auto after = g.upper_bound(m + std::chrono::minutes(60));
    ASSERT_NE(after, g.begin());
    --after;
    EXPECT_GT(after->second, before->second + 20);
  }
}

TEST(Generate, OutputValidates) {
  SynthConfig c;
  c.days = 10;
  c.missing_rate = 0.05;
  c.outage_day_rate = 0.3;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    c.seed = seed;
    EXPECT_TRUE(validate(generate_patient(c)).empty()) << seed;
  }
}

TEST(Generate, MissingReadingsAreDropped) {
  SynthConfig c = quiet_config();
  c.missing_rate = 0.5;
  auto n = glucose(generate_patient(c)).size();
  EXPECT_GT(n, 4u * kSlotsPerDay / 3);
  EXPECT_LT(n, 4u * kSlotsPerDay * 2 / 3);
}

TEST(Generate, ClippingWarning) {
  SynthConfig c = quiet_config();
  c.baseline = 500;
  auto r = generate_patient(c);
  ASSERT_EQ(r.warnings.size(), 1u);
  for (double v : glucose(r)) ASSERT_EQ(v, kClipHigh);
  EXPECT_TRUE(generate_patient(quiet_config()).warnings.empty());
}

TEST(Check, RejectsInvalidConfigs) {
  auto bad = [](auto mutate) {
    SynthConfig c;
    mutate(c);
    return c;
  };
  EXPECT_THROW(check(bad([](SynthConfig& c) { c.days = 3; })), ConfigError);
  EXPECT_THROW(check(bad([](SynthConfig& c) { c.meals_min = 5; c.meals_max = 4; })), ConfigError);
  EXPECT_THROW(check(bad([](SynthConfig& c) { c.cho_max = 10; })), ConfigError);
  EXPECT_THROW(check(bad([](SynthConfig& c) { c.noise_std = -1; })), ConfigError);
  EXPECT_THROW(check(bad([](SynthConfig& c) { c.meal_width_minutes = 0; })), ConfigError);
  EXPECT_THROW(check(bad([](SynthConfig& c) { c.noise_correlation = 1; })), ConfigError);
  EXPECT_THROW(check(bad([](SynthConfig& c) { c.missing_rate = 1.5; })), ConfigError);
  EXPECT_NO_THROW(check(SynthConfig{}));
}

TEST(Cohort, IdsAndJitter) {
  SynthConfig c;
  c.days = 4;
  auto cohort = generate_cohort(3, c, 7);
  ASSERT_EQ(cohort.size(), 3u);
  EXPECT_EQ(cohort[0].patient_id, "synth-001");
  EXPECT_EQ(cohort[2].patient_id, "synth-003");
  std::set<double> means;
  for (const auto& r : cohort) {
    auto g = glucose(r);
    means.insert(std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size()));
  }
  EXPECT_EQ(means.size(), 3u);
  EXPECT_EQ(generate_cohort(3, c, 7)[1].events, cohort[1].events);
  EXPECT_THROW(generate_cohort(0, c, 7), ConfigError);
}
