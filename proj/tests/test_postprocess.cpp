// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "glyco/error.hpp"
#include "glyco/postprocess.hpp"
#include "glyco/rng.hpp"

using namespace glyco;
using namespace glyco::postprocess;
using metrics::PredictionTrace;

namespace {

const TimePoint kT0 = std::chrono::sys_days{std::chrono::year{2021} / 6 / 1};

PredictionTrace trace_of(const std::vector<double>& pred, int segment = 0, int offset = 0) {
  PredictionTrace t;
  for (std::size_t i = 0; i < pred.size(); ++i)
    t.push_back({kT0 + std::chrono::minutes(kStepMinutes * (offset + static_cast<int>(i))), 100.0 + static_cast<double>(i),
                 pred[i], segment});
  return t;
}

std::vector<double> predictions(const PredictionTrace& t) {
  std::vector<double> out;
  for (const auto& p : t) out.push_back(p.y_pred);
  return out;
}

}  // namespace

TEST(MovingAverage, WindowOneIsIdentity) {
  auto t = trace_of({3, 1, 4, 1, 5, 9, 2, 6});
  EXPECT_EQ(moving_average(t, 1), t);
}

TEST(MovingAverage, CausalWithShortStart) {
  auto s = moving_average(trace_of({100, 110, 120, 130}), 3);
  EXPECT_EQ(predictions(s), (std::vector<double>{100, 105, 110, 120}));
}

TEST(MovingAverage, ConstantTraceUnchanged) {
  auto t = trace_of(std::vector<double>(20, 142.5));
  EXPECT_EQ(predictions(moving_average(t, 3)), predictions(t));
}

TEST(MovingAverage, KeepsTruthTimesAndLength) {
  auto t = trace_of({1, 2, 3, 4, 5});
  auto s = moving_average(t, 3);
  ASSERT_EQ(s.size(), t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_EQ(s[i].y_true, t[i].y_true);
    EXPECT_EQ(s[i].timestamp, t[i].timestamp);
    EXPECT_EQ(s[i].segment_id, t[i].segment_id);
  }
}

TEST(MovingAverage, RestartsAtSegments) {
  auto t = trace_of({10, 20, 30});
  auto second = trace_of({100, 200, 300}, 1, 10);
  t.insert(t.end(), second.begin(), second.end());
  EXPECT_EQ(predictions(moving_average(t, 3)), (std::vector<double>{10, 15, 20, 100, 150, 200}));
}

TEST(MovingAverage, RejectsBadWindow) {
  EXPECT_THROW(moving_average(trace_of({1}), 0), ContractError);
}

TEST(MovingAverage, ReducesDrmseOnNoise) {
  SplitMix64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> pred(200);
    for (auto& v : pred) v = 150 + 5 * rng.normal();
    auto raw = trace_of(pred);
    for (auto& p : raw) p.y_true = 150;
    EXPECT_LE(metrics::drmse(moving_average(raw, 3)), metrics::drmse(raw)) << trial;
  }
}

TEST(Exponential, Recurrence) {
  auto s = exponential_smoothing(trace_of({100, 110, 120, 130}), 0.5);
  EXPECT_EQ(predictions(s), (std::vector<double>{100, 105, 112.5, 121.25}));
  auto t = trace_of({4, 8});
  EXPECT_EQ(exponential_smoothing(t, 1.0), t);
}

TEST(Smooth, DispatchesOnMode) {
  auto t = trace_of({100, 110, 120, 130});
  EXPECT_EQ(smooth(t, {}), moving_average(t, 3));
  EXPECT_EQ(smooth(t, {3, SmoothingMode::exponential, 0.25}), exponential_smoothing(t, 0.25));
}
