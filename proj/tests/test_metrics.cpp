// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "glyco/error.hpp"
#include "glyco/metrics.hpp"
#include "glyco/rng.hpp"
#include "support/oracles.hpp"

using namespace glyco;
using namespace glyco::metrics;
using namespace glyco::testing;

namespace {

const TimePoint kT0 = std::chrono::sys_days{std::chrono::year{2022} / 3 / 14};

PredictionTrace make_trace(const std::vector<double>& truth, const std::vector<double>& pred) {
  PredictionTrace t;
  for (std::size_t i = 0; i < truth.size(); ++i)
    t.push_back({kT0 + std::chrono::minutes(kStepMinutes * static_cast<int>(i)), truth[i], pred[i], 0});
  return t;
}

}  // namespace

TEST(Errors, RmseExample) {
  auto t = make_trace({100, 100, 100}, {103, 96, 100});
  EXPECT_NEAR(rmse(t), std::sqrt(25.0 / 3), 1e-12);
  EXPECT_THROW(rmse({}), ContractError);
}

TEST(Errors, DrmseExample) {
  // true deltas 10, 10; predicted 0, 20 -> errors 10, -10
  auto t = make_trace({100, 110, 120}, {100, 100, 120});
  EXPECT_NEAR(drmse(t), 10.0, 1e-12);
  EXPECT_NEAR(drmse_per_minute(t), 2.0, 1e-12);
}

TEST(Errors, OffsetDoesNotChangeDrmse) {
  auto t = make_trace({100, 130, 90, 95}, {120, 150, 110, 115});
  EXPECT_NEAR(drmse(t), 0.0, 1e-12);
  EXPECT_NEAR(rmse(t), 20.0, 1e-12);
}

TEST(Errors, PairsStopAtSegmentsAndGaps) {
  auto t = make_trace({100, 110, 120, 130}, {100, 110, 120, 130});
  t[2].segment_id = 1;
  t[3].segment_id = 1;
  t[3].timestamp += std::chrono::minutes(5);
  t[3].y_pred = 0;
  EXPECT_EQ(drmse(t), 0.0);
  EXPECT_EQ(rate_of_change(t).size(), 1u);
  t.resize(1);
  EXPECT_THROW(drmse(t), ContractError);
}

TEST(Rates, PerMinute) {
  auto r = rate_of_change(make_trace({100, 110, 105}, {100, 100, 115}));
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].index, 1u);
  EXPECT_DOUBLE_EQ(r[0].true_rate, 2.0);
  EXPECT_DOUBLE_EQ(r[0].pred_rate, 0.0);
  EXPECT_DOUBLE_EQ(r[1].true_rate, -1.0);
  EXPECT_DOUBLE_EQ(r[1].pred_rate, 3.0);
}

TEST(Grids, PointExamples) {
  EXPECT_EQ(p_ega(100, 100, 0), Zone::A);
  EXPECT_EQ(p_ega(100, 115, 0), Zone::A);
  const Zone z = p_ega(200, 70, 0);
  EXPECT_TRUE(z == Zone::uE || z == Zone::lE) << to_string(z);
  EXPECT_EQ(p_ega(60, 200, 0), Zone::uE);
  EXPECT_EQ(p_ega(60, 100, 0), Zone::uD);
  EXPECT_EQ(p_ega(300, 150, 0), Zone::lD);
  EXPECT_EQ(p_ega(100, 230, 0), Zone::uC);
  EXPECT_EQ(p_ega(170, 50.5, 0), Zone::lC);
  EXPECT_EQ(p_ega(100, 130, 0), Zone::B);
}

TEST(Grids, RisingReferenceWidensUpperLimits) {
  EXPECT_EQ(p_ega(100, 125, 0), Zone::B);
  EXPECT_EQ(p_ega(100, 125, 1.5), Zone::A);
  EXPECT_EQ(p_ega(100, 135, 1.5), Zone::B);
  EXPECT_EQ(p_ega(100, 135, 2.5), Zone::A);
  EXPECT_EQ(p_ega(100, 75, 2.5), Zone::B);  // lower limit stays
  EXPECT_EQ(p_ega(100, 75, -1.5), Zone::A);
}

TEST(Grids, RateExamples) {
  EXPECT_EQ(r_ega(0, 0), Zone::A);
  EXPECT_EQ(r_ega(1, 1), Zone::A);
  const Zone z = r_ega(-2, 2);
  EXPECT_TRUE(z == Zone::uE || z == Zone::lE) << to_string(z);
  EXPECT_EQ(r_ega(2, -2), Zone::lE);
  EXPECT_EQ(r_ega(-3, 0), Zone::uD);
  EXPECT_EQ(r_ega(3, 0), Zone::lD);
  EXPECT_EQ(r_ega(0, 2.5), Zone::uC);
  EXPECT_EQ(r_ega(0, -2.5), Zone::lC);
  EXPECT_EQ(r_ega(0, 1.5), Zone::B);
}

TEST(Classify, Examples) {
  for (auto g : {Region::hypo, Region::eu, Region::hyper}) {
    EXPECT_EQ(cg_ega_classify(Zone::A, Zone::A, g), Label::AP);
    EXPECT_EQ(cg_ega_classify(Zone::B, Zone::A, g), Label::AP);
    EXPECT_EQ(cg_ega_classify(Zone::uE, Zone::A, g), Label::EP);
    EXPECT_EQ(cg_ega_classify(Zone::A, Zone::uE, g), Label::EP);
    EXPECT_EQ(cg_ega_classify(Zone::A, Zone::uC, g), Label::BE);
  }
  EXPECT_EQ(cg_ega_classify(Zone::A, Zone::lD, Region::hyper), Label::BE);
  EXPECT_EQ(cg_ega_classify(Zone::A, Zone::lD, Region::eu), Label::EP);
  EXPECT_EQ(region_of(70), Region::hypo);
  EXPECT_EQ(region_of(70.1), Region::eu);
  EXPECT_EQ(region_of(180), Region::hyper);
}

TEST(Classify, ApIffBothGridsAorB) {
  const Zone zones[] = {Zone::A, Zone::B, Zone::uC, Zone::lC, Zone::uD, Zone::lD, Zone::uE, Zone::lE};
  for (auto g : {Region::hypo, Region::eu, Region::hyper})
    for (auto p : zones)
      for (auto r : zones) {
        const bool ab = (p == Zone::A || p == Zone::B) && (r == Zone::A || r == Zone::B);
        EXPECT_EQ(cg_ega_classify(p, r, g) == Label::AP, ab);
      }
}

TEST(Oracle, ThousandRandomPointsAgree) {
  SplitMix64 rng(2024);
  std::array<int, 3> per_region{};
  std::map<std::string, int> p_seen, r_seen, l_seen;
  for (int i = 0; i < 1000; ++i) {
    double y;
    switch (i % 3) {
      case 0: y = rng.uniform(40, 70); break;
      case 1: y = rng.uniform(70.0001, 179.999); break;
      default: y = rng.uniform(180, 400); break;
    }
    // half near the truth, half anywhere on the sensor range
    const double p = i % 2 ? std::clamp(y * (1 + 0.25 * rng.normal()), 40.0, 400.0) : rng.uniform(40, 400);
    const double tr = rng.uniform(-4, 4);
    const double pr = i % 4 < 2 ? std::clamp(tr + 1.5 * rng.normal(), -4.0, 4.0) : rng.uniform(-4, 4);

    const Zone pz = p_ega(y, p, tr);
    const Zone rz = r_ega(tr, pr);
    const Label l = cg_ega_classify(pz, rz, region_of(y));
    const std::string op = oracle::p_zone(y, p, tr), orr = oracle::r_zone(tr, pr);
    ASSERT_EQ(to_string(pz), op) << y << ' ' << p << ' ' << tr;
    ASSERT_EQ(to_string(rz), orr) << tr << ' ' << pr;
    ASSERT_EQ(to_string(l), oracle::label(op, orr, oracle::region(y))) << op << ' ' << orr << ' ' << y;
    ++per_region[static_cast<std::size_t>(oracle::region(y))];
    ++p_seen[op];
    ++r_seen[orr];
    ++l_seen[std::string(to_string(l))];
  }
  for (int n : per_region) EXPECT_GT(n, 300);
  EXPECT_EQ(p_seen.size(), 8u);
  EXPECT_EQ(r_seen.size(), 8u);
  EXPECT_EQ(l_seen.size(), 3u);
}

TEST(Oracle, TracePointsAgree) {
  SplitMix64 rng(5);
  std::vector<double> truth{120}, pred{125};
  for (int i = 1; i < 600; ++i) {
    truth.push_back(std::clamp(truth.back() + 5 * rng.uniform(-4, 4), 40.0, 400.0));
    pred.push_back(std::clamp(truth.back() + 30 * rng.normal(), 40.0, 400.0));
  }
  auto points = cg_ega_points(make_trace(truth, pred));
  ASSERT_EQ(points.size(), 599u);
  for (const auto& s : points) {
    const double tr = (truth[s.index] - truth[s.index - 1]) / 5;
    const double pr = (pred[s.index] - pred[s.index - 1]) / 5;
    const std::string op = oracle::p_zone(truth[s.index], pred[s.index], tr), orr = oracle::r_zone(tr, pr);
    ASSERT_EQ(to_string(s.p_zone), op);
    ASSERT_EQ(to_string(s.r_zone), orr);
    ASSERT_EQ(to_string(s.label), oracle::label(op, orr, oracle::region(truth[s.index])));
  }
}

TEST(Report, RatesSumToHundred) {
  SplitMix64 rng(9);
  std::vector<double> truth, pred;
  for (int i = 0; i < 300; ++i) {
    truth.push_back(140 + 90 * std::sin(i / 20.0));
    pred.push_back(truth.back() + 15 * rng.normal());
  }
  auto t = make_trace(truth, pred);
  auto r = cg_ega_report(t);
  EXPECT_EQ(r.overall.count, 299u);
  EXPECT_NEAR(r.overall.ap + r.overall.be + r.overall.ep, 100.0, 1e-9);
  std::size_t total = 0;
  for (const auto& g : r.regions) {
    total += g.count;
    if (g.count) EXPECT_NEAR(g.ap + g.be + g.ep, 100.0, 1e-9);
  }
  EXPECT_EQ(total, 299u);
  EXPECT_DOUBLE_EQ(r.rmse, rmse(t));
  EXPECT_DOUBLE_EQ(r.drmse, drmse(t));
}

TEST(Report, EmptyRegionIsNan) {
  auto r = cg_ega_report(make_trace({120, 125, 130}, {120, 125, 130}));
  EXPECT_EQ(r.overall.ap, 100.0);
  EXPECT_TRUE(std::isnan(r.regions[static_cast<int>(Region::hypo)].ap));
  EXPECT_TRUE(std::isnan(r.regions[static_cast<int>(Region::hyper)].ep));
  EXPECT_THROW(cg_ega_report(make_trace({1}, {1})), ContractError);
}

TEST(TraceCsv, RoundTrip) {
  SplitMix64 rng(4);
  PredictionTrace t;
  for (int i = 0; i < 200; ++i)
    t.push_back({kT0 + std::chrono::minutes(5 * i), rng.uniform(40, 400), rng.uniform(-50, 500), i / 50});
  std::stringstream buf;
  write_trace_csv(buf, t);
  EXPECT_EQ(read_trace_csv(buf), t);
  std::istringstream bad("datetime,y_true,y_pred,segment_id\n2022-01-01T00:00:00,1,2\n");
  EXPECT_THROW(read_trace_csv(bad), ParseError);
}

TEST(EgaCsv, Columns) {
  auto points = cg_ega_points(make_trace({100, 105}, {100, 104}));
  std::ostringstream out;
  write_ega_csv(out, points);
  EXPECT_EQ(out.str(), "y_true,y_pred,true_rate,pred_rate,p_zone,r_zone,label\n105,104,1,0.8,A,A,AP\n");
}
