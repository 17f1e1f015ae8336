// SPDX-License-Identifier: Apache-2.0
#include "glyco/metrics.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "glyco/error.hpp"

namespace glyco::metrics {

namespace {

bool same_segment_step(const TracePoint& a, const TracePoint& b) {
  return a.segment_id == b.segment_id &&
         b.timestamp - a.timestamp == std::chrono::minutes(kStepMinutes);
}

enum class Tier { ab, c, d, e };

Tier tier(Zone z) {
  switch (z) {
    case Zone::A:
    case Zone::B: return Tier::ab;
    case Zone::uC:
    case Zone::lC: return Tier::c;
    case Zone::uD:
    case Zone::lD: return Tier::d;
    case Zone::uE:
    case Zone::lE: return Tier::e;
  }
  return Tier::e;
}

}  // namespace

void write_trace_csv(std::ostream& out, const PredictionTrace& trace) {
  out << "datetime,y_true,y_pred,segment_id\n";
  for (const auto& p : trace)
    out << format_datetime(p.timestamp) << ',' << format_number(p.y_true) << ','
        << format_number(p.y_pred) << ',' << p.segment_id << '\n';
}

PredictionTrace read_trace_csv(std::istream& in) {
  PredictionTrace trace;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != "datetime,y_true,y_pred,segment_id") throw ParseError(line_no, "bad trace header");
      continue;
    }
    if (line.empty()) continue;
    std::string_view v(line);
    std::array<std::string_view, 4> f;
    for (std::size_t k = 0; k < 4; ++k) {
      auto comma = v.find(',');
      if ((comma == std::string_view::npos) != (k == 3)) throw ParseError(line_no, "expected 4 fields");
      f[k] = v.substr(0, comma);
      if (comma != std::string_view::npos) v.remove_prefix(comma + 1);
    }
    TracePoint p;
    auto ts = parse_datetime(f[0]);
    if (!ts) throw ParseError(line_no, "bad datetime");
    p.timestamp = *ts;
    auto num = [&](std::string_view s, auto& out) {
      auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
      if (ec != std::errc{} || ptr != s.data() + s.size()) throw ParseError(line_no, "bad number");
    };
    num(f[1], p.y_true);
    num(f[2], p.y_pred);
    num(f[3], p.segment_id);
    trace.push_back(p);
  }
  return trace;
}

double rmse(const PredictionTrace& trace) {
  if (trace.empty()) throw ContractError("rmse of an empty trace");
  double acc = 0;
  for (const auto& p : trace) acc += (p.y_true - p.y_pred) * (p.y_true - p.y_pred);
  return std::sqrt(acc / static_cast<double>(trace.size()));
}

double drmse(const PredictionTrace& trace) {
  double acc = 0;
  std::size_t n = 0;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (!same_segment_step(trace[i - 1], trace[i])) continue;
    double d = (trace[i].y_true - trace[i - 1].y_true) - (trace[i].y_pred - trace[i - 1].y_pred);
    acc += d * d;
    ++n;
  }
  if (n == 0) throw ContractError("drmse needs a consecutive same-segment pair");
  return std::sqrt(acc / static_cast<double>(n));
}

double drmse_per_minute(const PredictionTrace& trace) { return drmse(trace) / kStepMinutes; }

std::vector<RatePoint> rate_of_change(const PredictionTrace& trace) {
  std::vector<RatePoint> out;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (!same_segment_step(trace[i - 1], trace[i])) continue;
    out.push_back({i, (trace[i].y_true - trace[i - 1].y_true) / kStepMinutes,
                   (trace[i].y_pred - trace[i - 1].y_pred) / kStepMinutes});
  }
  return out;
}

std::string_view to_string(Zone zone) {
  static constexpr std::string_view names[] = {"A", "B", "uC", "lC", "uD", "lD", "uE", "lE"};
  return names[static_cast<int>(zone)];
}

Region region_of(double y_true) {
  if (y_true <= kHypoThreshold) return Region::hypo;
  if (y_true >= kHyperThreshold) return Region::hyper;
  return Region::eu;
}

std::string_view to_string(Region region) {
  static constexpr std::string_view names[] = {"hypo", "eu", "hyper"};
  return names[static_cast<int>(region)];
}

std::string_view to_string(Label label) {
  static constexpr std::string_view names[] = {"AP", "BE", "EP"};
  return names[static_cast<int>(label)];
}

Zone p_ega(double y, double p, double rate) {
  double up = 0, lo = 0;
  if (rate > 2) up = 20;
  else if (rate >= 1) up = 10;
  if (rate < -2) lo = 20;
  else if (rate <= -1) lo = 10;

  if ((y <= 70 && p <= 70 + up) || (p >= 0.8 * y - lo && p <= 1.2 * y + up)) return Zone::A;
  if (y <= 70 && p >= 180 + up) return Zone::uE;
  if (y >= 180 && p <= 70 - lo) return Zone::lE;
  if (y <= 70 && p > 70 + up) return Zone::uD;
  if (y >= 240 && p < 180 - lo) return Zone::lD;
  if (y > 70 && y < 290 && p > y + 110 + up) return Zone::uC;
  if (y >= 130 && y <= 180 && p < 1.4 * y - 182 - lo) return Zone::lC;
  return Zone::B;
}

Zone r_ega(double t, double p) {
  if (std::abs(p - t) <= 1) return Zone::A;
  if (t < -1 && p > 1) return Zone::uE;
  if (t > 1 && p < -1) return Zone::lE;
  if (t < -2 && p >= -1 && p <= 1) return Zone::uD;
  if (t > 2 && p >= -1 && p <= 1) return Zone::lD;
  if (t >= -1 && t <= 1 && p > t + 2) return Zone::uC;
  if (t >= -1 && t <= 1 && p < t - 2) return Zone::lC;
  return Zone::B;
}

Label cg_ega_classify(Zone p, Zone r, Region region) {
  const Tier pt = tier(p);
  const Tier rt = tier(r);
  switch (pt) {
    case Tier::ab:
      if (rt == Tier::ab) return Label::AP;
      if (rt == Tier::c) return Label::BE;
      if (rt == Tier::d) return region == Region::hyper ? Label::BE : Label::EP;
      return Label::EP;
    case Tier::c:
      if (region == Region::hypo) return Label::EP;
      if (rt == Tier::ab) return Label::BE;
      if (rt == Tier::c && region == Region::eu) return Label::BE;
      return Label::EP;
    case Tier::d:
    case Tier::e: return Label::EP;
  }
  return Label::EP;
}

std::vector<ScoredPoint> cg_ega_points(const PredictionTrace& trace) {
  std::vector<ScoredPoint> out;
  for (const auto& r : rate_of_change(trace)) {
    const auto& tp = trace[r.index];
    ScoredPoint s;
    s.index = r.index;
    s.y_true = tp.y_true;
    s.y_pred = tp.y_pred;
    s.true_rate = r.true_rate;
    s.pred_rate = r.pred_rate;
    s.region = region_of(tp.y_true);
    s.p_zone = p_ega(tp.y_true, tp.y_pred, r.true_rate);
    s.r_zone = r_ega(r);
    s.label = cg_ega_classify(s.p_zone, s.r_zone, s.region);
    out.push_back(s);
  }
  return out;
}

CgEgaReport cg_ega_report(const PredictionTrace& trace) {
  auto points = cg_ega_points(trace);
  if (points.empty()) throw ContractError("CG-EGA needs at least one rate point");
  std::array<std::array<std::size_t, 3>, 3> counts{};  // [region][label]
  for (const auto& s : points) ++counts[static_cast<int>(s.region)][static_cast<int>(s.label)];
  auto rates = [](const std::array<std::size_t, 3>& c) {
    LabelRates r;
    r.count = c[0] + c[1] + c[2];
    if (r.count == 0) {
      r.ap = r.be = r.ep = std::numeric_limits<double>::quiet_NaN();
      return r;
    }
    const double n = static_cast<double>(r.count);
    r.ap = 100.0 * static_cast<double>(c[0]) / n;
    r.be = 100.0 * static_cast<double>(c[1]) / n;
    r.ep = 100.0 * static_cast<double>(c[2]) / n;
    return r;
  };
  CgEgaReport report;
  std::array<std::size_t, 3> total{};
  for (int g = 0; g < 3; ++g) {
    report.regions[static_cast<std::size_t>(g)] = rates(counts[static_cast<std::size_t>(g)]);
    for (int l = 0; l < 3; ++l) total[static_cast<std::size_t>(l)] += counts[static_cast<std::size_t>(g)][static_cast<std::size_t>(l)];
  }
  report.overall = rates(total);
  report.rmse = rmse(trace);
  report.drmse = drmse(trace);
  report.drmse_per_minute = report.drmse / kStepMinutes;
  return report;
}

void write_ega_csv(std::ostream& out, std::span<const ScoredPoint> points) {
  out << "y_true,y_pred,true_rate,pred_rate,p_zone,r_zone,label\n";
  for (const auto& s : points)
    out << format_number(s.y_true) << ',' << format_number(s.y_pred) << ','
        << format_number(s.true_rate) << ',' << format_number(s.pred_rate) << ','
        << to_string(s.p_zone) << ',' << to_string(s.r_zone) << ',' << to_string(s.label) << '\n';
}

}  // namespace glyco::metrics
