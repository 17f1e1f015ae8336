// SPDX-License-Identifier: Apache-2.0
#include "glyco/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "glyco/error.hpp"

namespace glyco::preprocess {

namespace {

// [begin, end) index ranges of consecutive samples sharing a day_index.
std::vector<std::pair<std::size_t, std::size_t>> day_ranges(const UniformSeries& s) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= s.size(); ++i) {
    if (i == s.size() || s.day_index[i] != s.day_index[begin]) {
      out.emplace_back(begin, i);
      begin = i;
    }
  }
  if (s.empty()) out.clear();
  return out;
}

int minute_of_day(const UniformSeries& s, std::size_t i) {
  auto t = s.time_at(i);
  return static_cast<int>(
      std::chrono::duration_cast<std::chrono::minutes>(t - std::chrono::floor<std::chrono::days>(t))
          .count());
}

bool contains(const std::vector<std::int64_t>& sorted, std::int64_t v) {
  return std::binary_search(sorted.begin(), sorted.end(), v);
}

}  // namespace

Pchip::Pchip(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
  const std::size_t n = x_.size();
  if (n < 2 || y_.size() != n) throw ContractError("pchip needs at least two nodes");
  for (std::size_t k = 0; k + 1 < n; ++k)
    if (!(x_[k + 1] > x_[k])) throw ContractError("pchip abscissae must increase strictly");

  std::vector<double> secant(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) secant[k] = (y_[k + 1] - y_[k]) / (x_[k + 1] - x_[k]);

  slopes_.assign(n, 0.0);
  slopes_[0] = secant[0];
  slopes_[n - 1] = secant[n - 2];
  for (std::size_t k = 1; k + 1 < n; ++k)
    slopes_[k] = secant[k - 1] * secant[k] > 0 ? 0.5 * (secant[k - 1] + secant[k]) : 0.0;

  // Fritsch-Carlson limiter: keep (alpha, beta) inside the circle of radius 3.
  for (std::size_t k = 0; k + 1 < n; ++k) {
    if (secant[k] == 0.0) {
      slopes_[k] = slopes_[k + 1] = 0.0;
      continue;
    }
    double alpha = slopes_[k] / secant[k];
    double beta = slopes_[k + 1] / secant[k];
    double r2 = alpha * alpha + beta * beta;
    if (r2 > 9.0) {
      double tau = 3.0 / std::sqrt(r2);
      slopes_[k] = tau * alpha * secant[k];
      slopes_[k + 1] = tau * beta * secant[k];
    }
  }
}

double Pchip::operator()(double xq) const {
  if (xq <= x_.front()) return y_.front();
  if (xq >= x_.back()) return y_.back();
  auto it = std::upper_bound(x_.begin(), x_.end(), xq);
  std::size_t k = static_cast<std::size_t>(it - x_.begin()) - 1;
  double h = x_[k + 1] - x_[k];
  double t = (xq - x_[k]) / h;
  double t2 = t * t, t3 = t2 * t;
  double h00 = 2 * t3 - 3 * t2 + 1;
  double h10 = t3 - 2 * t2 + t;
  double h01 = -2 * t3 + 3 * t2;
  double h11 = t3 - t2;
  return h00 * y_[k] + h10 * h * slopes_[k] + h01 * y_[k + 1] + h11 * h * slopes_[k + 1];
}

UniformSeries resample_5min(const PatientRecord& record) {
  if (record.events.empty()) throw EmptyInputError("record has no events");
  using namespace std::chrono;
  const auto step = minutes(kStepMinutes);
  auto first = record.events.front().timestamp;
  auto last = record.events.front().timestamp;
  for (const auto& e : record.events) {
    first = std::min(first, e.timestamp);
    last = std::max(last, e.timestamp);
  }
  UniformSeries out;
  out.start = floor<minutes>(first) - (floor<minutes>(first).time_since_epoch() % step);
  auto slot_of = [&](TimePoint t) { return static_cast<std::int64_t>((t - out.start) / step); };
  const std::size_t n = static_cast<std::size_t>(slot_of(last)) + 1;

  std::vector<double> sum(n, 0.0);
  std::vector<int> count(n, 0);
  out.slot.resize(n);
  out.glucose.assign(n, std::nullopt);
  out.cho.assign(n, 0.0);
  out.insulin.assign(n, 0.0);
  out.interpolated_mask.assign(n, false);
  out.day_index.resize(n);
  for (const auto& e : record.events) {
    auto s = static_cast<std::size_t>(slot_of(e.timestamp));
    switch (e.kind) {
      case EventKind::glucose:
        sum[s] += e.value;
        ++count[s];
        break;
      case EventKind::cho: out.cho[s] += e.value; break;
      case EventKind::insulin: out.insulin[s] += e.value; break;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    out.slot[i] = static_cast<std::int64_t>(i);
    if (count[i] > 0) out.glucose[i] = sum[i] / count[i];
    out.day_index[i] = day_number(out.time_at(i));
  }
  return out;
}

UniformSeries remove_incomplete_days(const UniformSeries& series) {
  const int max_gap_slots = kMaxGapMinutes / series.step_minutes;
  std::vector<std::int64_t> keep;
  for (auto [begin, end] : day_ranges(series)) {
    std::optional<std::size_t> prev;
    bool ok = true;
    for (std::size_t i = begin; i < end && ok; ++i) {
      if (!series.glucose[i]) continue;
      if (prev && series.slot[i] - series.slot[*prev] > max_gap_slots) ok = false;
      prev = i;
    }
    if (!ok || !prev) continue;
    std::optional<std::size_t> first;
    for (std::size_t i = begin; i < end; ++i)
      if (series.glucose[i]) {
        first = i;
        break;
      }
    if (minute_of_day(series, *first) >= 60) continue;
    if (minute_of_day(series, *prev) < 23 * 60) continue;
    keep.push_back(series.day_index[begin]);
  }
  if (keep.empty()) throw DataError("no complete day left after cleaning");
  std::sort(keep.begin(), keep.end());
  return series.subset_days(keep);
}

UniformSeries remove_spikes(const UniformSeries& series, double threshold) {
  UniformSeries out = series;
  std::vector<std::size_t> present;
  for (std::size_t i = 0; i < series.size(); ++i)
    if (series.glucose[i]) present.push_back(i);
  for (std::size_t k = 1; k + 1 < present.size(); ++k) {
    double g = *series.glucose[present[k]];
    double d_prev = g - *series.glucose[present[k - 1]];
    double d_next = *series.glucose[present[k + 1]] - g;
    if (std::abs(d_prev) > threshold && std::abs(d_next) > threshold && d_prev * d_next < 0)
      out.glucose[present[k]] = std::nullopt;
  }
  return out;
}

UniformSeries pchip_interpolate(const UniformSeries& series) {
  UniformSeries out = series;
  for (auto [begin, end] : day_ranges(series)) {
    std::vector<double> x, y;
    for (std::size_t i = begin; i < end; ++i)
      if (series.glucose[i]) {
        x.push_back(static_cast<double>(series.slot[i]));
        y.push_back(*series.glucose[i]);
      }
    if (x.size() < 2)
      throw DataError("day " + std::to_string(series.day_index[begin]) +
                      " has fewer than 2 glucose readings to interpolate");
    Pchip interp(x, y);
    for (std::size_t i = begin; i < end; ++i) {
      auto s = static_cast<double>(series.slot[i]);
      if (series.glucose[i] || s < x.front() || s > x.back()) continue;
      out.glucose[i] = interp(s);
      out.interpolated_mask[i] = true;
    }
  }
  return out;
}

DaySplit split_days(const UniformSeries& series, const SplitSpec& spec) {
  auto days = series.days();
  const std::size_t n = days.size();
  if (n < 4) throw DataError("need at least 4 retained days, have " + std::to_string(n));
  auto n_train = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(n)));
  auto n_valid = static_cast<std::size_t>(std::floor(spec.valid_fraction * static_cast<double>(n)));
  DaySplit out;
  out.train.assign(days.begin(), days.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.valid.assign(days.begin() + static_cast<std::ptrdiff_t>(n_train),
                   days.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid));
  out.test.assign(days.begin() + static_cast<std::ptrdiff_t>(n_train + n_valid), days.end());
  return out;
}

Scaler fit_scaler(const UniformSeries& series, const std::vector<std::int64_t>& train_days) {
  if (train_days.empty()) throw ContractError("no training days");
  auto days = train_days;
  std::sort(days.begin(), days.end());
  std::array<double, kChannels> sum{}, sum_sq{};
  std::array<std::size_t, kChannels> count{};
  auto add = [&](int c, double v) {
    sum[c] += v;
    ++count[c];
  };
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (!contains(days, series.day_index[i])) continue;
    if (series.glucose[i]) add(kGlucose, *series.glucose[i]);
    add(kCho, series.cho[i]);
    add(kInsulin, series.insulin[i]);
  }
  Scaler scaler;
  for (int c = 0; c < kChannels; ++c) {
    if (count[c] == 0) throw DataError("no training samples");
    scaler.mean[c] = sum[c] / static_cast<double>(count[c]);
  }
  // second pass for a stable variance
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (!contains(days, series.day_index[i])) continue;
    if (series.glucose[i]) sum_sq[kGlucose] += std::pow(*series.glucose[i] - scaler.mean[kGlucose], 2);
    sum_sq[kCho] += std::pow(series.cho[i] - scaler.mean[kCho], 2);
    sum_sq[kInsulin] += std::pow(series.insulin[i] - scaler.mean[kInsulin], 2);
  }
  static constexpr const char* names[] = {"glucose", "cho", "insulin"};
  for (int c = 0; c < kChannels; ++c) {
    scaler.std[c] = std::sqrt(sum_sq[c] / static_cast<double>(count[c]));
    if (!(scaler.std[c] > 0))
      throw DataError(std::string("degenerate scale: channel ") + names[c] + " is constant");
  }
  return scaler;
}

UniformSeries apply_scaler(const UniformSeries& series, const Scaler& scaler) {
  UniformSeries out = series;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out.glucose[i]) out.glucose[i] = scaler.scale(kGlucose, *out.glucose[i]);
    out.cho[i] = scaler.scale(kCho, out.cho[i]);
    out.insulin[i] = scaler.scale(kInsulin, out.insulin[i]);
  }
  return out;
}

std::vector<double> invert_scaler(std::span<const double> values, const Scaler& scaler) {
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = scaler.unscale(kGlucose, values[i]);
  return out;
}

std::vector<SampleWindow> build_windows(const UniformSeries& series, const WindowConfig& config,
                                        const std::vector<std::int64_t>& days) {
  const int H = config.history_steps;
  const int PH = config.horizon_steps;
  if (H < 2 || PH < 2) throw ContractError("window needs history >= 2 and horizon >= 2");
  auto sorted_days = days;
  std::sort(sorted_days.begin(), sorted_days.end());

  // run[i]: length of the contiguous, same-day, glucose-present stretch ending at i.
  const std::size_t n = series.size();
  std::vector<int> run(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!series.glucose[i] || !contains(sorted_days, series.day_index[i])) continue;
    bool continues = i > 0 && run[i - 1] > 0 && series.slot[i] == series.slot[i - 1] + 1 &&
                     series.day_index[i] == series.day_index[i - 1];
    run[i] = continues ? run[i - 1] + 1 : 1;
  }

  std::vector<SampleWindow> out;
  int segment = -1;
  std::optional<std::size_t> last_t;
  for (std::size_t t = 0; t + static_cast<std::size_t>(PH) < n; ++t) {
    std::size_t end = t + static_cast<std::size_t>(PH);
    if (run[end] < H + PH) continue;
    SampleWindow w;
    w.features.resize(H, kChannels);
    for (int r = 0; r < H; ++r) {
      std::size_t i = t + 1 + static_cast<std::size_t>(r) - static_cast<std::size_t>(H);
      w.features(r, kGlucose) = *series.glucose[i];
      w.features(r, kCho) = series.cho[i];
      w.features(r, kInsulin) = series.insulin[i];
    }
    w.target_prev = *series.glucose[end - 1];
    w.target_final = *series.glucose[end];
    w.timestamp = series.time_at(t);
    w.day_index = series.day_index[t];
    bool consecutive = last_t && series.slot[t] == series.slot[*last_t] + 1 &&
                       series.day_index[t] == series.day_index[*last_t];
    if (!consecutive) ++segment;
    w.segment_id = segment;
    last_t = t;
    out.push_back(std::move(w));
  }
  return out;
}

UniformSeries clean_series(const PatientRecord& record, double spike_threshold) {
  auto series = resample_5min(record);
  series = remove_incomplete_days(series);
  series = remove_spikes(series, spike_threshold);
  return pchip_interpolate(series);
}

void export_preprocessed_csv(std::ostream& out, const UniformSeries& series, const DaySplit& split) {
  std::map<std::int64_t, const char*> label;
  for (auto d : split.train) label[d] = "train";
  for (auto d : split.valid) label[d] = "valid";
  for (auto d : split.test) label[d] = "test";
  out << "datetime,glucose,cho,insulin,interpolated,day_index,split\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    out << format_datetime(series.time_at(i)) << ',';
    if (series.glucose[i]) out << format_number(*series.glucose[i]);
    out << ',' << format_number(series.cho[i]) << ',' << format_number(series.insulin[i]) << ','
        << (series.interpolated_mask[i] ? 1 : 0) << ',' << series.day_index[i] << ',';
    if (auto it = label.find(series.day_index[i]); it != label.end()) out << it->second;
    out << '\n';
  }
}

}  // namespace glyco::preprocess
