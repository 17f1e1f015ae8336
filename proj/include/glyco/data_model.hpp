// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace glyco {

/// Timezone-naive wall-clock time in the patient's local clock.
using TimePoint = std::chrono::sys_seconds;

inline constexpr int kStepMinutes = 5;
inline constexpr int kSlotsPerDay = 24 * 60 / kStepMinutes;
inline constexpr double kGlucoseMax = 600.0;

/// Parses `YYYY-MM-DDTHH:MM:SS` (a space separator is also accepted).
std::optional<TimePoint> parse_datetime(std::string_view text);
std::string format_datetime(TimePoint t);

/// Days since 1970-01-01 of the local calendar date containing `t`.
std::int64_t day_number(TimePoint t);

enum class EventKind { glucose, cho, insulin };
enum class DiabetesType { type1, type2, synthetic };

std::string_view to_string(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view text);
std::string_view to_string(DiabetesType type);

struct RawEvent {
  TimePoint timestamp;
  EventKind kind;
  double value;  // mg/dL, grams or units depending on kind

  friend bool operator==(const RawEvent&, const RawEvent&) = default;
};

struct PatientRecord {
  std::string patient_id;
  DiabetesType diabetes_type = DiabetesType::type1;
  std::vector<RawEvent> events;  // non-decreasing timestamps
  std::vector<std::string> warnings;
};

/// 5-minute aligned multichannel series.
///
/// `slot` holds each sample's offset (in steps) from `start`; it is strictly
/// increasing and has holes once days are removed. `day_index` is the
/// calendar day number of the sample and survives day removal unchanged.
struct UniformSeries {
  TimePoint start{};
  int step_minutes = kStepMinutes;
  std::vector<std::int64_t> slot;
  std::vector<std::optional<double>> glucose;
  std::vector<double> cho;
  std::vector<double> insulin;
  std::vector<bool> interpolated_mask;
  std::vector<std::int64_t> day_index;

  std::size_t size() const noexcept { return slot.size(); }
  bool empty() const noexcept { return slot.empty(); }
  TimePoint time_at(std::size_t i) const {
    return start + std::chrono::minutes(step_minutes * slot[i]);
  }
  /// Distinct day indices in ascending order.
  std::vector<std::int64_t> days() const;
  /// Copy holding only samples whose day is in `keep` (sorted ascending).
  UniformSeries subset_days(const std::vector<std::int64_t>& keep) const;
};

/// Reads the raw `datetime,type,value` CSV.
PatientRecord ingest_csv(std::istream& in, std::string patient_id = {});
PatientRecord ingest_csv(const std::filesystem::path& path);

void export_csv(std::ostream& out, const PatientRecord& record);
void export_csv(const std::filesystem::path& path, const PatientRecord& record);

struct Violation {
  std::size_t event_index;  // == events.size() for record-level problems
  std::string message;
};

/// Checks every event and record invariant; never throws.
std::vector<Violation> validate(const PatientRecord& record);

/// Shortest round-trip decimal representation.
std::string format_number(double value);

}  // namespace glyco
