// SPDX-License-Identifier: Apache-2.0
#include "glyco/data_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "glyco/error.hpp"

namespace glyco {

namespace {

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    auto next = line.find(sep, pos);
    if (next == std::string_view::npos) {
      out.push_back(trim(line.substr(pos)));
      return out;
    }
    out.push_back(trim(line.substr(pos, next - pos)));
    pos = next + 1;
  }
}

}  // namespace

std::optional<TimePoint> parse_datetime(std::string_view text) {
  text = trim(text);
  // YYYY-MM-DDTHH:MM:SS
  if (text.size() != 19 || text[4] != '-' || text[7] != '-' ||
      (text[10] != 'T' && text[10] != ' ') || text[13] != ':' || text[16] != ':')
    return std::nullopt;
  int y, mo, d, h, mi, s;
  if (!parse_int(text.substr(0, 4), y) || !parse_int(text.substr(5, 2), mo) ||
      !parse_int(text.substr(8, 2), d) || !parse_int(text.substr(11, 2), h) ||
      !parse_int(text.substr(14, 2), mi) || !parse_int(text.substr(17, 2), s))
    return std::nullopt;
  using namespace std::chrono;
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59) return std::nullopt;
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{s};
}

std::string format_datetime(TimePoint t) {
  using namespace std::chrono;
  auto day = floor<days>(t);
  year_month_day ymd{day};
  hh_mm_ss hms{t - day};
  char buf[48];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ld", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(hms.hours().count()), static_cast<long>(hms.minutes().count()),
                static_cast<long>(hms.seconds().count()));
  return buf;
}

std::int64_t day_number(TimePoint t) {
  return std::chrono::floor<std::chrono::days>(t).time_since_epoch().count();
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::glucose: return "glucose";
    case EventKind::cho: return "cho";
    case EventKind::insulin: return "insulin";
  }
  return "?";
}

std::optional<EventKind> parse_event_kind(std::string_view text) {
  if (text == "glucose") return EventKind::glucose;
  if (text == "cho") return EventKind::cho;
  if (text == "insulin") return EventKind::insulin;
  return std::nullopt;
}

std::string_view to_string(DiabetesType type) {
  switch (type) {
    case DiabetesType::type1: return "type1";
    case DiabetesType::type2: return "type2";
    case DiabetesType::synthetic: return "synthetic";
  }
  return "?";
}

std::string format_number(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::vector<std::int64_t> UniformSeries::days() const {
  std::vector<std::int64_t> out;
  for (auto d : day_index)
    if (out.empty() || out.back() != d) out.push_back(d);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

UniformSeries UniformSeries::subset_days(const std::vector<std::int64_t>& keep) const {
  UniformSeries out;
  out.start = start;
  out.step_minutes = step_minutes;
  for (std::size_t i = 0; i < size(); ++i) {
    if (!std::binary_search(keep.begin(), keep.end(), day_index[i])) continue;
    out.slot.push_back(slot[i]);
    out.glucose.push_back(glucose[i]);
    out.cho.push_back(cho[i]);
    out.insulin.push_back(insulin[i]);
    out.interpolated_mask.push_back(interpolated_mask[i]);
    out.day_index.push_back(day_index[i]);
  }
  return out;
}

PatientRecord ingest_csv(std::istream& in, std::string patient_id) {
  PatientRecord record;
  record.patient_id = std::move(patient_id);
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    auto view = trim(line);
    if (line_no == 1 && view.size() >= 3 && static_cast<unsigned char>(view[0]) == 0xEF)
      view.remove_prefix(3);  // UTF-8 BOM
    if (view.empty()) continue;
    if (!saw_header) {
      if (view != "datetime,type,value")
        throw ParseError(line_no, "expected header 'datetime,type,value'");
      saw_header = true;
      continue;
    }
    auto fields = split(view, ',');
    if (fields.size() != 3) throw ParseError(line_no, "expected 3 fields");
    auto ts = parse_datetime(fields[0]);
    if (!ts) throw ParseError(line_no, "bad datetime '" + std::string(fields[0]) + "'");
    auto kind = parse_event_kind(fields[1]);
    if (!kind) throw ValidationError(line_no, "unknown type '" + std::string(fields[1]) + "'");
    double value = 0;
    auto [ptr, ec] = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), value);
    if (ec != std::errc{} || ptr != fields[2].data() + fields[2].size() || !std::isfinite(value))
      throw ParseError(line_no, "bad value '" + std::string(fields[2]) + "'");
    record.events.push_back({*ts, *kind, value});
  }
  if (!saw_header || record.events.empty()) throw EmptyInputError("no events in input");
  std::stable_sort(record.events.begin(), record.events.end(),
                   [](const RawEvent& a, const RawEvent& b) { return a.timestamp < b.timestamp; });
  return record;
}

PatientRecord ingest_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return ingest_csv(in, path.stem().string());
}

void export_csv(std::ostream& out, const PatientRecord& record) {
  out << "datetime,type,value\n";
  for (const auto& e : record.events)
    out << format_datetime(e.timestamp) << ',' << to_string(e.kind) << ','
        << format_number(e.value) << '\n';
}

void export_csv(const std::filesystem::path& path, const PatientRecord& record) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  export_csv(out, record);
}

std::vector<Violation> validate(const PatientRecord& record) {
  std::vector<Violation> out;
  bool any_glucose = false;
  for (std::size_t i = 0; i < record.events.size(); ++i) {
    const auto& e = record.events[i];
    if (i > 0 && e.timestamp < record.events[i - 1].timestamp)
      out.push_back({i, "event " + std::to_string(i) + " precedes its predecessor"});
    if (!std::isfinite(e.value)) {
      out.push_back({i, "event " + std::to_string(i) + " has a non-finite value"});
      continue;
    }
    switch (e.kind) {
      case EventKind::glucose:
        any_glucose = true;
        if (e.value <= 0 || e.value > kGlucoseMax)
          out.push_back({i, "event " + std::to_string(i) + ": glucose outside (0, 600] mg/dL"});
        break;
      case EventKind::cho:
      case EventKind::insulin:
        if (e.value < 0)
          out.push_back({i, "event " + std::to_string(i) + ": negative " +
                                std::string(to_string(e.kind))});
        break;
    }
  }
  if (!any_glucose) out.push_back({record.events.size(), "record has no glucose event"});
  return out;
}

}  // namespace glyco
