// SPDX-License-Identifier: Apache-2.0
#include "glyco/render.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "glyco/error.hpp"

namespace glyco::render {

namespace fs = std::filesystem;

namespace {

constexpr const char* kPalette[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

const char* label_color(metrics::Label l) {
  switch (l) {
    case metrics::Label::AP: return "#2ca02c";
    case metrics::Label::BE: return "#ff7f0e";
    case metrics::Label::EP: return "#d62728";
  }
  return "#000000";
}

// Maps data coordinates into a plot rectangle.
struct Frame {
  double x0, y0, w, h;          // pixels, top-left origin
  double xmin, xmax, ymin, ymax;
  double px(double x) const { return x0 + (x - xmin) / (xmax - xmin) * w; }
  double py(double y) const { return y0 + h - (y - ymin) / (ymax - ymin) * h; }
};

void axes(std::ostringstream& o, const Frame& f, double xstep, double ystep, const std::string& xlabel,
          const std::string& ylabel) {
  o << "<rect x=\"" << fmt(f.x0) << "\" y=\"" << fmt(f.y0) << "\" width=\"" << fmt(f.w) << "\" height=\""
    << fmt(f.h) << "\" fill=\"none\" stroke=\"#000\"/>\n";
  for (double x = std::ceil(f.xmin / xstep) * xstep; x <= f.xmax + 1e-9; x += xstep)
    o << "<text x=\"" << fmt(f.px(x)) << "\" y=\"" << fmt(f.y0 + f.h + 14)
      << "\" font-size=\"10\" text-anchor=\"middle\">" << fmt(x) << "</text>\n";
  for (double y = std::ceil(f.ymin / ystep) * ystep; y <= f.ymax + 1e-9; y += ystep)
    o << "<text x=\"" << fmt(f.x0 - 4) << "\" y=\"" << fmt(f.py(y) + 3)
      << "\" font-size=\"10\" text-anchor=\"end\">" << fmt(y) << "</text>\n";
  o << "<text x=\"" << fmt(f.x0 + f.w / 2) << "\" y=\"" << fmt(f.y0 + f.h + 30)
    << "\" font-size=\"11\" text-anchor=\"middle\">" << escape(xlabel) << "</text>\n";
  o << "<text x=\"" << fmt(f.x0 - 40) << "\" y=\"" << fmt(f.y0 + f.h / 2) << "\" font-size=\"11\" transform=\"rotate(-90 "
    << fmt(f.x0 - 40) << ' ' << fmt(f.y0 + f.h / 2) << ")\" text-anchor=\"middle\">" << escape(ylabel) << "</text>\n";
}

void line(std::ostringstream& o, const Frame& f, double xa, double ya, double xb, double yb, const char* color) {
  o << "<line x1=\"" << fmt(f.px(xa)) << "\" y1=\"" << fmt(f.py(ya)) << "\" x2=\"" << fmt(f.px(xb)) << "\" y2=\""
    << fmt(f.py(yb)) << "\" stroke=\"" << color << "\" stroke-dasharray=\"4 3\"/>\n";
}

double minute_of_day(TimePoint t) {
  auto since = t - std::chrono::sys_days{std::chrono::days{day_number(t)}};
  return static_cast<double>(std::chrono::duration_cast<std::chrono::minutes>(since).count());
}

metrics::PredictionTrace read_trace(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotFoundError("cannot read " + path.string());
  return metrics::read_trace_csv(in);
}

void write_file(const fs::path& path, const std::string& text, RenderOutput& out) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << text;
  out.files.push_back(path);
}

}  // namespace

std::string format_table(const std::vector<experiment::SummaryRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back({"model", "smoothing", "n", "RMSE", "dRMSE", "AP %", "BE %", "EP %"});
  auto pm = [](double mean, double sd) { return fmt(mean) + " ± " + fmt(sd); };
  for (const auto& r : rows)
    cells.push_back({r.model, r.smoothing, std::to_string(r.patients), pm(r.rmse_mean, r.rmse_std),
                     pm(r.drmse_mean, r.drmse_std), pm(r.ap_mean, r.ap_std), pm(r.be_mean, r.be_std),
                     pm(r.ep_mean, r.ep_std)});
  // Width in code points, so the ± sign counts once.
  auto width = [](const std::string& s) {
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) { return (c & 0xC0) != 0x80; }));
  };
  std::vector<std::size_t> w(cells.front().size(), 0);
  for (const auto& row : cells)
    for (std::size_t k = 0; k < row.size(); ++k) w[k] = std::max(w[k], width(row[k]));
  std::string out;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t k = 0; k < cells[r].size(); ++k) {
      const auto& s = cells[r][k];
      std::string pad(w[k] - width(s), ' ');
      out += k < 3 ? s + pad : pad + s;  // text left, numbers right
      if (k + 1 < cells[r].size()) out += "  ";
    }
    out += '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (auto x : w) total += x;
      out += std::string(total + 2 * (w.size() - 1), '-') + '\n';
    }
  }
  return out;
}

std::string trace_svg(const std::vector<NamedTrace>& traces, std::int64_t day, const std::string& title) {
  double lo = 40, hi = 400;
  bool any = false;
  for (const auto& t : traces)
    for (const auto& p : t.trace) {
      if (day_number(p.timestamp) != day) continue;
      double a = std::min(p.y_true, p.y_pred), b = std::max(p.y_true, p.y_pred);
      if (!any) lo = a, hi = b, any = true;
      lo = std::min(lo, a);
      hi = std::max(hi, b);
    }
  lo = std::floor(lo / 20) * 20 - 20;
  hi = std::ceil(hi / 20) * 20 + 20;
  const Frame f{60, 40, 820, 280, 0, 1440, lo, hi};

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"960\" height=\"380\" viewBox=\"0 0 960 380\">\n";
  o << "<rect width=\"960\" height=\"380\" fill=\"#fff\"/>\n";
  o << "<text x=\"480\" y=\"22\" font-size=\"14\" text-anchor=\"middle\">" << escape(title) << "</text>\n";
  axes(o, f, 120, 40, "minute of day", "glucose (mg/dL)");

  auto polylines = [&](const metrics::PredictionTrace& trace, bool truth, const char* color, const std::string& cls) {
    std::string pts;
    const metrics::TracePoint* prev = nullptr;
    auto flush = [&] {
      if (!pts.empty())
        o << "<polyline class=\"" << cls << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\""
          << (truth ? "2" : "1.2") << "\" points=\"" << pts << "\"/>\n";
      pts.clear();
    };
    for (const auto& p : trace) {
      if (day_number(p.timestamp) != day) continue;
      if (prev && (prev->segment_id != p.segment_id ||
                   p.timestamp - prev->timestamp != std::chrono::minutes(kStepMinutes)))
        flush();
      if (!pts.empty()) pts += ' ';
      pts += fmt(f.px(minute_of_day(p.timestamp))) + ',' + fmt(f.py(truth ? p.y_true : p.y_pred));
      prev = &p;
    }
    flush();
  };
  if (!traces.empty()) polylines(traces.front().trace, true, "#000000", "truth");
  for (std::size_t k = 0; k < traces.size(); ++k)
    polylines(traces[k].trace, false, kPalette[k % std::size(kPalette)], "pred");

  // Legend.
  double ly = 40;
  o << "<text x=\"890\" y=\"" << fmt(ly) << "\" font-size=\"10\" fill=\"#000000\">reference</text>\n";
  for (std::size_t k = 0; k < traces.size(); ++k) {
    ly += 14;
    o << "<text x=\"890\" y=\"" << fmt(ly) << "\" font-size=\"10\" fill=\"" << kPalette[k % std::size(kPalette)]
      << "\">" << escape(traces[k].name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string ega_svg(const std::vector<metrics::ScoredPoint>& points, const std::string& title) {
  const Frame pf{70, 50, 380, 380, 0, 400, 0, 400};
  const Frame rf{570, 50, 380, 380, -5, 5, -5, 5};
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"1000\" height=\"480\" viewBox=\"0 0 1000 480\">\n";
  o << "<rect width=\"1000\" height=\"480\" fill=\"#fff\"/>\n";
  o << "<text x=\"500\" y=\"22\" font-size=\"14\" text-anchor=\"middle\">" << escape(title) << "</text>\n";
  axes(o, pf, 50, 50, "reference glucose (mg/dL)", "predicted glucose (mg/dL)");
  axes(o, rf, 1, 1, "reference rate (mg/dL/min)", "predicted rate (mg/dL/min)");
  line(o, pf, 0, 0, 400, 400, "#888888");
  line(o, pf, 0, 0, 400, 320, "#888888");
  line(o, pf, 0, 0, 1000.0 / 3.0, 400, "#888888");
  line(o, pf, 70, 0, 70, 400, "#cccccc");
  line(o, pf, 180, 0, 180, 400, "#cccccc");
  line(o, rf, -5, -5, 5, 5, "#888888");
  line(o, rf, -5, -4, 4, 5, "#888888");
  line(o, rf, -4, -5, 5, 4, "#888888");

  auto clamp = [](double v, double a, double b) { return std::min(std::max(v, a), b); };
  o << "<g class=\"p-ega\">\n";
  for (const auto& s : points)
    o << "<circle class=\"" << metrics::to_string(s.label) << "\" cx=\"" << fmt(pf.px(clamp(s.y_true, 0, 400)))
      << "\" cy=\"" << fmt(pf.py(clamp(s.y_pred, 0, 400))) << "\" r=\"2\" fill=\"" << label_color(s.label)
      << "\"/>\n";
  o << "</g>\n<g class=\"r-ega\">\n";
  for (const auto& s : points)
    o << "<circle class=\"" << metrics::to_string(s.label) << "\" cx=\"" << fmt(rf.px(clamp(s.true_rate, -5, 5)))
      << "\" cy=\"" << fmt(rf.py(clamp(s.pred_rate, -5, 5))) << "\" r=\"2\" fill=\"" << label_color(s.label)
      << "\"/>\n";
  o << "</g>\n";
  double ly = 470;
  double lx = 380;
  for (auto l : {metrics::Label::AP, metrics::Label::BE, metrics::Label::EP}) {
    o << "<text x=\"" << fmt(lx) << "\" y=\"" << fmt(ly) << "\" font-size=\"11\" fill=\"" << label_color(l) << "\">"
      << metrics::to_string(l) << "</text>\n";
    lx += 40;
  }
  o << "</svg>\n";
  return o.str();
}

RenderOutput report_render(const fs::path& dir) {
  const fs::path report_path = dir / "report.csv";
  const fs::path traces_dir = dir / "traces";
  if (!fs::is_regular_file(report_path)) throw FileNotFoundError("missing " + report_path.string());
  if (!fs::is_directory(traces_dir)) throw FileNotFoundError("missing " + traces_dir.string());

  RenderOutput out;
  std::ifstream in(report_path, std::ios::binary);
  auto rows = experiment::read_report_csv(in);
  out.table = format_table(experiment::summarize(rows));
  write_file(dir / "summary.txt", out.table, out);

  // Traces are named <patient>__<model>__<raw|smoothed>.csv.
  struct TraceFile {
    std::string patient, model, tag;
    fs::path path;
  };
  std::vector<TraceFile> files;
  for (const auto& entry : fs::directory_iterator(traces_dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
    const std::string stem = entry.path().stem().string();
    auto b = stem.rfind("__");
    if (b == std::string::npos || b == 0) continue;
    auto a = stem.rfind("__", b - 1);
    if (a == std::string::npos) continue;
    files.push_back({stem.substr(0, a), stem.substr(a + 2, b - a - 2), stem.substr(b + 2), entry.path()});
  }
  std::sort(files.begin(), files.end(), [](const TraceFile& x, const TraceFile& y) { return x.path < y.path; });

  // Model order follows report.csv.
  std::vector<std::string> model_order;
  for (const auto& r : rows)
    if (std::find(model_order.begin(), model_order.end(), r.model) == model_order.end())
      model_order.push_back(r.model);
  auto rank = [&](const std::string& m) {
    auto it = std::find(model_order.begin(), model_order.end(), m);
    return static_cast<std::size_t>(it - model_order.begin());
  };

  const fs::path fig = dir / "figures";
  fs::create_directories(fig);
  std::map<std::string, std::vector<const TraceFile*>> raw_by_patient;
  for (const auto& t : files)
    if (t.tag == "raw") raw_by_patient[t.patient].push_back(&t);

  for (auto& [patient, list] : raw_by_patient) {
    std::stable_sort(list.begin(), list.end(), [&](const TraceFile* x, const TraceFile* y) {
      return rank(x->model) < rank(y->model);
    });
    std::vector<NamedTrace> traces;
    std::set<std::int64_t> days;
    for (const auto* t : list) {
      traces.push_back({t->model, read_trace(t->path)});
      for (const auto& p : traces.back().trace) days.insert(day_number(p.timestamp));
    }
    for (auto day : days) {
      const std::string name = patient + "__day" + std::to_string(day);
      const std::string title = patient + ", " + format_datetime(TimePoint{std::chrono::sys_days{std::chrono::days{day}}}).substr(0, 10);
      write_file(fig / (name + ".svg"), trace_svg(traces, day, title), out);
    }
  }
  for (const auto& t : files) {
    auto points = metrics::cg_ega_points(read_trace(t.path));
    write_file(fig / (t.patient + "__" + t.model + "__" + t.tag + "__ega.svg"),
               ega_svg(points, t.patient + " " + t.model + " (" + t.tag + ")"), out);
  }
  return out;
}

}  // namespace glyco::render
