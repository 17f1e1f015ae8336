// SPDX-License-Identifier: Apache-2.0
#include "glyco/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "glyco/error.hpp"
#include "json.hpp"

namespace glyco::experiment {

namespace fs = std::filesystem;
using nlohmann::json;
using models::ModelKind;

namespace {

void reject_unknown(const json& obj, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : obj.items())
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(where + ": unknown key '" + key + "'");
}

template <class T>
T get_as(const json& value, const std::string& where) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!value.is_boolean()) throw ConfigError(where + ": expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!value.is_number_integer()) throw ConfigError(where + ": expected an integer");
      if constexpr (std::is_unsigned_v<T>)
        if (value.is_number_integer() && !value.is_number_unsigned() && value.get<std::int64_t>() < 0)
          throw ConfigError(where + ": expected a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!value.is_number()) throw ConfigError(where + ": expected a number");
    } else {
      if (!value.is_string()) throw ConfigError(where + ": expected a string");
    }
    return value.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

template <class T>
void read_opt(const json& obj, const char* key, T& out, const std::string& where) {
  if (auto it = obj.find(key); it != obj.end()) out = get_as<T>(*it, where + "." + key);
}

SyntheticSource parse_synthetic(const json& j) {
  const std::string w = "data.synthetic";
  reject_unknown(j,
                 {"patients", "cohort_seed", "days", "meals_min", "meals_max", "cho_min", "cho_max",
                  "bolus_units_per_10g", "bolus_error", "baseline", "circadian_amplitude",
                  "circadian_peak_hour", "meal_peak_minutes", "meal_width_minutes", "insulin_peak_minutes",
                  "insulin_width_minutes", "cho_gain", "insulin_gain", "noise_std", "noise_correlation",
                  "missing_rate", "outage_day_rate", "start"},
                 w);
  SyntheticSource s;
  auto& b = s.base;
  read_opt(j, "patients", s.patients, w);
  if (auto it = j.find("cohort_seed"); it != j.end()) s.cohort_seed = get_as<std::uint64_t>(*it, w + ".cohort_seed");
  read_opt(j, "days", b.days, w);
  read_opt(j, "meals_min", b.meals_min, w);
  read_opt(j, "meals_max", b.meals_max, w);
  read_opt(j, "cho_min", b.cho_min, w);
  read_opt(j, "cho_max", b.cho_max, w);
  read_opt(j, "bolus_units_per_10g", b.bolus_units_per_10g, w);
  read_opt(j, "bolus_error", b.bolus_error, w);
  read_opt(j, "baseline", b.baseline, w);
  read_opt(j, "circadian_amplitude", b.circadian_amplitude, w);
  read_opt(j, "circadian_peak_hour", b.circadian_peak_hour, w);
  read_opt(j, "meal_peak_minutes", b.meal_peak_minutes, w);
  read_opt(j, "meal_width_minutes", b.meal_width_minutes, w);
  read_opt(j, "insulin_peak_minutes", b.insulin_peak_minutes, w);
  read_opt(j, "insulin_width_minutes", b.insulin_width_minutes, w);
  read_opt(j, "cho_gain", b.cho_gain, w);
  read_opt(j, "insulin_gain", b.insulin_gain, w);
  read_opt(j, "noise_std", b.noise_std, w);
  read_opt(j, "noise_correlation", b.noise_correlation, w);
  read_opt(j, "missing_rate", b.missing_rate, w);
  read_opt(j, "outage_day_rate", b.outage_day_rate, w);
  if (auto it = j.find("start"); it != j.end()) {
    auto t = parse_datetime(get_as<std::string>(*it, w + ".start"));
    if (!t) throw ConfigError(w + ".start: bad datetime");
    b.start = *t;
  }
  if (s.patients < 1) throw ConfigError(w + ".patients must be >= 1");
  synth::check(b);
  return s;
}

// A grid parameter: how to apply one value to a cell.
struct GridParam {
  std::string_view key;
  std::function<void(Hyperparameters&, const json&, const std::string&)> apply;
};

template <class T, class F>
GridParam param(std::string_view key, F field) {
  return {key, [field](Hyperparameters& h, const json& v, const std::string& where) {
            field(h) = get_as<T>(v, where);
          }};
}

std::vector<GridParam> grid_params(ModelKind kind) {
  switch (kind) {
    case ModelKind::naive: return {};
    case ModelKind::elm:
      return {param<int>("hidden_neurons", [](Hyperparameters& h) -> int& { return h.elm.hidden_neurons; }),
              param<double>("l2", [](Hyperparameters& h) -> double& { return h.elm.l2; })};
    case ModelKind::gp:
      return {param<double>("sigma0_sq", [](Hyperparameters& h) -> double& { return h.gp.sigma0_sq; }),
              param<double>("noise", [](Hyperparameters& h) -> double& { return h.gp.noise; })};
    case ModelKind::svr:
      return {param<double>("gamma", [](Hyperparameters& h) -> double& { return h.svr.gamma; }),
              param<double>("epsilon", [](Hyperparameters& h) -> double& { return h.svr.epsilon; }),
              param<double>("c", [](Hyperparameters& h) -> double& { return h.svr.c; }),
              param<double>("tolerance", [](Hyperparameters& h) -> double& { return h.svr.tolerance; }),
              param<std::int64_t>("max_iterations",
                                  [](Hyperparameters& h) -> std::int64_t& { return h.svr.max_iterations; })};
    case ModelKind::lstm:
    case ModelKind::pclstm: {
      std::vector<GridParam> p = {
          param<int>("units", [](Hyperparameters& h) -> int& { return h.lstm.units; }),
          param<double>("learning_rate", [](Hyperparameters& h) -> double& { return h.lstm.train.learning_rate; }),
          param<int>("batch_size", [](Hyperparameters& h) -> int& { return h.lstm.train.batch_size; }),
          param<double>("l2", [](Hyperparameters& h) -> double& { return h.lstm.train.l2_penalty; }),
          param<int>("max_epochs", [](Hyperparameters& h) -> int& { return h.lstm.train.max_epochs; }),
          param<int>("patience", [](Hyperparameters& h) -> int& { return h.lstm.train.patience; }),
          param<double>("clip_norm", [](Hyperparameters& h) -> double& { return h.lstm.train.clip_norm; }),
          param<bool>("accuracy_on_both",
                      [](Hyperparameters& h) -> bool& { return h.lstm.train.accuracy_on_both; })};
      if (kind == ModelKind::pclstm)
        p.push_back(param<double>("coherence", [](Hyperparameters& h) -> double& { return h.lstm.train.coherence; }));
      return p;
    }
  }
  return {};
}

std::string value_label(const json& v) {
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number()) return format_number(v.get<double>());
  return v.dump();
}

ModelSpec parse_model(const json& j, std::size_t index) {
  const std::string w = "models[" + std::to_string(index) + "]";
  reject_unknown(j, {"kind", "name", "grid", "train_stride"}, w);
  if (!j.contains("kind")) throw ConfigError(w + ": missing 'kind'");
  auto kind = models::parse_model_kind(get_as<std::string>(j.at("kind"), w + ".kind"));
  if (!kind) throw ConfigError(w + ".kind: unknown model kind");
  ModelSpec spec;
  spec.kind = *kind;
  spec.name = std::string(models::to_string(*kind));
  read_opt(j, "name", spec.name, w);
  read_opt(j, "train_stride", spec.train_stride, w);
  if (spec.train_stride < 1) throw ConfigError(w + ".train_stride must be >= 1");
  if (spec.name.empty()) throw ConfigError(w + ".name must not be empty");

  Hyperparameters defaults;
  if (*kind == ModelKind::pclstm) defaults.lstm.train.coherence = models::kDefaultCoherence;

  // Cartesian product in the order of the parameter table.
  std::vector<GridCell> cells = {{"", defaults}};
  if (auto it = j.find("grid"); it != j.end()) {
    const auto params = grid_params(*kind);
    if (!it->is_object()) throw ConfigError(w + ".grid: expected an object");
    for (const auto& [key, _] : it->items())
      if (std::none_of(params.begin(), params.end(), [&](const GridParam& p) { return p.key == key; }))
        throw ConfigError(w + ".grid: unknown parameter '" + key + "' for " + spec.name);
    for (const auto& p : params) {
      auto v = it->find(std::string(p.key));
      if (v == it->end()) continue;
      const std::string where = w + ".grid." + std::string(p.key);
      json values = v->is_array() ? *v : json::array({*v});
      if (values.empty()) throw ConfigError(where + ": empty grid");
      std::vector<GridCell> next;
      for (const auto& cell : cells)
        for (const auto& value : values) {
          GridCell c = cell;
          p.apply(c.params, value, where);
          if (!c.label.empty()) c.label += ';';
          c.label += std::string(p.key) + "=" + value_label(value);
          next.push_back(std::move(c));
        }
      cells = std::move(next);
    }
  }
  for (auto& c : cells) {
    if (c.label.empty()) c.label = "default";
    const auto& t = c.params.lstm.train;
    if (c.params.lstm.units < 1 || t.batch_size < 1 || t.max_epochs < 0 || t.patience < 0 || !(t.learning_rate > 0) ||
        t.l2_penalty < 0 || t.coherence < 0)
      throw ConfigError(w + ": invalid LSTM hyperparameters in cell " + c.label);
    if (c.params.elm.hidden_neurons < 1 || c.params.elm.l2 < 0)
      throw ConfigError(w + ": invalid ELM hyperparameters in cell " + c.label);
    if (c.params.gp.noise < 0 || c.params.gp.sigma0_sq < 0)
      throw ConfigError(w + ": invalid GP hyperparameters in cell " + c.label);
    if (!(c.params.svr.gamma > 0) || c.params.svr.epsilon < 0 || !(c.params.svr.c > 0) ||
        !(c.params.svr.tolerance > 0) || c.params.svr.max_iterations < 1)
      throw ConfigError(w + ": invalid SVR hyperparameters in cell " + c.label);
  }
  spec.cells = std::move(cells);
  return spec;
}

std::string file_token(std::string_view s) {
  std::string out(s);
  for (char& ch : out)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_' || ch == '.')) ch = '_';
  return out;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

double objective_of(const models::Predictor& model, const ModelSpec& spec, const GridCell& cell,
                    const PreparedPatient& patient, const preprocess::WindowConfig& window) {
  if (spec.kind == ModelKind::pclstm) {
    const auto& lstm = static_cast<const models::LstmPredictor&>(model);
    return nnet::evaluate_loss(lstm.params(), models::to_sequences(patient.valid), cell.params.lstm.train.coherence,
                               cell.params.lstm.train.accuracy_on_both);
  }
  return metrics::rmse(models::predict_trace(model, patient.valid, patient.scaler, window));
}

double parse_double(std::string_view s, std::size_t line) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw ParseError(line, "bad number '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  while (true) {
    auto comma = line.find(',');
    out.push_back(line.substr(0, comma));
    if (comma == std::string_view::npos) break;
    line.remove_prefix(comma + 1);
  }
  return out;
}

constexpr std::string_view kReportHeader =
    "patient,model,smoothing,cell,rmse,drmse,drmse_per_min,ap,be,ep,"
    "hypo_ap,hypo_be,hypo_ep,eu_ap,eu_be,eu_ep,hyper_ap,hyper_be,hyper_ep";

struct PatientOutcome {
  std::vector<ReportRow> rows;
  std::vector<std::string> grid_lines;
  std::optional<std::string> failure;
};

}  // namespace

ExperimentConfig parse_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(j, {"data", "window", "preprocess", "models", "smoothing", "output_dir", "seed"}, "config");
  ExperimentConfig c;
  read_opt(j, "seed", c.seed, "config");
  if (auto it = j.find("output_dir"); it != j.end()) c.output_dir = get_as<std::string>(*it, "config.output_dir");

  if (!j.contains("data")) throw ConfigError("config: missing 'data'");
  const auto& data = j.at("data");
  reject_unknown(data, {"synthetic", "csv_dir"}, "data");
  if (data.contains("synthetic") == data.contains("csv_dir"))
    throw ConfigError("data: exactly one of 'synthetic' and 'csv_dir' is required");
  if (data.contains("synthetic")) c.synthetic = parse_synthetic(data.at("synthetic"));
  else c.csv_dir = fs::path(get_as<std::string>(data.at("csv_dir"), "data.csv_dir"));

  if (auto it = j.find("window"); it != j.end()) {
    reject_unknown(*it, {"history", "horizon"}, "window");
    read_opt(*it, "history", c.window.history_steps, "window");
    read_opt(*it, "horizon", c.window.horizon_steps, "window");
    if (c.window.history_steps < 1 || c.window.horizon_steps < 1)
      throw ConfigError("window: history and horizon must be >= 1");
  }
  if (auto it = j.find("preprocess"); it != j.end()) {
    reject_unknown(*it, {"spike_threshold"}, "preprocess");
    read_opt(*it, "spike_threshold", c.spike_threshold, "preprocess");
    if (!(c.spike_threshold > 0)) throw ConfigError("preprocess.spike_threshold must be > 0");
  }
  if (auto it = j.find("smoothing"); it != j.end()) {
    reject_unknown(*it, {"enabled", "mode", "window", "alpha"}, "smoothing");
    read_opt(*it, "enabled", c.smoothing, "smoothing");
    read_opt(*it, "window", c.smoothing_config.window, "smoothing");
    read_opt(*it, "alpha", c.smoothing_config.alpha, "smoothing");
    if (auto m = it->find("mode"); m != it->end()) {
      auto mode = get_as<std::string>(*m, "smoothing.mode");
      if (mode == "moving_average") c.smoothing_config.mode = postprocess::SmoothingMode::moving_average;
      else if (mode == "exponential") c.smoothing_config.mode = postprocess::SmoothingMode::exponential;
      else throw ConfigError("smoothing.mode: expected moving_average or exponential");
    }
    if (c.smoothing_config.window < 1) throw ConfigError("smoothing.window must be >= 1");
    if (!(c.smoothing_config.alpha > 0 && c.smoothing_config.alpha <= 1))
      throw ConfigError("smoothing.alpha must be in (0, 1]");
  }

  if (!j.contains("models")) throw ConfigError("config: missing 'models'");
  const auto& ms = j.at("models");
  if (!ms.is_array() || ms.empty()) throw ConfigError("models: expected a non-empty array");
  for (std::size_t i = 0; i < ms.size(); ++i) c.models.push_back(parse_model(ms[i], i));
  for (std::size_t i = 0; i < c.models.size(); ++i)
    for (std::size_t k = 0; k < i; ++k)
      if (file_token(c.models[i].name) == file_token(c.models[k].name))
        throw ConfigError("models: duplicate name '" + c.models[i].name + "'");
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::vector<PatientRecord> load_patients(const ExperimentConfig& config) {
  if (config.synthetic) {
    const auto& s = *config.synthetic;
    return synth::generate_cohort(s.patients, s.base, s.cohort_seed.value_or(config.seed));
  }
  if (!config.csv_dir) throw ConfigError("no data source");
  if (!fs::is_directory(*config.csv_dir)) throw Error("not a directory: " + config.csv_dir->string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(*config.csv_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw EmptyInputError("no .csv files in " + config.csv_dir->string());
  std::vector<PatientRecord> out;
  for (const auto& f : files) out.push_back(ingest_csv(f));
  return out;
}

PreparedPatient prepare_patient(const PatientRecord& record, const ExperimentConfig& config) {
  PreparedPatient p;
  p.id = record.patient_id;
  p.series = preprocess::clean_series(record, config.spike_threshold);
  p.split = preprocess::split_days(p.series);
  p.scaler = preprocess::fit_scaler(p.series, p.split.train);
  auto scaled = preprocess::apply_scaler(p.series, p.scaler);
  p.train = preprocess::build_windows(scaled, config.window, p.split.train);
  p.valid = preprocess::build_windows(scaled, config.window, p.split.valid);
  p.test = preprocess::build_windows(scaled, config.window, p.split.test);
  if (p.train.empty() || p.valid.empty() || p.test.empty())
    throw DataError("patient " + p.id + ": a split has no complete window");
  return p;
}

std::unique_ptr<models::Predictor> make_model(ModelKind kind, const Hyperparameters& params) {
  switch (kind) {
    case ModelKind::naive: return std::make_unique<models::LastValue>();
    case ModelKind::elm: return std::make_unique<models::Elm>(params.elm);
    case ModelKind::gp: return std::make_unique<models::GaussianProcess>(params.gp);
    case ModelKind::svr: return std::make_unique<models::Svr>(params.svr);
    case ModelKind::lstm: return models::make_lstm(params.lstm);
    case ModelKind::pclstm: return models::make_pclstm(params.lstm, params.lstm.train.coherence);
  }
  throw ContractError("unknown model kind");
}

FittedModel grid_search(const ModelSpec& spec, const PreparedPatient& patient, std::uint64_t seed) {
  if (spec.cells.empty()) throw ContractError("grid_search: empty grid");
  std::vector<preprocess::SampleWindow> train;
  for (std::size_t i = 0; i < patient.train.size(); i += static_cast<std::size_t>(spec.train_stride))
    train.push_back(patient.train[i]);
  const preprocess::WindowConfig window{};  // only shifts timestamps, which RMSE ignores

  FittedModel best;
  double best_objective = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < spec.cells.size(); ++k) {
    const auto& cell = spec.cells[k];
    Hyperparameters params = cell.params;
    params.elm.seed = seed;
    params.lstm.train.seed = seed;
    auto model = make_model(spec.kind, params);
    model->fit(train, patient.valid);
    double objective = objective_of(*model, spec, cell, patient, window);
    best.scores.push_back({cell.label, objective});
    if (!best.model || objective < best_objective) {
      best_objective = objective;
      best.model = std::move(model);
      best.selected = k;
    }
  }
  return best;
}

Evaluation evaluate(const models::Predictor& model, const PreparedPatient& patient, const ExperimentConfig& config) {
  Evaluation e;
  e.raw = models::predict_trace(model, patient.test, patient.scaler, config.window);
  e.smoothed = postprocess::smooth(e.raw, config.smoothing_config);
  e.raw_report = metrics::cg_ega_report(e.raw);
  e.smoothed_report = metrics::cg_ega_report(e.smoothed);
  return e;
}

ExperimentResult run_experiment(const ExperimentConfig& config, Stage stage, int jobs, std::ostream* log) {
  const auto patients = load_patients(config);
  const fs::path out_dir = config.output_dir;
  for (const char* sub : {"traces", "ega", "models"}) fs::create_directories(out_dir / sub);

  std::mutex log_mutex;
  auto say = [&](const std::string& line) {
    if (!log) return;
    std::lock_guard lock(log_mutex);
    *log << line << '\n' << std::flush;
  };

  std::vector<PatientOutcome> outcomes(patients.size());
  auto run_patient = [&](std::size_t index) {
    const auto& record = patients[index];
    auto& outcome = outcomes[index];
    try {
      auto patient = prepare_patient(record, config);
      const std::string pid = file_token(patient.id);
      for (const auto& spec : config.models) {
        const std::string stem = pid + "__" + file_token(spec.name);
        const fs::path model_path = out_dir / "models" / (stem + ".bin");
        const fs::path cell_path = out_dir / "models" / (stem + ".cell");
        std::unique_ptr<models::Predictor> model;
        std::string cell;
        if (stage == Stage::evaluate) {
          model = models::load_model(model_path);
          if (model->kind() != spec.kind) throw Error(model_path.string() + " holds a different model kind");
          std::ifstream in(cell_path);
          if (!in || !std::getline(in, cell)) throw Error("cannot read " + cell_path.string());
        } else {
          auto fitted = grid_search(spec, patient, config.seed);
          cell = spec.cells[fitted.selected].label;
          for (std::size_t k = 0; k < fitted.scores.size(); ++k)
            outcome.grid_lines.push_back(record.patient_id + ',' + spec.name + ',' + fitted.scores[k].label + ',' +
                                         format_number(fitted.scores[k].objective) + ',' +
                                         (k == fitted.selected ? "1" : "0"));
          models::save_model(model_path, *fitted.model);
          open_out(cell_path) << cell << '\n';
          model = std::move(fitted.model);
        }
        say(patient.id + " " + spec.name + ": fitted (" + cell + ")");
        if (stage == Stage::train) continue;

        auto eval = evaluate(*model, patient, config);
        auto write_pair = [&](const metrics::PredictionTrace& trace, const char* tag) {
          auto t = open_out(out_dir / "traces" / (stem + "__" + tag + ".csv"));
          metrics::write_trace_csv(t, trace);
          auto e = open_out(out_dir / "ega" / (stem + "__" + tag + ".csv"));
          metrics::write_ega_csv(e, metrics::cg_ega_points(trace));
        };
        write_pair(eval.raw, "raw");
        outcome.rows.push_back({record.patient_id, spec.name, "raw", cell, eval.raw_report});
        if (config.smoothing) {
          write_pair(eval.smoothed, "smoothed");
          outcome.rows.push_back({record.patient_id, spec.name, "smoothed", cell, eval.smoothed_report});
        }
      }
    } catch (const std::exception& e) {
      outcome.rows.clear();
      outcome.grid_lines.clear();
      outcome.failure = e.what();
      say(record.patient_id + ": failed: " + e.what());
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), 1, patients.size());
  if (workers == 1) {
    for (std::size_t i = 0; i < patients.size(); ++i) run_patient(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < patients.size();) run_patient(i);
      });
  }

  // Merge in patient order, single-threaded.
  ExperimentResult result;
  result.patients = patients.size();
  std::vector<std::string> grid_lines;
  for (std::size_t i = 0; i < patients.size(); ++i) {
    auto& o = outcomes[i];
    if (o.failure) result.failures.push_back({patients[i].patient_id, *o.failure});
    for (auto& r : o.rows) result.rows.push_back(std::move(r));
    for (auto& g : o.grid_lines) grid_lines.push_back(std::move(g));
  }
  if (stage != Stage::evaluate) {
    auto g = open_out(out_dir / "grid.csv");
    g << "patient,model,cell,objective,selected\n";
    for (const auto& line : grid_lines) g << line << '\n';
  }
  {
    auto f = open_out(out_dir / "failures.csv");
    f << "patient,reason\n";
    for (const auto& fail : result.failures) {
      std::string reason = fail.reason;
      std::replace(reason.begin(), reason.end(), ',', ';');
      std::replace(reason.begin(), reason.end(), '\n', ' ');
      f << fail.patient << ',' << reason << '\n';
    }
  }
  if (stage != Stage::train) {
    auto r = open_out(out_dir / "report.csv");
    write_report_csv(r, result.rows);
    auto s = open_out(out_dir / "summary.csv");
    write_summary_csv(s, summarize(result.rows));
  }
  return result;
}

void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows) {
  out << kReportHeader << '\n';
  for (const auto& row : rows) {
    const auto& r = row.report;
    out << row.patient << ',' << row.model << ',' << row.smoothing << ',' << row.cell << ',' << format_number(r.rmse)
        << ',' << format_number(r.drmse) << ',' << format_number(r.drmse_per_minute) << ','
        << format_number(r.overall.ap) << ',' << format_number(r.overall.be) << ',' << format_number(r.overall.ep);
    for (const auto& g : r.regions)
      out << ',' << format_number(g.ap) << ',' << format_number(g.be) << ',' << format_number(g.ep);
    out << '\n';
  }
}

std::vector<ReportRow> read_report_csv(std::istream& in) {
  std::vector<ReportRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != kReportHeader) throw ParseError(line_no, "bad report header");
      continue;
    }
    if (line.empty()) continue;
    auto f = split_fields(line);
    if (f.size() != 19) throw ParseError(line_no, "expected 19 fields");
    ReportRow row;
    row.patient = f[0];
    row.model = f[1];
    row.smoothing = f[2];
    row.cell = f[3];
    auto& r = row.report;
    r.rmse = parse_double(f[4], line_no);
    r.drmse = parse_double(f[5], line_no);
    r.drmse_per_minute = parse_double(f[6], line_no);
    r.overall.ap = parse_double(f[7], line_no);
    r.overall.be = parse_double(f[8], line_no);
    r.overall.ep = parse_double(f[9], line_no);
    for (std::size_t g = 0; g < 3; ++g) {
      r.regions[g].ap = parse_double(f[10 + 3 * g], line_no);
      r.regions[g].be = parse_double(f[11 + 3 * g], line_no);
      r.regions[g].ep = parse_double(f[12 + 3 * g], line_no);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<SummaryRow> summarize(const std::vector<ReportRow>& rows) {
  std::vector<std::pair<std::string, std::string>> keys;
  std::map<std::pair<std::string, std::string>, std::vector<const ReportRow*>> groups;
  for (const auto& r : rows) {
    auto key = std::make_pair(r.model, r.smoothing);
    if (!groups.contains(key)) keys.push_back(key);
    groups[key].push_back(&r);
  }
  auto stats = [](const std::vector<const ReportRow*>& g, auto field) {
    double mean = 0;
    for (const auto* r : g) mean += field(*r);
    mean /= static_cast<double>(g.size());
    double ss = 0;
    for (const auto* r : g) ss += (field(*r) - mean) * (field(*r) - mean);
    double sd = g.size() > 1 ? std::sqrt(ss / static_cast<double>(g.size() - 1)) : 0.0;
    return std::make_pair(mean, sd);
  };
  std::vector<SummaryRow> out;
  for (const auto& key : keys) {
    const auto& g = groups[key];
    SummaryRow s;
    s.model = key.first;
    s.smoothing = key.second;
    s.patients = g.size();
    std::tie(s.rmse_mean, s.rmse_std) = stats(g, [](const ReportRow& r) { return r.report.rmse; });
    std::tie(s.drmse_mean, s.drmse_std) = stats(g, [](const ReportRow& r) { return r.report.drmse; });
    std::tie(s.ap_mean, s.ap_std) = stats(g, [](const ReportRow& r) { return r.report.overall.ap; });
    std::tie(s.be_mean, s.be_std) = stats(g, [](const ReportRow& r) { return r.report.overall.be; });
    std::tie(s.ep_mean, s.ep_std) = stats(g, [](const ReportRow& r) { return r.report.overall.ep; });
    out.push_back(s);
  }
  return out;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "model,smoothing,patients,rmse_mean,rmse_std,drmse_mean,drmse_std,ap_mean,ap_std,be_mean,be_std,ep_mean,"
         "ep_std\n";
  for (const auto& s : rows)
    out << s.model << ',' << s.smoothing << ',' << s.patients << ',' << format_number(s.rmse_mean) << ','
        << format_number(s.rmse_std) << ',' << format_number(s.drmse_mean) << ',' << format_number(s.drmse_std) << ','
        << format_number(s.ap_mean) << ',' << format_number(s.ap_std) << ',' << format_number(s.be_mean) << ','
        << format_number(s.be_std) << ',' << format_number(s.ep_mean) << ',' << format_number(s.ep_std) << '\n';
}

}  // namespace glyco::experiment
