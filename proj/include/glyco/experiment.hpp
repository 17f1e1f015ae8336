// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "glyco/metrics.hpp"
#include "glyco/models.hpp"
#include "glyco/postprocess.hpp"
#include "glyco/preprocess.hpp"
#include "glyco/synth.hpp"

namespace glyco::experiment {

struct SyntheticSource {
  int patients = 5;
  synth::SynthConfig base;  // base.seed is unused
  std::optional<std::uint64_t> cohort_seed;  // the experiment seed when unset
};

/// One fully specified model configuration.
struct Hyperparameters {
  models::ElmConfig elm;
  models::GpConfig gp;
  models::SvrConfig svr;
  models::LstmModelConfig lstm;  // lstm.train.coherence is c
};

struct GridCell {
  std::string label;  // e.g. "units=32;coherence=2", "default" for a single cell
  Hyperparameters params;
};

struct ModelSpec {
  std::string name;  // report name, defaults to the kind
  models::ModelKind kind = models::ModelKind::naive;
  std::vector<GridCell> cells;
  int train_stride = 1;  // keep every k-th training window
};

struct ExperimentConfig {
  std::optional<SyntheticSource> synthetic;
  std::optional<std::filesystem::path> csv_dir;
  preprocess::WindowConfig window;
  double spike_threshold = preprocess::kDefaultSpikeThreshold;
  std::vector<ModelSpec> models;
  bool smoothing = true;
  postprocess::SmoothingConfig smoothing_config;
  std::filesystem::path output_dir = "glyco-out";
  std::uint64_t seed = 1;
};

/// Parses the JSON schema documented in the README. Throws ConfigError on
/// unknown keys, wrong types, empty grids or zero or two data sources.
ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Synthetic cohort or every `*.csv` of the directory, sorted by file name.
std::vector<PatientRecord> load_patients(const ExperimentConfig& config);

struct PreparedPatient {
  std::string id;
  UniformSeries series;  // cleaned, mg/dL
  preprocess::DaySplit split;
  preprocess::Scaler scaler;
  std::vector<preprocess::SampleWindow> train, valid, test;
};

PreparedPatient prepare_patient(const PatientRecord& record, const ExperimentConfig& config);

std::unique_ptr<models::Predictor> make_model(models::ModelKind kind, const Hyperparameters& params);

struct CellScore {
  std::string label;
  double objective = 0;  // validation RMSE (mg/dL) or validation cMSE for pcLSTM
};

struct FittedModel {
  std::unique_ptr<models::Predictor> model;
  std::vector<CellScore> scores;  // in grid order
  std::size_t selected = 0;
};

/// Fits every cell on train, scores it on validation and keeps the best
/// (first on ties).
FittedModel grid_search(const ModelSpec& spec, const PreparedPatient& patient, std::uint64_t seed);

struct Evaluation {
  metrics::PredictionTrace raw, smoothed;
  metrics::CgEgaReport raw_report, smoothed_report;
};

Evaluation evaluate(const models::Predictor& model, const PreparedPatient& patient,
                    const ExperimentConfig& config);

struct ReportRow {
  std::string patient, model, smoothing, cell;
  metrics::CgEgaReport report;
};

struct PatientFailure {
  std::string patient;
  std::string reason;
};

struct ExperimentResult {
  std::vector<ReportRow> rows;
  std::vector<PatientFailure> failures;
  std::size_t patients = 0;
};

enum class Stage { train, evaluate, full };

/// Runs the pipeline per patient on `jobs` workers and writes the report
/// files under config.output_dir:
///   report.csv, summary.csv, grid.csv, failures.csv,
///   traces/<patient>__<model>__{raw,smoothed}.csv,
///   ega/<patient>__<model>__{raw,smoothed}.csv,
///   models/<patient>__<model>.bin
/// `train` stops after saving models; `evaluate` loads them instead of fitting.
/// Progress lines go to `log` when it is non-null.
ExperimentResult run_experiment(const ExperimentConfig& config, Stage stage = Stage::full, int jobs = 1,
                                std::ostream* log = nullptr);

/// `patient,model,smoothing,cell,rmse,drmse,drmse_per_min,ap,be,ep,` then
/// ap/be/ep for hypo, eu and hyper.
void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows);
std::vector<ReportRow> read_report_csv(std::istream& in);

struct SummaryRow {
  std::string model, smoothing;
  std::size_t patients = 0;
  // mean and sample standard deviation across patients
  double rmse_mean = 0, rmse_std = 0;
  double drmse_mean = 0, drmse_std = 0;
  double ap_mean = 0, ap_std = 0;
  double be_mean = 0, be_std = 0;
  double ep_mean = 0, ep_std = 0;
};

/// One row per (model, smoothing) in first-appearance order.
std::vector<SummaryRow> summarize(const std::vector<ReportRow>& rows);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

}  // namespace glyco::experiment
