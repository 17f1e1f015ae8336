// SPDX-License-Identifier: Apache-2.0
// glyco <subcommand> --config <path> [--out <dir>] [--seed <n>] [--jobs <n>]
//
// Exit codes: 0 success, 1 partial failure, 2 invalid configuration.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "glyco/error.hpp"
#include "glyco/experiment.hpp"
#include "glyco/render.hpp"

namespace fs = std::filesystem;
using namespace glyco;

namespace {

constexpr int kOk = 0;
constexpr int kPartial = 1;
constexpr int kInvalidConfig = 2;

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  bool quiet = false;
};

// --out wins, then GLYCO_OUT, then the config's output_dir.
experiment::ExperimentConfig resolve(const Options& o) {
  auto config = experiment::load_config(o.config);
  if (!o.out.empty()) config.output_dir = o.out;
  else if (const char* env = std::getenv("GLYCO_OUT"); env && *env) config.output_dir = env;
  if (o.seed) config.seed = *o.seed;
  return config;
}

int run_stage(const Options& o, experiment::Stage stage) {
  auto config = resolve(o);
  auto result = experiment::run_experiment(config, stage, o.jobs, o.quiet ? nullptr : &std::cerr);
  for (const auto& f : result.failures) std::cerr << "failed: " << f.patient << ": " << f.reason << '\n';
  std::cerr << (result.patients - result.failures.size()) << '/' << result.patients << " patients done, output in "
            << config.output_dir.string() << '\n';
  return result.failures.empty() ? kOk : kPartial;
}

int run_synth(const Options& o) {
  auto config = resolve(o);
  if (!config.synthetic) throw ConfigError("synth needs a data.synthetic source");
  const fs::path dir = config.output_dir / "data";
  fs::create_directories(dir);
  for (const auto& record : experiment::load_patients(config)) {
    export_csv(dir / (record.patient_id + ".csv"), record);
    for (const auto& w : record.warnings) std::cerr << record.patient_id << ": " << w << '\n';
  }
  std::cerr << "wrote " << dir.string() << '\n';
  return kOk;
}

int run_preprocess(const Options& o) {
  auto config = resolve(o);
  const fs::path dir = config.output_dir / "preprocessed";
  fs::create_directories(dir);
  int failed = 0;
  for (const auto& record : experiment::load_patients(config)) {
    try {
      auto patient = experiment::prepare_patient(record, config);
      std::ofstream out(dir / (record.patient_id + ".csv"), std::ios::binary);
      if (!out) throw Error("cannot write " + (dir / (record.patient_id + ".csv")).string());
      preprocess::export_preprocessed_csv(out, patient.series, patient.split);
      if (!o.quiet)
        std::cerr << record.patient_id << ": " << patient.train.size() << '/' << patient.valid.size() << '/'
                  << patient.test.size() << " train/valid/test windows\n";
    } catch (const Error& e) {
      ++failed;
      std::cerr << "failed: " << record.patient_id << ": " << e.what() << '\n';
    }
  }
  return failed ? kPartial : kOk;
}

int run_report(const Options& o) {
  fs::path dir;
  if (!o.out.empty()) dir = o.out;
  else if (!o.config.empty()) dir = resolve(o).output_dir;
  else if (const char* env = std::getenv("GLYCO_OUT"); env && *env) dir = env;
  else throw ConfigError("report needs --config or --out");
  auto rendered = render::report_render(dir);
  std::cout << rendered.table;
  std::cerr << "wrote " << rendered.files.size() << " files under " << dir.string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Glucose forecasting experiments"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub, bool config_required) {
    auto* c = sub->add_option("--config", o.config, "experiment config (JSON)");
    if (config_required) c->required();
    c->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory (overrides GLYCO_OUT and the config)");
    sub->add_option("--seed", seed, "experiment seed (overrides the config)");
    sub->add_option("--jobs", o.jobs, "worker threads over patients")->check(CLI::PositiveNumber);
    sub->add_flag("-q,--quiet", o.quiet, "no progress output");
  };

  auto* synth = app.add_subcommand("synth", "write the synthetic cohort as CSV files");
  auto* prep = app.add_subcommand("preprocess", "clean, split and export every patient");
  auto* train = app.add_subcommand("train", "grid search on validation and save the selected models");
  auto* eval = app.add_subcommand("evaluate", "score saved models on the test days");
  auto* report = app.add_subcommand("report", "render the summary table and SVG figures");
  auto* grid = app.add_subcommand("grid", "full experiment: grid search, test report, summary");
  for (auto* sub : {synth, prep, train, eval, grid}) add_common(sub, true);
  add_common(report, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kInvalidConfig;
  }
  for (auto* sub : {synth, prep, train, eval, report, grid})
    if (sub->get_option("--seed")->count() > 0) o.seed = seed;

  try {
    if (*synth) return run_synth(o);
    if (*prep) return run_preprocess(o);
    if (*train) return run_stage(o, experiment::Stage::train);
    if (*eval) return run_stage(o, experiment::Stage::evaluate);
    if (*grid) return run_stage(o, experiment::Stage::full);
    if (*report) return run_report(o);
  } catch (const ConfigError& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return kInvalidConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kPartial;
  }
  return kOk;
}
