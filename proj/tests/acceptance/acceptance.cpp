// SPDX-License-Identifier: Apache-2.0
// Acceptance suite. Prints one PASS/FAIL line per criterion.
//
//   acceptance            run every criterion
//   acceptance 3 7        run the listed criteria
//
// Exit status is 0 only if every selected criterion passes.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "glyco/experiment.hpp"
#include "glyco/metrics.hpp"
#include "glyco/models.hpp"
#include "glyco/preprocess.hpp"
#include "glyco/synth.hpp"
#include "support/oracles.hpp"

namespace fs = std::filesystem;
using namespace glyco;
using namespace glyco::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string printf_string(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("glyco-acceptance-" + name);
  fs::remove_all(dir);
  return dir;
}

int jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

// 1. BPTT gradient of cMSE + L2 against central differences.
Outcome gradient_check() {
  SplitMix64 rng(2718);
  const int units[] = {4, 8, 16};
  const int histories[] = {3, 5, 10};
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const int u = units[trial % 3];
    const int h = histories[(trial / 3) % 3];
    const double c = trial % 2 ? 2.0 : 0.0;
    auto params = random_params(rng, u);
    auto batch = random_batch(rng, h, 4);
    worst = std::max(worst, max_relative_error(params, batch, {c, 1e-2, false}));
  }
  return {worst < 1e-4, printf_string("20 instances, max relative error %.3g (limit 1e-4)", worst)};
}

// 2. cMSE(c = 0) == MSE bit for bit, and pcLSTM(c = 0) trains to the same
// parameter file as the one-output LSTM.
Outcome loss_identity() {
  SplitMix64 rng(1);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = 1 + rng.below(64);
    std::vector<nnet::TwoStepPrediction> p(n);
    std::vector<nnet::TwoStepTarget> t(n);
    std::vector<double> pf(n), tf(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = {rng.normal() * 40, rng.normal() * 40};
      t[i] = {rng.normal() * 40, rng.normal() * 40};
      pf[i] = p[i].final;
      tf[i] = t[i].final;
    }
    if (nnet::loss_cmse(p, t, 0.0) != nnet::loss_mse(pf, tf)) ++mismatches;
  }

  synth::SynthConfig sc;
  sc.days = 6;
  sc.seed = 12;
  auto series = preprocess::clean_series(synth::generate_patient(sc));
  auto split = preprocess::split_days(series);
  auto z = preprocess::apply_scaler(series, preprocess::fit_scaler(series, split.train));
  auto all_train = preprocess::build_windows(z, {}, split.train);
  std::vector<preprocess::SampleWindow> train;
  for (std::size_t i = 0; i < all_train.size(); i += 4) train.push_back(all_train[i]);
  auto valid = preprocess::build_windows(z, {}, split.valid);

  models::LstmModelConfig c;
  c.units = 8;
  c.train.max_epochs = 4;
  c.train.seed = 5;
  auto lstm = models::make_lstm(c);
  auto pc = models::make_pclstm(c, 0.0);
  lstm->fit(train, valid);
  pc->fit(train, valid);
  std::ostringstream a, b;
  lstm->save(a);
  pc->save(b);
  const bool same_files = a.str() == b.str();
  return {mismatches == 0 && same_files,
          printf_string("%d/1000 loss mismatches, parameter files %s", mismatches, same_files ? "identical" : "differ")};
}

// 3. CG-EGA point-wise agreement with the reference transcription.
Outcome cg_ega_agreement() {
  SplitMix64 rng(2024);
  int disagreements = 0;
  std::array<int, 3> per_region{};
  for (int i = 0; i < 1000; ++i) {
    double y;
    switch (i % 3) {
      case 0: y = rng.uniform(40, 70); break;
      case 1: y = rng.uniform(70.0001, 179.999); break;
      default: y = rng.uniform(180, 400); break;
    }
    const double p = i % 2 ? std::clamp(y * (1 + 0.25 * rng.normal()), 40.0, 400.0) : rng.uniform(40, 400);
    const double tr = rng.uniform(-4, 4);
    const double pr = i % 4 < 2 ? std::clamp(tr + 1.5 * rng.normal(), -4.0, 4.0) : rng.uniform(-4, 4);
    const auto pz = metrics::p_ega(y, p, tr);
    const auto rz = metrics::r_ega(tr, pr);
    const auto label = metrics::cg_ega_classify(pz, rz, metrics::region_of(y));
    const auto op = oracle::p_zone(y, p, tr), orr = oracle::r_zone(tr, pr);
    if (metrics::to_string(pz) != op || metrics::to_string(rz) != orr ||
        metrics::to_string(label) != oracle::label(op, orr, oracle::region(y)))
      ++disagreements;
    ++per_region[static_cast<std::size_t>(oracle::region(y))];
  }
  const bool spans = std::ranges::all_of(per_region, [](int n) { return n > 0; });
  return {disagreements == 0 && spans,
          printf_string("%d/1000 disagreements (hypo %d, eu %d, hyper %d points)", disagreements, per_region[0],
                        per_region[1], per_region[2])};
}

experiment::ExperimentConfig cohort_config(std::uint64_t seed) {
  experiment::ExperimentConfig c;
  experiment::SyntheticSource source;
  source.patients = 5;
  source.base.days = 12;
  source.cohort_seed = 7;
  c.synthetic = source;
  c.seed = seed;
  return c;
}

experiment::ModelSpec lstm_spec(const std::string& name, models::ModelKind kind, double coherence) {
  experiment::ModelSpec spec;
  spec.name = name;
  spec.kind = kind;
  spec.train_stride = 2;
  experiment::GridCell cell;
  cell.label = "default";
  auto& l = cell.params.lstm;
  l.units = 64;
  l.train.max_epochs = 40;
  l.train.patience = 6;
  l.train.coherence = coherence;
  spec.cells.push_back(cell);
  return spec;
}

using RowKey = std::pair<std::string, std::string>;  // patient, model

std::map<RowKey, metrics::CgEgaReport> raw_rows(const experiment::ExperimentResult& r) {
  std::map<RowKey, metrics::CgEgaReport> out;
  for (const auto& row : r.rows)
    if (row.smoothing == "raw") out[{row.patient, row.model}] = row.report;
  return out;
}

// 4. pcLSTM (c = 2) against LSTM on 5 synthetic patients x 2 seeds.
Outcome directional_reproduction() {
  int drmse_wins = 0, ap_wins = 0, runs = 0;
  double rmse_lstm = 0, rmse_pc = 0, drmse_lstm = 0, drmse_pc = 0, ap_lstm = 0, ap_pc = 0;
  for (std::uint64_t seed : {1u, 2u}) {
    auto c = cohort_config(seed);
    c.models = {lstm_spec("lstm", models::ModelKind::lstm, 0.0), lstm_spec("pclstm", models::ModelKind::pclstm, 2.0)};
    c.smoothing = false;
    c.output_dir = scratch("c4-" + std::to_string(seed));
    auto result = experiment::run_experiment(c, experiment::Stage::full, jobs());
    if (!result.failures.empty()) return {false, "patient failed: " + result.failures[0].reason};
    auto rows = raw_rows(result);
    for (int p = 1; p <= 5; ++p) {
      const std::string id = printf_string("synth-%03d", p);
      const auto& a = rows.at({id, "lstm"});
      const auto& b = rows.at({id, "pclstm"});
      ++runs;
      drmse_wins += b.drmse < a.drmse;
      ap_wins += b.overall.ap > a.overall.ap;
      rmse_lstm += a.rmse;
      rmse_pc += b.rmse;
      drmse_lstm += a.drmse;
      drmse_pc += b.drmse;
      ap_lstm += a.overall.ap;
      ap_pc += b.overall.ap;
    }
  }
  const double degradation = rmse_pc / rmse_lstm - 1;
  const bool pass = drmse_wins >= 9 && ap_wins >= 8 && degradation <= 0.15;
  return {pass, printf_string("dRMSE lower in %d/%d (need 9), AP higher in %d/%d (need 8), RMSE %+.1f%% (limit +15%%); "
                              "means LSTM rmse %.2f drmse %.2f ap %.2f, pcLSTM rmse %.2f drmse %.2f ap %.2f",
                              drmse_wins, runs, ap_wins, runs, 100 * degradation, rmse_lstm / runs, drmse_lstm / runs,
                              ap_lstm / runs, rmse_pc / runs, drmse_pc / runs, ap_pc / runs)};
}

// 5. Moving-average smoothing lowers mean dRMSE and does not lower mean RMSE.
Outcome smoothing_tradeoff() {
  auto c = cohort_config(1);
  auto single = [](const std::string& name, models::ModelKind kind, int stride) {
    experiment::ModelSpec spec;
    spec.name = name;
    spec.kind = kind;
    spec.train_stride = stride;
    spec.cells.push_back({"default", {}});
    return spec;
  };
  c.models = {single("elm", models::ModelKind::elm, 1), single("gp", models::ModelKind::gp, 1),
              single("svr", models::ModelKind::svr, 2), lstm_spec("lstm", models::ModelKind::lstm, 0.0),
              lstm_spec("pclstm", models::ModelKind::pclstm, 2.0)};
  c.output_dir = scratch("c5");
  auto result = experiment::run_experiment(c, experiment::Stage::full, jobs());
  if (!result.failures.empty()) return {false, "patient failed: " + result.failures[0].reason};
  auto summary = experiment::summarize(result.rows);
  std::string detail;
  bool pass = true;
  for (std::size_t i = 0; i + 1 < summary.size(); i += 2) {
    const auto& raw = summary[i];
    const auto& smoothed = summary[i + 1];
    if (raw.smoothing != "raw" || smoothed.smoothing != "smoothed" || raw.model != smoothed.model)
      return {false, "unexpected summary layout"};
    const bool ok = smoothed.drmse_mean < raw.drmse_mean && smoothed.rmse_mean >= raw.rmse_mean;
    pass = pass && ok;
    detail += printf_string("%s%s rmse %.2f->%.2f drmse %.2f->%.2f%s", detail.empty() ? "" : "; ", raw.model.c_str(),
                            raw.rmse_mean, smoothed.rmse_mean, raw.drmse_mean, smoothed.drmse_mean, ok ? "" : " (wrong direction)");
  }
  return {pass && summary.size() == 10, detail};
}

// 6. ELM, GP and SVR solves against dense and brute-force oracles.
Outcome solver_oracles() {
  using clock = std::chrono::steady_clock;
  auto seconds = [](clock::time_point since) { return std::chrono::duration<double>(clock::now() - since).count(); };
  auto relative = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).norm() / b.norm(); };
  SplitMix64 rng(6);

  auto t0 = clock::now();
  double elm_err = 0;
  for (auto [n, neurons] : std::vector<std::pair<int, int>>{{200, 60}, {60, 150}}) {
    models::Elm elm({neurons, 3.0, 11});
    Eigen::MatrixXd x = random_matrix(rng, n, 12);
    Eigen::VectorXd y = random_vector(rng, n);
    elm.fit_features(x, y);
    Eigen::MatrixXd h = elm.hidden_layer(x);
    Eigen::MatrixXd a = h.transpose() * h + 3.0 * Eigen::MatrixXd::Identity(neurons, neurons);
    elm_err = std::max(elm_err, relative(elm.output_weights(), a.fullPivLu().solve(h.transpose() * y)));
  }
  const double elm_time = seconds(t0);

  t0 = clock::now();
  const int n = 150;
  Eigen::MatrixXd x = random_matrix(rng, n, 20);
  Eigen::VectorXd y = random_vector(rng, n);
  models::GaussianProcess gp({1e-8, 1e-2});
  gp.fit_features(x, y);
  Eigen::MatrixXd k(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) k(i, j) = 1e-8 + x.row(i).dot(x.row(j)) + (i == j ? 1e-2 : 0.0);
  const double gp_err = relative(gp.weights(), k.colPivHouseholderQr().solve(y));
  const double gp_time = seconds(t0);

  t0 = clock::now();
  double svr_gap = 0;
  for (int trial = 0; trial < 4; ++trial) {
    const int m = 14 + 2 * trial;  // up to 20
    Eigen::MatrixXd xs = random_matrix(rng, m, 3);
    Eigen::VectorXd ys = random_vector(rng, m) * 2.0;
    const double c = trial % 2 ? 1.0 : 10.0;
    models::Svr svr({0.4, 0.1, c, 1e-6, 1000000});
    svr.fit_features(xs, ys);
    svr_gap = std::max(svr_gap, std::abs(svr.dual_objective() -
                                         qp_oracle_dual(models::Svr::rbf_kernel(xs, xs, 0.4), ys, 0.1, c)));
  }
  const double svr_time = seconds(t0);

  const bool pass = elm_err < 1e-6 && gp_err < 1e-8 && svr_gap < 1e-3 && elm_time < 5 && gp_time < 5 && svr_time < 5;
  return {pass, printf_string("ELM rel %.2g (%.2fs), GP rel %.2g (%.2fs), SVR dual gap %.2g (%.2fs)", elm_err, elm_time,
                              gp_err, gp_time, svr_gap, svr_time)};
}

// 7. PCHIP reproduces nodes and adds no extrema between them.
Outcome pchip_properties() {
  SplitMix64 rng(7);
  double node_err = 0;
  int overshoots = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(14));
    std::vector<double> x(n), y(n);
    double pos = 0;
    for (int k = 0; k < n; ++k) {
      pos += rng.uniform(0.5, 8.0);
      x[k] = pos;
      y[k] = trial % 2 ? rng.uniform(40, 400) : (k ? y[k - 1] + rng.uniform(0, 30) : rng.uniform(40, 100));
    }
    preprocess::Pchip p(x, y);
    for (int k = 0; k < n; ++k) node_err = std::max(node_err, std::abs(p(x[k]) - y[k]) / std::abs(y[k]));
    for (int k = 0; k + 1 < n; ++k) {
      const double lo = std::min(y[k], y[k + 1]), hi = std::max(y[k], y[k + 1]);
      const double tol = 1e-12 * hi;
      for (int j = 1; j < 64; ++j) {
        const double v = p(x[k] + (x[k + 1] - x[k]) * j / 64.0);
        if (v < lo - tol || v > hi + tol) ++overshoots;
      }
    }
  }
  return {node_err <= 4 * std::numeric_limits<double>::epsilon() && overshoots == 0,
          printf_string("500 node sets, max node error %.2g relative, %d samples outside their interval", node_err,
                        overshoots)};
}

// 8. Two identical end-to-end runs give byte-identical reports.
Outcome pipeline_determinism() {
  auto config = experiment::parse_config(R"({
    "data": {"synthetic": {"days": 6, "patients": 2, "missing_rate": 0.02}},
    "models": [
      {"kind": "naive"},
      {"kind": "elm", "grid": {"hidden_neurons": [50, 200], "l2": [10, 100]}},
      {"kind": "gp"},
      {"kind": "svr", "train_stride": 4},
      {"kind": "lstm", "train_stride": 4, "grid": {"units": 8, "max_epochs": 3}},
      {"kind": "pclstm", "train_stride": 4, "grid": {"units": 8, "max_epochs": 3, "coherence": [0, 2]}}
    ],
    "seed": 11
  })");
  std::vector<std::string> reports, summaries;
  for (const char* run : {"a", "b"}) {
    config.output_dir = scratch(std::string("c8-") + run);
    experiment::run_experiment(config, experiment::Stage::full, jobs());
    reports.push_back(slurp(config.output_dir / "report.csv"));
    summaries.push_back(slurp(config.output_dir / "summary.csv"));
  }
  const bool same = reports[0] == reports[1] && summaries[0] == summaries[1];
  return {same && !reports[0].empty(),
          printf_string("report.csv %zu bytes, %s", reports[0].size(), same ? "identical" : "differs")};
}

struct Criterion {
  int id;
  const char* name;
  double time_limit;  // seconds, 0 when unstated
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "gradient correctness", 30, gradient_check},
      {2, "loss identity", 0, loss_identity},
      {3, "CG-EGA agreement", 10, cg_ega_agreement},
      {4, "pcLSTM vs LSTM direction", 15 * 60, directional_reproduction},
      {5, "smoothing trade-off", 0, smoothing_tradeoff},
      {6, "solver oracles", 0, solver_oracles},
      {7, "PCHIP properties", 5, pchip_properties},
      {8, "pipeline determinism", 0, pipeline_determinism},
  };
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && std::ranges::find(selected, c.id) == selected.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.time_limit > 0 && elapsed >= c.time_limit) {
      outcome.pass = false;
      outcome.detail += printf_string("; over the %.0fs limit", c.time_limit);
    }
    failed += !outcome.pass;
    std::printf("%s criterion %d %s (%.1fs): %s\n", outcome.pass ? "PASS" : "FAIL", c.id, c.name, elapsed,
                outcome.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
