// capwatt: command-line front end to the experiment harness.
//
//   capwatt sweep --config configs/default.json --out results
//   capwatt campaign --config configs/smoke.json --cell 0,false --out runs

#include <cstdio>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "capwatt/harness.hpp"

using namespace capwatt;

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::string cell;
  std::string profile;
};

ExperimentConfig load(const Options& o) {
  ExperimentConfig cfg = o.config_path.empty() ? ExperimentConfig{} : load_config(o.config_path);
  if (o.seed) cfg.master_seed = *o.seed;
  cfg.validate();
  return cfg;
}

std::vector<Cell> selected_cells(const ExperimentConfig& cfg, const Options& o) {
  if (!o.cell.empty()) return {parse_cell(cfg, o.cell)};
  return experiment_cells(cfg);
}

void log_line(const std::string& s) { std::cerr << s << std::endl; }

double tbps(double bps) { return bps * 1e-12; }

// One pipeline stage applied to each selected cell; failures are reported per cell.
template <typename Stage>
int for_each_cell(const Options& o, Stage stage) {
  const ExperimentConfig cfg = load(o);
  const auto cells = selected_cells(cfg, o);
  int failed = 0;
  int code = 0;
  for (const Cell& cell : cells) {
    const fs::path dir = fs::path(o.out) / cell.name();
    try {
      fs::create_directories(dir);
      stage(cfg, cell, dir);
    } catch (const std::exception& e) {
      std::cerr << cell.name() << ": " << e.what() << "\n";
      ++failed;
      if (!code) code = failure_code(e);
    }
  }
  if (failed == 0) return 0;
  return failed < static_cast<int>(cells.size()) ? 3 : code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Capacity-per-watt experiments on a synthetic amplified link"};
  app.require_subcommand(1);
  Options o;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "experiment configuration (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "override the master seed");
    sub->add_option("--out", o.out, "output directory")->capture_default_str();
    sub->add_option("--cell", o.cell, "restrict to one cell: <pE_index,gff>");
  };
  auto* campaign = app.add_subcommand("campaign", "generate launch profiles and simulate the link");
  auto* train_cmd = app.add_subcommand("train", "train one twin per cell from its dataset");
  auto* evaluate_cmd = app.add_subcommand("evaluate", "twin SNR and capacity errors on the validation rows");
  auto* optimize_cmd = app.add_subcommand("optimize", "multi-start capacity maximization through the twin");
  auto* verify_cmd = app.add_subcommand("verify", "check a launch profile on the link model");
  auto* sweep_cmd = app.add_subcommand("sweep", "full pipeline over every cell");
  auto* baselines_cmd = app.add_subcommand("baselines", "flat TX, flat RX and flat SNR allocations");
  for (auto* s : {campaign, train_cmd, evaluate_cmd, optimize_cmd, verify_cmd, sweep_cmd, baselines_cmd}) common(s);
  verify_cmd->add_option("--profile", o.profile, "x,y series of dBm per channel (default: the cell's optimized profile)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*sweep_cmd) {
      const ExperimentConfig cfg = load(o);
      std::optional<Cell> only;
      if (!o.cell.empty()) only = parse_cell(cfg, o.cell);
      const SweepResult s = run_sweep(cfg, o.out, only, log_line);
      std::printf("%-12s %8s %10s %10s %10s %10s %9s\n", "cell", "C Tb/s", "m Tb/s/W", "flatTX", "flatSNR",
                  "twin err", "max dBm");
      for (const auto& c : s.cells) {
        if (!c.ok) {
          std::printf("%-12s failed: %s\n", c.cell.name().c_str(), c.failure.c_str());
          continue;
        }
        std::printf("%-12s %8.3f %10.3f %10.3f %10.3f %9.2f%% %9.2f\n", c.cell.name().c_str(), tbps(c.capacity),
                    tbps(c.merit), tbps(c.flat_tx_capacity), tbps(c.flat_snr_capacity), 100.0 * c.twin_error,
                    c.max_inline_dbm);
      }
      return sweep_exit_code(s);
    }

    if (*campaign)
      return for_each_cell(o, [](const ExperimentConfig& cfg, const Cell& cell, const fs::path& dir) {
        const LinkConfig link = cell_link(cfg, cell);
        for (const auto& w : link.warnings) log_line(cell.name() + ": warning: " + w);
        const Dataset d = run_cell_campaign(cfg, link);
        save_dataset((dir / "dataset.csv").string(), d);
        std::printf("%s: %zu rows (%zu validation) -> %s\n", cell.name().c_str(), d.rows.size(),
                    d.count(Split::validation), (dir / "dataset.csv").c_str());
      });

    if (*train_cmd)
      return for_each_cell(o, [](const ExperimentConfig& cfg, const Cell& cell, const fs::path& dir) {
        const Dataset d = load_dataset((dir / "dataset.csv").string());
        const TrainResult r = train_cell(cfg, cell, d);
        save_model((dir / "model.json").string(), r.model);
        write_training(dir / "training.csv", r.report);
        const auto e = r.report.best_epoch;
        std::printf("%s: best epoch %zu of %zu, train MSE %.3g, validation MSE %.3g\n", cell.name().c_str(), e,
                    r.report.epochs_run, r.report.train_mse[e], r.report.validation_mse[e]);
      });

    if (*evaluate_cmd)
      return for_each_cell(o, [](const ExperimentConfig& cfg, const Cell& cell, const fs::path& dir) {
        const Dataset d = load_dataset((dir / "dataset.csv").string());
        const TwinModel m = load_model((dir / "model.json").string());
        const EvaluationReport rep = evaluate(m, d, cfg.link.grid, Split::validation);
        write_evaluation(dir, rep, d, m);
        std::printf("%s: validation SNR RMS error %.3f dB (max %.3f dB), mean capacity error %.3f%%\n",
                    cell.name().c_str(), rep.rms_error_db, rep.max_abs_error_db,
                    100.0 * rep.mean_capacity_relative_error);
      });

    if (*optimize_cmd)
      return for_each_cell(o, [](const ExperimentConfig& cfg, const Cell& cell, const fs::path& dir) {
        const LinkConfig link = cell_link(cfg, cell);
        const Dataset d = load_dataset((dir / "dataset.csv").string());
        const TwinModel m = load_model((dir / "model.json").string());
        const MultiStartResult ms = optimize_from_starts(m, link, dataset_profiles(d, cfg.start_count), cfg.gd);
        write_multistart(dir, ms);
        write_profile(dir / "profile_optimized.csv", ms.best_run.final_profile, link.grid);
        const auto& best = ms.outcomes[ms.best];
        std::printf("%s: best start %zu, predicted %.3f Tb/s, verified %.3f Tb/s, spread %.3f%% over %zu converged\n",
                    cell.name().c_str(), best.index, tbps(best.final_predicted), tbps(best.verified),
                    100.0 * ms.verified_spread, ms.converged_count);
      });

    if (*verify_cmd)
      return for_each_cell(o, [&](const ExperimentConfig& cfg, const Cell& cell, const fs::path& dir) {
        const LinkConfig link = cell_link(cfg, cell);
        const TwinModel m = load_model((dir / "model.json").string());
        const fs::path src = o.profile.empty() ? dir / "profile_optimized.csv" : fs::path(o.profile);
        const PowerProfile p = rescale_to_total(read_profile(src), link.tx_total_mw());
        const VerificationRecord v = verify_profile(p, m, link);
        write_verification(dir / "verification.csv", v, link.grid);
        std::printf("%s: twin %.3f Tb/s, link %.3f Tb/s, error %.3f%%, max inline %.2f dBm\n", cell.name().c_str(),
                    tbps(v.predicted_capacity), tbps(v.oracle_capacity), 100.0 * v.relative_error, v.max_inline_dbm);
      });

    if (*baselines_cmd)
      return for_each_cell(o, [](const ExperimentConfig& cfg, const Cell& cell, const fs::path& dir) {
        const LinkConfig link = cell_link(cfg, cell);
        const Baselines b = run_baselines(cfg, link);
        write_baselines(dir, b, link);
        std::printf("%s: flat TX %.3f, flat RX %.3f, flat SNR %.3f Tb/s\n", cell.name().c_str(),
                    tbps(b.flat_tx_capacity), tbps(b.flat_rx_capacity), tbps(b.flat_snr_capacity));
      });
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return failure_code(e);
  }
  return 0;
}
