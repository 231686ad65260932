// Command-line front end for the dmsb shared library. Everything goes
// through the C API in dmsb.h.

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "dmsb.h"

namespace {

struct ExperimentDeleter {
  void operator()(dmsb_experiment* e) const { dmsb_experiment_destroy(e); }
};
using ExperimentHandle = std::unique_ptr<dmsb_experiment, ExperimentDeleter>;

[[noreturn]] void die(const std::string& what, dmsb_status status) {
  std::fprintf(stderr, "error: %s: %s (%s)\n", what.c_str(), dmsb_last_error(),
               dmsb_status_name(status));
  std::exit(1);
}

void check(dmsb_status status, const std::string& what) {
  if (status != DMSB_OK) die(what, status);
}

struct CommonOptions {
  std::string spec_file;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  long long steps = 0;
  std::string mechanisms;
  std::string agents;
};

void add_common_flags(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--spec", opts.spec_file, "experiment spec file (key = value lines)");
  cmd->add_option("--out-dir", opts.out_dir, "output directory override");
  cmd->add_option("--seed", opts.seed, "base seed override")
      ->each([&](const std::string&) { opts.seed_set = true; });
  cmd->add_option("--steps", opts.steps, "training step count override");
  cmd->add_option("--mechanisms", opts.mechanisms,
                  "comma list from dmsb,spa,myopic,optimal");
  cmd->add_option("--agents", opts.agents,
                  "comma list from diffusion,ppo,greedy,random");
}

ExperimentHandle build_experiment(const CommonOptions& opts) {
  dmsb_experiment* raw = nullptr;
  if (!opts.spec_file.empty()) {
    check(dmsb_experiment_load(opts.spec_file.c_str(), &raw), "loading spec");
  } else {
    check(dmsb_experiment_create(&raw), "creating spec");
  }
  ExperimentHandle experiment(raw);
  const auto set = [&](const char* key, const std::string& value) {
    check(dmsb_experiment_set(experiment.get(), key, value.c_str()),
          std::string("setting ") + key);
  };
  if (!opts.out_dir.empty()) set("out_dir", opts.out_dir);
  if (opts.seed_set) set("seed", std::to_string(opts.seed));
  if (opts.steps > 0) set("trainer.steps", std::to_string(opts.steps));
  if (!opts.mechanisms.empty()) set("experiment.mechanisms", opts.mechanisms);
  if (!opts.agents.empty()) set("experiment.agents", opts.agents);
  return experiment;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dmsb - auction-based resource allocation simulator"};
  app.require_subcommand(1);

  CommonOptions train_opts;
  CLI::App* train = app.add_subcommand(
      "train", "train the configured agents and write logs, checkpoints and convergence.csv");
  add_common_flags(train, train_opts);

  CommonOptions eval_opts;
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "evaluate mechanisms and frozen agents; writes evaluation.csv");
  add_common_flags(evaluate, eval_opts);

  CommonOptions sweep_opts;
  CLI::App* sweep =
      app.add_subcommand("sweep", "run the spec's parameter sweep; writes sweep_<var>.csv");
  add_common_flags(sweep, sweep_opts);

  std::string chart_csv;
  std::string chart_out;
  std::string chart_x;
  std::string chart_y;
  std::string chart_series;
  std::string chart_title;
  CLI::App* chart = app.add_subcommand("chart", "render a line chart (SVG) from a results CSV");
  chart->add_option("--csv", chart_csv, "input CSV")->required();
  chart->add_option("--out", chart_out, "output SVG path")->required();
  chart->add_option("--x", chart_x, "x column name")->required();
  chart->add_option("--y", chart_y, "y column name")->required();
  chart->add_option("--series", chart_series, "series column name (one line per value)");
  chart->add_option("--title", chart_title, "chart title");

  std::uint64_t prop_seed = 7;
  int prop_markets = 2000;
  int prop_deviations = 100;
  int prop_homogeneity = 20000;
  CLI::App* props = app.add_subcommand(
      "property-check", "randomized mechanism properties: truthfulness, homogeneity, feasibility");
  props->add_option("--seed", prop_seed, "random seed");
  props->add_option("--markets", prop_markets, "number of random markets");
  props->add_option("--deviations", prop_deviations, "deviation grid size per bidder");
  props->add_option("--homogeneity-trials", prop_homogeneity, "homogeneity sample count");

  CLI11_PARSE(app, argc, argv);

  char path[4096] = {0};
  if (train->parsed()) {
    ExperimentHandle experiment = build_experiment(train_opts);
    check(dmsb_experiment_train(experiment.get(), path, sizeof path), "train");
    std::printf("wrote %s\n", path);
  } else if (evaluate->parsed()) {
    ExperimentHandle experiment = build_experiment(eval_opts);
    check(dmsb_experiment_evaluate(experiment.get(), path, sizeof path), "evaluate");
    std::printf("wrote %s\n", path);
  } else if (sweep->parsed()) {
    ExperimentHandle experiment = build_experiment(sweep_opts);
    check(dmsb_experiment_sweep(experiment.get(), path, sizeof path), "sweep");
    std::printf("wrote %s\n", path);
  } else if (chart->parsed()) {
    check(dmsb_chart_render(chart_csv.c_str(), chart_out.c_str(), chart_x.c_str(),
                            chart_y.c_str(), chart_series.empty() ? nullptr : chart_series.c_str(),
                            chart_title.empty() ? nullptr : chart_title.c_str()),
          "chart");
    std::printf("wrote %s\n", chart_out.c_str());
  } else if (props->parsed()) {
    dmsb_property_report report{};
    check(dmsb_property_check(prop_seed, prop_markets, prop_deviations, prop_homogeneity,
                              &report),
          "property-check");
    std::printf("markets checked:          %lld\n", static_cast<long long>(report.markets));
    std::printf("truthfulness violations:  %lld\n",
                static_cast<long long>(report.truthfulness_violations));
    std::printf("homogeneity trials:       %lld\n",
                static_cast<long long>(report.homogeneity_trials));
    std::printf("homogeneity violations:   %lld\n",
                static_cast<long long>(report.homogeneity_violations));
    std::printf("feasibility checks:       %lld\n",
                static_cast<long long>(report.feasibility_checks));
    std::printf("feasibility violations:   %lld\n",
                static_cast<long long>(report.feasibility_violations));
    const bool ok = report.truthfulness_violations == 0 && report.homogeneity_violations == 0 &&
                    report.feasibility_violations == 0;
    std::printf("%s\n", ok ? "all properties hold" : "PROPERTY VIOLATIONS FOUND");
    return ok ? 0 : 1;
  }
  return 0;
}
