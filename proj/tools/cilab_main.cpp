// cilab command line front end: dataset generation, sweeps from config
// files, processor diagnostics, capacity probes, and built-in demo sweeps.
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cilab/diagnostics.hpp"
#include "cilab/errors.hpp"
#include "cilab/harness.hpp"
#include "cilab/models.hpp"
#include "cilab/pipeline.hpp"
#include "cilab/synthdata.hpp"

using namespace cilab;
namespace hn = cilab::harness;
namespace pl = cilab::pipeline;
namespace fs = std::filesystem;

namespace {

struct GenOptions {
  std::string family = "prefix_gaussian";
  int n = 1000;
  std::uint64_t seed = 1;
  std::string out;
  int dx = 100, dz = 80, dy = 5;
  double noise_z = -1.0, noise_y = -1.0, sigma = -1.0;  // <0 = keep default
};

void run_gen(const GenOptions& opt) {
  synth::DistributionSpec dist;
  if (opt.family == "prefix_gaussian") {
    synth::PrefixGaussianSpec spec;
    spec.dx = opt.dx;
    spec.dz = opt.dz;
    spec.dy = opt.dy;
    if (opt.noise_z >= 0.0) spec.noise_z = opt.noise_z;
    if (opt.noise_y >= 0.0) spec.noise_y = opt.noise_y;
    if (opt.sigma >= 0.0)
      throw ConfigError("gen: sigma only applies to sigma_linear");
    dist = spec;
  } else if (opt.family == "sigma_linear") {
    synth::SigmaLinearSpec spec;
    spec.dx = opt.dx;
    spec.dz = opt.dz;
    spec.dy = opt.dy;
    if (opt.noise_z >= 0.0) spec.noise_z = opt.noise_z;
    if (opt.sigma >= 0.0) spec.sigma = opt.sigma;
    if (opt.noise_y >= 0.0)
      throw ConfigError("gen: noise_y only applies to prefix_gaussian");
    dist = spec;
  } else {
    throw ConfigError("gen: unknown family '" + opt.family + "'");
  }
  RandomSource rng(opt.seed);
  const synth::Dataset data = synth::sample(dist, opt.n, rng);
  synth::export_dataset(data, opt.out);
  std::printf("wrote %d columns (%s) to %s\n", opt.n, opt.family.c_str(),
              opt.out.c_str());
}

void print_summary(const std::vector<hn::SummaryRow>& rows,
                   const std::string& var) {
  std::printf("%12s %12s %12s %12s %8s\n", var.c_str(), "mean_mse",
              "ci_low", "ci_high", "repeats");
  for (const auto& r : rows) {
    std::printf("%12g %12.6g %12.6g %12.6g %8d\n", r.value, r.mean_mse,
                r.ci_low, r.ci_high, r.repeats);
  }
}

// Mean test error of the plain two-step route at each sweep value, as a
// second curve for the plots.
std::vector<hn::SummaryRow> baseline_summary(const hn::SweepSpec& spec) {
  std::vector<hn::RunRecord> records;
  for (double v : spec.values) {
    const pl::PipelineConfig cfg = hn::apply_value(spec.base, spec.variable, v);
    for (int r = 0; r < spec.repeats; ++r) {
      hn::RunRecord rec;
      rec.value = v;
      rec.repeat = r;
      rec.mse_test =
          pl::run_standard_ssl(cfg, hn::run_seed(spec.base_seed, v, r))
              .mse_test;
      records.push_back(rec);
    }
  }
  return hn::summarize(records);
}

void run_and_emit(const hn::SweepSpec& spec, const fs::path& out,
                  bool with_baseline) {
  fs::create_directories(out);
  const auto records = hn::run_sweep(spec);
  const auto summary = hn::summarize(records);
  const std::string var = records.front().sweep_var;

  hn::emit_records_csv(records, out / "records.csv");
  hn::emit_summary_csv(summary, out / "summary.csv");
  hn::write_manifest(spec, records, summary, out / "manifest.txt");

  std::vector<hn::PlotSeries> series = {{"trained processor", summary, ""}};
  if (with_baseline) {
    const auto base = baseline_summary(spec);
    hn::emit_summary_csv(base, out / "baseline_summary.csv");
    series.push_back({"no processor", base, ""});
  }
  hn::emit_plot(series, var, "test mse", out / "plot.svg");

  print_summary(summary, var);
  std::printf("artifacts in %s: records.csv summary.csv%s manifest.txt "
              "plot.svg\n",
              out.string().c_str(),
              with_baseline ? " baseline_summary.csv" : "");
}

hn::SweepSpec demo_spec(const std::string& preset) {
  hn::SweepSpec spec;
  spec.base.n1 = 20000;
  spec.base.nt = 2000;
  spec.base.processor = models::LinearShape{5, 100};
  spec.base.loss.lambda = 0.1;
  spec.repeats = 5;
  spec.base_seed = 1;
  if (preset == "n0" || preset == "n0-small") {
    // error vs labeled-sample budget; the small variant covers the low end
    spec.variable = hn::SweepVariable::kN0;
    spec.values = preset == "n0"
                      ? std::vector<double>{30, 50, 70, 90, 110, 140}
                      : std::vector<double>{15, 30, 50, 70};
  } else if (preset == "lambda") {
    // penalty sweep at a 15-column budget, head kept on its own 15 columns
    spec.base.extra_down1 = true;
    spec.base.split.n0 = 15;
    spec.base.n2 = 15;
    spec.variable = hn::SweepVariable::kLambda;
    spec.values = {0.1, 0.5, 1.0, 1.5};
  } else if (preset == "df") {
    // processor width sweep, 200 fresh labeled columns for the processor
    spec.base.extra_down1 = true;
    spec.base.split.n0 = 200;
    spec.base.n2 = 15;
    spec.variable = hn::SweepVariable::kDf;
    spec.values.resize(12);
    for (int i = 0; i < 12; ++i) spec.values[i] = i + 1;
  } else {
    throw ConfigError("demo: unknown preset '" + preset +
                      "' (n0, n0-small, lambda, df)");
  }
  return spec;
}

struct CapacityOptions {
  std::string shape = "linear";
  int in_dim = 30, out_dim = 1;
  std::vector<int> hidden = {64};
  std::string activation = "tanh";
  int n = 30, trials = 20, budget = 50000;
  double lr = 0.05, tol = 1e-6;
  std::uint64_t seed = 1;
};

void run_capacity(const CapacityOptions& opt) {
  diagnostics::CapacityProbeSpec spec;
  if (opt.shape == "linear") {
    spec.model = models::LinearShape{opt.out_dim, opt.in_dim};
  } else if (opt.shape == "mlp") {
    std::vector<int> widths = {opt.in_dim};
    widths.insert(widths.end(), opt.hidden.begin(), opt.hidden.end());
    widths.push_back(opt.out_dim);
    spec.model = models::MlpShape{widths, models::parse_activation(
                                              opt.activation)};
  } else {
    throw ConfigError("capacity: unknown shape '" + opt.shape + "'");
  }
  spec.n = opt.n;
  spec.trials = opt.trials;
  spec.fit_budget = opt.budget;
  spec.fit_lr = opt.lr;
  spec.success_tol = opt.tol;
  RandomSource rng(opt.seed);
  const double rate = diagnostics::capacity_probe(spec, rng);
  std::printf("interpolation rate %.3f over %d trials at n = %d (tol %g)\n",
              rate, opt.trials, opt.n, opt.tol);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"self-supervised pipeline lab"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "sample a dataset to CSV");
  gen_cmd->add_option("--family", gen.family,
                      "prefix_gaussian or sigma_linear");
  gen_cmd->add_option("--n", gen.n, "number of columns")->required();
  gen_cmd->add_option("--seed", gen.seed, "generator seed");
  gen_cmd->add_option("--out", gen.out, "output directory")->required();
  gen_cmd->add_option("--dx", gen.dx, "input dimension");
  gen_cmd->add_option("--dz", gen.dz, "pretext dimension");
  gen_cmd->add_option("--dy", gen.dy, "label dimension");
  gen_cmd->add_option("--noise-z", gen.noise_z, "pretext noise level");
  gen_cmd->add_option("--noise-y", gen.noise_y,
                      "label noise level (prefix family)");
  gen_cmd->add_option("--sigma", gen.sigma,
                      "label map singular value (sigma_linear)");

  std::string sweep_config, sweep_out = "sweep_out";
  bool sweep_baseline = false;
  auto* sweep_cmd =
      app.add_subcommand("sweep", "run a sweep from a config file");
  sweep_cmd->add_option("--config", sweep_config, "key = value config file")
      ->required();
  sweep_cmd->add_option("--out", sweep_out, "output directory");
  sweep_cmd->add_flag("--baseline", sweep_baseline,
                      "also run the no-processor route per value");

  std::string diag_model, diag_data;
  double diag_ridge = -1.0;
  auto* diag_cmd = app.add_subcommand(
      "diagnose", "criteria report for a checkpointed processor");
  diag_cmd->add_option("--model", diag_model, "processor checkpoint file")
      ->required();
  diag_cmd->add_option("--data", diag_data, "dataset directory")->required();
  diag_cmd->add_option("--ridge", diag_ridge,
                       "absolute ridge (default: relative 1e-10)");

  CapacityOptions cap;
  auto* cap_cmd =
      app.add_subcommand("capacity", "interpolation capacity probe");
  cap_cmd->add_option("--shape", cap.shape, "linear or mlp");
  cap_cmd->add_option("--in-dim", cap.in_dim, "input dimension");
  cap_cmd->add_option("--out-dim", cap.out_dim, "output dimension");
  cap_cmd->add_option("--hidden", cap.hidden, "hidden widths (mlp)");
  cap_cmd->add_option("--activation", cap.activation, "tanh or relu");
  cap_cmd->add_option("--n", cap.n, "columns to interpolate");
  cap_cmd->add_option("--trials", cap.trials, "number of trials");
  cap_cmd->add_option("--budget", cap.budget, "fit steps per trial (mlp)");
  cap_cmd->add_option("--lr", cap.lr, "fit learning rate (mlp)");
  cap_cmd->add_option("--tol", cap.tol, "success tolerance");
  cap_cmd->add_option("--seed", cap.seed, "probe seed");

  std::string demo_preset, demo_out = "demo_out";
  auto* demo_cmd =
      app.add_subcommand("demo", "built-in sweep presets with baseline");
  demo_cmd->add_option("--preset", demo_preset, "n0, n0-small, lambda, df")
      ->required();
  demo_cmd->add_option("--out", demo_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen_cmd->parsed()) {
      run_gen(gen);
    } else if (sweep_cmd->parsed()) {
      run_and_emit(hn::load_sweep_config(sweep_config), sweep_out,
                   sweep_baseline);
    } else if (diag_cmd->parsed()) {
      const models::Processor f = models::load_checkpoint(diag_model);
      const synth::Dataset data = synth::import_dataset(diag_data);
      const RidgeParam ridge = diag_ridge >= 0.0
                                   ? RidgeParam::absolute(diag_ridge)
                                   : RidgeParam();
      const auto report = diagnostics::criteria_report(f, data, ridge);
      std::printf("c1_residual  %.6g\nc2_gap       %.6g\npretext_fit  "
                  "%.6g\nsamples      %lld\n",
                  report.c1_residual, report.c2_gap, report.pretext_fit,
                  static_cast<long long>(report.sample_size));
    } else if (cap_cmd->parsed()) {
      run_capacity(cap);
    } else if (demo_cmd->parsed()) {
      run_and_emit(demo_spec(demo_preset), demo_out, true);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
