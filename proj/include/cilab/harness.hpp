#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cilab/pipeline.hpp"

namespace cilab {
namespace harness {

// 95% band multiplier for the summary interval mean +- k * std / sqrt(r).
inline constexpr double kBandMultiplier = 1.96;

enum class SweepVariable { kN0, kLambda, kDf, kWidth, kN2 };

const char* sweep_variable_name(SweepVariable v);
SweepVariable parse_sweep_variable(const std::string& name);

struct SweepSpec {
  pipeline::PipelineConfig base;
  SweepVariable variable = SweepVariable::kN0;
  std::vector<double> values;
  int repeats = 5;
  std::uint64_t base_seed = 1;
};

struct RunRecord {
  std::string run_id;
  std::string sweep_var;
  double value = 0.0;
  int repeat = 0;
  std::uint64_t seed = 0;
  bool diverged = false;
  // NaN encodes "not available" (diverged before producing the number);
  // such cells are written empty.
  double mse_test = 0.0;
  double c1_residual = 0.0;
  double c2_gap = 0.0;
  double train_total = 0.0;
  double train_down = 0.0;
  double train_pre = 0.0;
  std::int64_t wallclock_ms = 0;
};

struct SummaryRow {
  double value = 0.0;
  double mean_mse = 0.0;
  double std_mse = 0.0;  // sample std over repeats; 0 for a single repeat
  double ci_low = 0.0;
  double ci_high = 0.0;
  int repeats = 0;
};

// Deterministic per-run seed: base_seed folded with the swept value and
// the repeat index, so any record can be reproduced in isolation.
std::uint64_t run_seed(std::uint64_t base_seed, double value, int repeat);

// Stable id from the canonical spec text, the value and the repeat; 16 hex
// digits.
std::string run_id_for(const std::string& spec_digest_text, double value,
                       int repeat);

// Fixed-order key = value rendering of the whole spec; doubles at full
// precision. Equal specs produce equal text, which seeds run ids and the
// manifest.
std::string canonical_spec_text(const SweepSpec& spec);

// The swept value written into a copy of the base config.
pipeline::PipelineConfig apply_value(const pipeline::PipelineConfig& base,
                                     SweepVariable variable, double value);

// values x repeats runs, distributed over the worker pool. Per-run
// divergence is flagged in the record; a value whose repeats all diverge
// aborts with SweepError naming it. Records come back ordered by
// (value index, repeat) regardless of scheduling.
std::vector<RunRecord> run_sweep(const SweepSpec& spec);

// Group by value (input order), mean/std/band over the non-diverged
// repeats.
std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records);

void emit_records_csv(const std::vector<RunRecord>& records,
                      const std::filesystem::path& path);
std::vector<RunRecord> read_records_csv(const std::filesystem::path& path);
void emit_summary_csv(const std::vector<SummaryRow>& rows,
                      const std::filesystem::path& path);

struct PlotSeries {
  std::string label;
  std::vector<SummaryRow> rows;
  std::string color;  // empty = pick from the default cycle
};

// Self-contained SVG: shaded band polygon plus mean polyline per series,
// axes with ticks, legend. At least one series with >= 2 rows.
void emit_plot(const std::vector<PlotSeries>& series,
               const std::string& x_label, const std::string& y_label,
               const std::filesystem::path& path);

// Flat key = value sweep config; unknown or duplicate keys are errors.
SweepSpec parse_sweep_config(
    const std::vector<std::pair<std::string, std::string>>& entries,
    const std::string& origin);
SweepSpec load_sweep_config(const std::filesystem::path& path);

// Companion record of a finished sweep: spec text, per-run seeds, library
// version, summary table.
void write_manifest(const SweepSpec& spec,
                    const std::vector<RunRecord>& records,
                    const std::vector<SummaryRow>& summary,
                    const std::filesystem::path& path);

// CILAB_THREADS override, else hardware concurrency, at least 1.
int worker_count();

}  // namespace harness
}  // namespace cilab
