#include "cilab/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "cilab/textio.hpp"
#include "cilab/version.hpp"

namespace cilab {
namespace harness {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;

std::string fmt17(double v) { return textio::format_real(v, 17); }
std::string fmt12(double v) { return textio::format_real(v, 12); }

// empty cell when the number never materialized
std::string cell(double v) { return std::isfinite(v) ? fmt12(v) : ""; }

int checked_int(double value, const char* what) {
  const double r = std::round(value);
  if (!(value > 0.0) || std::abs(value - r) > 1e-9) {
    throw ConfigError(std::string(what) + ": expected a positive integer, "
                      "got " + fmt12(value));
  }
  return static_cast<int>(r);
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

const char* head_mode_name(const trainer::HeadMode& m) {
  return std::holds_alternative<trainer::ExactRefit>(m) ? "exact" : "inner_gd";
}

}  // namespace

const char* sweep_variable_name(SweepVariable v) {
  switch (v) {
    case SweepVariable::kN0:
      return "n0";
    case SweepVariable::kLambda:
      return "lambda";
    case SweepVariable::kDf:
      return "df";
    case SweepVariable::kWidth:
      return "width";
    case SweepVariable::kN2:
      return "n2";
  }
  return "?";
}

SweepVariable parse_sweep_variable(const std::string& name) {
  if (name == "n0") return SweepVariable::kN0;
  if (name == "lambda") return SweepVariable::kLambda;
  if (name == "df") return SweepVariable::kDf;
  if (name == "width") return SweepVariable::kWidth;
  if (name == "n2") return SweepVariable::kN2;
  throw ConfigError("unknown sweep_variable '" + name + "'");
}

std::uint64_t run_seed(std::uint64_t base_seed, double value, int repeat) {
  const std::uint64_t vh = mix64(std::bit_cast<std::uint64_t>(value));
  return base_seed ^
         mix64(vh ^ (kGolden + static_cast<std::uint64_t>(repeat)));
}

std::string run_id_for(const std::string& spec_digest_text, double value,
                       int repeat) {
  std::uint64_t h = fnv1a(spec_digest_text);
  h = mix64(h ^ mix64(std::bit_cast<std::uint64_t>(value)) ^
            mix64(kGolden + static_cast<std::uint64_t>(repeat)));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::string canonical_spec_text(const SweepSpec& spec) {
  std::ostringstream out;
  const auto& base = spec.base;
  if (const auto* pre =
          std::get_if<synth::PrefixGaussianSpec>(&base.distribution)) {
    out << "distribution = prefix_gaussian\n";
    out << "dx = " << pre->dx << "\ndz = " << pre->dz << "\ndy = " << pre->dy
        << "\n";
    out << "noise_z = " << fmt17(pre->noise_z) << "\n";
    out << "noise_y = " << fmt17(pre->noise_y) << "\n";
  } else {
    const auto& sig = std::get<synth::SigmaLinearSpec>(base.distribution);
    out << "distribution = sigma_linear\n";
    out << "dx = " << sig.dx << "\ndz = " << sig.dz << "\ndy = " << sig.dy
        << "\n";
    out << "sigma = " << fmt17(sig.sigma) << "\n";
    out << "noise_z = " << fmt17(sig.noise_z) << "\n";
  }
  out << "n1 = " << base.n1 << "\nn2 = " << base.n2 << "\nnt = " << base.nt
      << "\n";
  out << "n0 = " << base.split.n0 << "\n";
  out << "alpha = " << fmt17(base.split.alpha) << "\n";
  out << "lambda = " << fmt17(base.loss.lambda) << "\n";
  if (!base.processor) {
    out << "processor = none\n";
  } else if (const auto* lin =
                 std::get_if<models::LinearShape>(&*base.processor)) {
    out << "processor = linear\n";
    out << "df = " << lin->out_dim << "\n";
  } else {
    const auto& mlp = std::get<models::MlpShape>(*base.processor);
    out << "processor = mlp\n";
    out << "hidden = ";
    for (std::size_t i = 1; i + 1 < mlp.widths.size(); ++i) {
      out << (i > 1 ? "," : "") << mlp.widths[i];
    }
    out << "\n";
    out << "df = " << mlp.widths.back() << "\n";
    out << "activation = " << models::activation_name(mlp.act) << "\n";
  }
  out << "init_scale = " << fmt17(base.init_scale) << "\n";
  out << "outer_steps = " << base.train.outer_steps << "\n";
  out << "learning_rate = " << fmt17(base.train.learning_rate) << "\n";
  out << "head_mode = " << head_mode_name(base.train.head_mode) << "\n";
  if (const auto* gd = std::get_if<trainer::InnerGd>(&base.train.head_mode)) {
    out << "inner_steps = " << gd->steps << "\n";
    out << "inner_lr = " << fmt17(gd->lr) << "\n";
  }
  out << "ridge = " << fmt17(base.train.ridge.value) << "\n";
  out << "ridge_mode = "
      << (base.train.ridge.mode == RidgeParam::Mode::kAbsolute ? "absolute"
                                                               : "relative")
      << "\n";
  out << "convergence_tol = " << fmt17(base.train.convergence_tol) << "\n";
  out << "extra_down1 = " << (base.extra_down1 ? "true" : "false") << "\n";
  out << "sweep_variable = " << sweep_variable_name(spec.variable) << "\n";
  out << "values = ";
  for (std::size_t i = 0; i < spec.values.size(); ++i) {
    out << (i ? "," : "") << fmt17(spec.values[i]);
  }
  out << "\n";
  out << "repeats = " << spec.repeats << "\n";
  out << "base_seed = " << spec.base_seed << "\n";
  return out.str();
}

pipeline::PipelineConfig apply_value(const pipeline::PipelineConfig& base,
                                     SweepVariable variable, double value) {
  pipeline::PipelineConfig cfg = base;
  switch (variable) {
    case SweepVariable::kN0: {
      const int n0 = checked_int(value, "n0 value");
      if (!(cfg.split.alpha > 0.0 && cfg.split.alpha < 1.0)) {
        throw ConfigError("n0 sweep: alpha must be in (0,1)");
      }
      cfg.split.n0 = n0;
      cfg.n2 = static_cast<int>(
          std::lround(static_cast<double>(n0) / cfg.split.alpha));
      break;
    }
    case SweepVariable::kLambda:
      if (!(value > 0.0)) throw ConfigError("lambda value must be > 0");
      cfg.loss.lambda = value;
      break;
    case SweepVariable::kDf: {
      const int df = checked_int(value, "df value");
      if (!cfg.processor) {
        throw ConfigError("df sweep needs a processor family");
      }
      if (auto* lin = std::get_if<models::LinearShape>(&*cfg.processor)) {
        lin->out_dim = df;
      } else {
        std::get<models::MlpShape>(*cfg.processor).widths.back() = df;
      }
      break;
    }
    case SweepVariable::kWidth: {
      const int w = checked_int(value, "width value");
      if (!cfg.processor ||
          !std::holds_alternative<models::MlpShape>(*cfg.processor)) {
        throw ConfigError("width sweep needs an mlp processor");
      }
      auto& widths = std::get<models::MlpShape>(*cfg.processor).widths;
      for (std::size_t i = 1; i + 1 < widths.size(); ++i) widths[i] = w;
      break;
    }
    case SweepVariable::kN2:
      cfg.n2 = checked_int(value, "n2 value");
      break;
  }
  return cfg;
}

int worker_count() {
  if (const char* env = std::getenv("CILAB_THREADS")) {
    try {
      const int n = static_cast<int>(
          textio::parse_int(env, "CILAB_THREADS"));
      if (n >= 1) return std::min(n, 256);
    } catch (const ConfigError&) {
      // fall through to the hardware default
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::vector<RunRecord> run_sweep(const SweepSpec& spec) {
  if (spec.values.empty()) throw InputError("run_sweep: no values");
  if (spec.repeats < 1) throw InputError("run_sweep: repeats < 1");
  if (spec.values.size() > 1) {
    const bool up = spec.values[1] > spec.values[0];
    for (std::size_t i = 1; i < spec.values.size(); ++i) {
      if ((up && spec.values[i] <= spec.values[i - 1]) ||
          (!up && spec.values[i] >= spec.values[i - 1]))
        throw InputError("run_sweep: values must be strictly monotone");
    }
  }
  const std::string digest = canonical_spec_text(spec);
  const std::string var_name = sweep_variable_name(spec.variable);

  struct Task {
    std::size_t value_idx;
    int repeat;
  };
  std::vector<Task> tasks;
  tasks.reserve(spec.values.size() * static_cast<std::size_t>(spec.repeats));
  for (std::size_t v = 0; v < spec.values.size(); ++v) {
    for (int r = 0; r < spec.repeats; ++r) tasks.push_back({v, r});
  }

  std::vector<RunRecord> records(tasks.size());
  std::atomic<std::size_t> cursor{0};
  std::mutex err_mu;
  std::exception_ptr first_error;

  auto run_one = [&](const Task& task) {
    const double value = spec.values[task.value_idx];
    RunRecord rec;
    rec.run_id = run_id_for(digest, value, task.repeat);
    rec.sweep_var = var_name;
    rec.value = value;
    rec.repeat = task.repeat;
    rec.seed = run_seed(spec.base_seed, value, task.repeat);
    const pipeline::PipelineConfig cfg =
        apply_value(spec.base, spec.variable, value);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      const pipeline::SslResult res =
          cfg.processor ? pipeline::run_processor_ssl(cfg, rec.seed)
                        : pipeline::run_standard_ssl(cfg, rec.seed);
      rec.mse_test = res.mse_test;
      rec.c1_residual = res.criteria.c1_residual;
      rec.c2_gap = res.criteria.c2_gap;
      rec.train_total = res.train_loss.total;
      rec.train_down = res.train_loss.downstream_term;
      rec.train_pre = res.train_loss.pretext_term;
    } catch (const trainer::DivergenceError& e) {
      rec.diverged = true;
      const double nan = std::numeric_limits<double>::quiet_NaN();
      rec.mse_test = rec.c1_residual = rec.c2_gap = nan;
      rec.train_total = rec.train_down = rec.train_pre = nan;
      if (!e.trace().steps.empty()) {
        const auto& last = e.trace().steps.back();
        rec.train_total = last.loss.total;
        rec.train_down = last.loss.downstream_term;
        rec.train_pre = last.loss.pretext_term;
      }
    }
    rec.wallclock_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
    return rec;
  };

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= tasks.size()) return;
      {
        std::lock_guard<std::mutex> lk(err_mu);
        if (first_error) return;  // stop picking up work after a failure
      }
      try {
        records[i] = run_one(tasks[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lk(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };

  const int n_workers = std::min<std::size_t>(
      static_cast<std::size_t>(worker_count()), tasks.size());
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_workers));
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  for (std::size_t v = 0; v < spec.values.size(); ++v) {
    bool any_ok = false;
    for (int r = 0; r < spec.repeats; ++r) {
      if (!records[v * static_cast<std::size_t>(spec.repeats) +
                   static_cast<std::size_t>(r)]
               .diverged) {
        any_ok = true;
        break;
      }
    }
    if (!any_ok) {
      throw SweepError("run_sweep: every repeat diverged at " + var_name +
                       " = " + fmt12(spec.values[v]));
    }
  }
  return records;
}

std::vector<SummaryRow> summarize(const std::vector<RunRecord>& records) {
  if (records.empty()) throw InputError("summarize: no records");
  std::vector<double> order;  // values in first-appearance order
  for (const auto& r : records) {
    bool seen = false;
    for (double v : order) {
      if (v == r.value) {
        seen = true;
        break;
      }
    }
    if (!seen) order.push_back(r.value);
  }
  std::vector<SummaryRow> rows;
  rows.reserve(order.size());
  for (double v : order) {
    std::vector<double> mses;
    for (const auto& r : records) {
      if (r.value == v && !r.diverged && std::isfinite(r.mse_test)) {
        mses.push_back(r.mse_test);
      }
    }
    if (mses.empty()) {
      throw InputError("summarize: no usable repeats at value " + fmt12(v));
    }
    SummaryRow row;
    row.value = v;
    row.repeats = static_cast<int>(mses.size());
    double mean = 0.0;
    for (double m : mses) mean += m;
    mean /= static_cast<double>(mses.size());
    double var = 0.0;
    if (mses.size() > 1) {
      for (double m : mses) var += (m - mean) * (m - mean);
      var /= static_cast<double>(mses.size() - 1);
    }
    row.mean_mse = mean;
    row.std_mse = std::sqrt(var);
    const double half =
        kBandMultiplier * row.std_mse / std::sqrt(double(mses.size()));
    row.ci_low = mean - half;
    row.ci_high = mean + half;
    rows.push_back(row);
  }
  return rows;
}

void emit_records_csv(const std::vector<RunRecord>& records,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "run_id,sweep_var,value,repeat,seed,mse_test,c1_residual,c2_gap,"
         "train_total,train_down,train_pre,wallclock_ms\n";
  for (const auto& r : records) {
    out << r.run_id << ',' << r.sweep_var << ',' << fmt12(r.value) << ','
        << r.repeat << ',' << r.seed << ',' << cell(r.mse_test) << ','
        << cell(r.c1_residual) << ',' << cell(r.c2_gap) << ','
        << cell(r.train_total) << ',' << cell(r.train_down) << ','
        << cell(r.train_pre) << ',' << r.wallclock_ms << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<RunRecord> read_records_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + ": empty");
  const std::string expect =
      "run_id,sweep_var,value,repeat,seed,mse_test,c1_residual,c2_gap,"
      "train_total,train_down,train_pre,wallclock_ms";
  if (textio::trim(line) != expect) {
    throw IoError(path.string() + ": unexpected header");
  }
  std::vector<RunRecord> records;
  while (std::getline(in, line)) {
    if (textio::trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::string c;
    std::istringstream ls(line);
    while (std::getline(ls, c, ',')) cells.push_back(c);
    // a trailing empty cell is eaten by getline; pad
    while (cells.size() < 12) cells.push_back("");
    if (cells.size() != 12) {
      throw IoError(path.string() + ": bad record row '" + line + "'");
    }
    RunRecord r;
    r.run_id = cells[0];
    r.sweep_var = cells[1];
    r.value = textio::parse_real(cells[2], "value");
    r.repeat = static_cast<int>(textio::parse_int(cells[3], "repeat"));
    r.seed = textio::parse_u64(cells[4], "seed");
    auto opt = [&](const std::string& s) {
      return s.empty() ? std::numeric_limits<double>::quiet_NaN()
                       : textio::parse_real(s, "record cell");
    };
    r.mse_test = opt(cells[5]);
    r.c1_residual = opt(cells[6]);
    r.c2_gap = opt(cells[7]);
    r.train_total = opt(cells[8]);
    r.train_down = opt(cells[9]);
    r.train_pre = opt(cells[10]);
    r.diverged = !std::isfinite(r.mse_test);
    r.wallclock_ms = textio::parse_int(cells[11], "wallclock_ms");
    records.push_back(std::move(r));
  }
  return records;
}

void emit_summary_csv(const std::vector<SummaryRow>& rows,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "value,mean_mse,std_mse,ci_low,ci_high,repeats\n";
  for (const auto& r : rows) {
    out << fmt12(r.value) << ',' << fmt12(r.mean_mse) << ','
        << fmt12(r.std_mse) << ',' << fmt12(r.ci_low) << ','
        << fmt12(r.ci_high) << ',' << r.repeats << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void emit_plot(const std::vector<PlotSeries>& series,
               const std::string& x_label, const std::string& y_label,
               const std::filesystem::path& path) {
  if (series.empty()) throw InputError("emit_plot: no series");
  for (const auto& s : series) {
    if (s.rows.size() < 2) {
      throw InputError("emit_plot: series '" + s.label +
                       "' needs >= 2 points");
    }
  }
  const double width = 640.0, height = 440.0;
  const double ml = 70.0, mr = 20.0, mt = 20.0, mb = 50.0;
  const double pw = width - ml - mr, ph = height - mt - mb;

  double xmin = series[0].rows[0].value, xmax = xmin;
  double ymax = 0.0;
  for (const auto& s : series) {
    for (const auto& r : s.rows) {
      xmin = std::min(xmin, r.value);
      xmax = std::max(xmax, r.value);
      ymax = std::max({ymax, r.ci_high, r.mean_mse});
    }
  }
  if (xmax <= xmin) xmax = xmin + 1.0;
  const double ymin = 0.0;
  if (ymax <= ymin) ymax = ymin + 1.0;
  ymax *= 1.08;

  auto sx = [&](double v) { return ml + (v - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double v) {
    return mt + ph - (v - ymin) / (ymax - ymin) * ph;
  };
  auto num = [&](double v) { return textio::format_real(v, 12); };

  static const char* kCycle[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
      << height << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw
      << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n";
  // ticks
  const int n_ticks = 5;
  for (int i = 0; i <= n_ticks; ++i) {
    const double fx = xmin + (xmax - xmin) * i / n_ticks;
    const double fy = ymin + (ymax - ymin) * i / n_ticks;
    out << "<line x1=\"" << num(sx(fx)) << "\" y1=\"" << mt + ph << "\" x2=\""
        << num(sx(fx)) << "\" y2=\"" << mt + ph + 5
        << "\" stroke=\"#333\"/>\n";
    out << "<text x=\"" << num(sx(fx)) << "\" y=\"" << mt + ph + 18
        << "\" font-size=\"11\" text-anchor=\"middle\">"
        << textio::format_real(fx, 6) << "</text>\n";
    out << "<line x1=\"" << ml - 5 << "\" y1=\"" << num(sy(fy)) << "\" x2=\""
        << ml << "\" y2=\"" << num(sy(fy)) << "\" stroke=\"#333\"/>\n";
    out << "<text x=\"" << ml - 8 << "\" y=\"" << num(sy(fy) + 4)
        << "\" font-size=\"11\" text-anchor=\"end\">"
        << textio::format_real(fy, 6) << "</text>\n";
  }
  out << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 12
      << "\" font-size=\"13\" text-anchor=\"middle\">" << x_label
      << "</text>\n";
  out << "<text x=\"16\" y=\"" << mt + ph / 2
      << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 "
         "16 "
      << mt + ph / 2 << ")\">" << y_label << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const std::string color =
        s.color.empty() ? kCycle[si % 4] : s.color;
    // band: upper edge left-to-right, lower edge back
    out << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" "
        << "stroke=\"none\" points=\"";
    for (const auto& r : s.rows) {
      out << num(sx(r.value)) << "," << num(sy(r.ci_high)) << " ";
    }
    for (auto it = s.rows.rbegin(); it != s.rows.rend(); ++it) {
      out << num(sx(it->value)) << "," << num(sy(it->ci_low)) << " ";
    }
    out << "\"/>\n";
    out << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.8\" points=\"";
    for (const auto& r : s.rows) {
      out << num(sx(r.value)) << "," << num(sy(r.mean_mse)) << " ";
    }
    out << "\"/>\n";
    out << "<text x=\"" << ml + pw - 8 << "\" y=\"" << mt + 16 + 16 * si
        << "\" font-size=\"12\" text-anchor=\"end\" fill=\"" << color << "\">"
        << s.label << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw IoError("write failed: " + path.string());
}

SweepSpec parse_sweep_config(
    const std::vector<std::pair<std::string, std::string>>& entries,
    const std::string& origin) {
  std::set<std::string> seen;
  for (const auto& [k, v] : entries) {
    if (!seen.insert(k).second) {
      throw ConfigError(origin + ": duplicate key '" + k + "'");
    }
  }
  auto find = [&](const char* key) -> const std::string* {
    for (const auto& [k, v] : entries) {
      if (k == key) return &v;
    }
    return nullptr;
  };

  SweepSpec spec;
  // distribution family first; its fields depend on it
  std::string family = "prefix_gaussian";
  if (const auto* v = find("distribution")) family = *v;
  synth::PrefixGaussianSpec pre;
  synth::SigmaLinearSpec sig;
  const bool is_prefix = family == "prefix_gaussian";
  if (!is_prefix && family != "sigma_linear") {
    throw ConfigError(origin + ": unknown distribution '" + family + "'");
  }

  std::string processor = "none";
  std::vector<int> hidden = {32};
  std::string activation = "tanh";
  int df = 5;
  std::string head_mode = "exact";
  trainer::InnerGd inner;
  auto& base = spec.base;

  for (const auto& [key, value] : entries) {
    if (key == "distribution") {
      // handled above
    } else if (key == "dx") {
      pre.dx = sig.dx = static_cast<int>(textio::parse_int(value, key));
    } else if (key == "dz") {
      pre.dz = sig.dz = static_cast<int>(textio::parse_int(value, key));
    } else if (key == "dy") {
      pre.dy = sig.dy = static_cast<int>(textio::parse_int(value, key));
    } else if (key == "noise_z") {
      pre.noise_z = sig.noise_z = textio::parse_real(value, key);
    } else if (key == "noise_y") {
      if (!is_prefix) {
        throw ConfigError(origin + ": noise_y only applies to "
                          "prefix_gaussian");
      }
      pre.noise_y = textio::parse_real(value, key);
    } else if (key == "sigma") {
      if (is_prefix) {
        throw ConfigError(origin + ": sigma only applies to sigma_linear");
      }
      sig.sigma = textio::parse_real(value, key);
    } else if (key == "n1") {
      base.n1 = static_cast<int>(textio::parse_int(value, key));
    } else if (key == "n2") {
      base.n2 = static_cast<int>(textio::parse_int(value, key));
    } else if (key == "nt") {
      base.nt = static_cast<int>(textio::parse_int(value, key));
    } else if (key == "n0") {
      base.split.n0 = static_cast<int>(textio::parse_int(value, key));
    } else if (key == "alpha") {
      base.split.alpha = textio::parse_real(value, key);
    } else if (key == "lambda") {
      base.loss.lambda = textio::parse_real(value, key);
    } else if (key == "processor") {
      processor = value;
    } else if (key == "df") {
      df = static_cast<int>(textio::parse_int(value, key));
    } else if (key == "hidden") {
      hidden = textio::parse_int_list(value, key);
    } else if (key == "activation") {
      activation = value;
    } else if (key == "init_scale") {
      base.init_scale = textio::parse_real(value, key);
    } else if (key == "outer_steps") {
      base.train.outer_steps = static_cast<int>(textio::parse_int(value, key));
    } else if (key == "learning_rate") {
      base.train.learning_rate = textio::parse_real(value, key);
    } else if (key == "head_mode") {
      head_mode = value;
    } else if (key == "inner_steps") {
      inner.steps = static_cast<int>(textio::parse_int(value, key));
    } else if (key == "inner_lr") {
      inner.lr = textio::parse_real(value, key);
    } else if (key == "ridge") {
      base.train.ridge.value = textio::parse_real(value, key);
    } else if (key == "ridge_mode") {
      if (value == "absolute") {
        base.train.ridge.mode = RidgeParam::Mode::kAbsolute;
      } else if (value == "relative") {
        base.train.ridge.mode = RidgeParam::Mode::kRelative;
      } else {
        throw ConfigError(origin + ": bad ridge_mode '" + value + "'");
      }
    } else if (key == "convergence_tol") {
      base.train.convergence_tol = textio::parse_real(value, key);
    } else if (key == "extra_down1") {
      base.extra_down1 = textio::parse_bool(value, key);
    } else if (key == "sweep_variable") {
      spec.variable = parse_sweep_variable(value);
    } else if (key == "values") {
      spec.values = textio::parse_real_list(value, key);
    } else if (key == "repeats") {
      spec.repeats = static_cast<int>(textio::parse_int(value, key));
    } else if (key == "base_seed") {
      spec.base_seed = textio::parse_u64(value, key);
    } else {
      throw ConfigError(origin + ": unknown key '" + key + "'");
    }
  }

  if (is_prefix) {
    base.distribution = pre;
  } else {
    base.distribution = sig;
  }
  if (processor == "none") {
    base.processor.reset();
  } else if (processor == "linear") {
    const int dx = is_prefix ? pre.dx : sig.dx;
    base.processor = models::LinearShape{df, dx};
  } else if (processor == "mlp") {
    models::MlpShape shape;
    shape.widths.push_back(is_prefix ? pre.dx : sig.dx);
    for (int h : hidden) shape.widths.push_back(h);
    shape.widths.push_back(df);
    shape.act = models::parse_activation(activation);
    base.processor = shape;
  } else {
    throw ConfigError(origin + ": unknown processor '" + processor + "'");
  }
  if (head_mode == "exact") {
    base.train.head_mode = trainer::ExactRefit{};
  } else if (head_mode == "inner_gd") {
    base.train.head_mode = inner;
  } else {
    throw ConfigError(origin + ": unknown head_mode '" + head_mode + "'");
  }
  if (!find("values")) {
    throw ConfigError(origin + ": missing required key 'values'");
  }
  return spec;
}

SweepSpec load_sweep_config(const std::filesystem::path& path) {
  return parse_sweep_config(textio::read_kv_file(path),
                            path.filename().string());
}

void write_manifest(const SweepSpec& spec,
                    const std::vector<RunRecord>& records,
                    const std::vector<SummaryRow>& summary,
                    const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# cilab sweep manifest\n";
  out << "version = " << kVersion << "\n";
  out << "workers = " << worker_count() << "\n";
  out << "\n[spec]\n" << canonical_spec_text(spec);
  out << "\n[runs]\n";
  for (const auto& r : records) {
    out << r.run_id << " value=" << fmt12(r.value) << " repeat=" << r.repeat
        << " seed=" << r.seed << (r.diverged ? " diverged" : "") << "\n";
  }
  out << "\n[summary]\n";
  out << "value,mean_mse,std_mse,ci_low,ci_high,repeats\n";
  for (const auto& r : summary) {
    out << fmt12(r.value) << ',' << fmt12(r.mean_mse) << ','
        << fmt12(r.std_mse) << ',' << fmt12(r.ci_low) << ','
        << fmt12(r.ci_high) << ',' << r.repeats << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace harness
}  // namespace cilab
