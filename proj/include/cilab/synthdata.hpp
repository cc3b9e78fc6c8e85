#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cilab/linalg.hpp"
#include "cilab/rng.hpp"

namespace cilab {
namespace synth {

// x ~ N(0, I_dx); z = x[0:dz] + noise_z * eps1; y = x[0:dy] + noise_y * eps2.
// The pretext target is (up to noise) a prefix of the input, the label a
// shorter prefix of the same coordinates, so z carries everything y needs
// plus dz - dy nuisance directions.
struct PrefixGaussianSpec {
  int dx = 100;
  int dz = 80;
  int dy = 5;
  double noise_z = 0.01;
  double noise_y = 0.01;
};

// Whitened pretext target (E_hat[z z^T] = I exactly) with y = B z, where
// B = sigma * U [I_dy | 0] V^T for Haar orthogonal U, V: every singular
// value of B equals sigma. z is built from a Gaussian x like the prefix
// family and then whitened in-sample.
struct SigmaLinearSpec {
  int dx = 100;
  int dz = 80;
  int dy = 5;
  double sigma = 2.0;
  double noise_z = 0.0;
};

using DistributionSpec = std::variant<PrefixGaussianSpec, SigmaLinearSpec>;

// Realized label map of a sigma-linear draw. `whitener` maps the raw
// z-block of x to the whitened z, so tests can build exact oracles in
// x-coordinates.
struct SigmaLinearTruth {
  Matrix b;        // dy x dz
  double sigma;
  Matrix whitener;  // dz x dz
};

struct Provenance {
  std::string family;
  std::vector<std::pair<std::string, std::string>> fields;
  std::uint64_t seed = 0;
  std::shared_ptr<const SigmaLinearTruth> truth;  // sigma_linear only
};

// One sample per column across all blocks; z/y optional so the same type
// carries pretext-only or label-only data.
struct Dataset {
  Matrix x;
  std::optional<Matrix> z;
  std::optional<Matrix> y;
  Provenance provenance;

  Eigen::Index cols() const { return x.cols(); }
};

// Downstream split sizes. n0 > 0 pins the processor-training block
// directly; n0 == 0 derives it as round(alpha * n2).
struct SplitConfig {
  int n0 = 0;
  double alpha = 0.5;
};

int resolved_n0(const SplitConfig& cfg, Eigen::Index n2);

Dataset sample_prefix_gaussian(const PrefixGaussianSpec& spec, int n,
                               RandomSource& rng);
Dataset sample_sigma_linear(const SigmaLinearSpec& spec, int n,
                            RandomSource& rng);
Dataset sample(const DistributionSpec& spec, int n, RandomSource& rng);

// Columns [begin, begin+count); provenance (and sigma-linear truth) shared.
Dataset slice_columns(const Dataset& data, Eigen::Index begin,
                      Eigen::Index count);

// Random disjoint split of a downstream block into (down1 of n0 columns,
// down2 of the rest). Requires 0 < n0 < n2.
std::pair<Dataset, Dataset> split_downstream(const Dataset& data,
                                             const SplitConfig& cfg,
                                             RandomSource& rng);

// Directory layout: x.csv [, z.csv, y.csv] + manifest.txt. Cells round-trip
// doubles exactly; the manifest records family, spec fields and seed so a
// draw can be regenerated.
void export_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset import_dataset(const std::filesystem::path& dir);

}  // namespace synth
}  // namespace cilab
