#include "cilab/synthdata.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "cilab/errors.hpp"
#include "cilab/textio.hpp"
#include "cilab/version.hpp"

namespace cilab {
namespace synth {

namespace {

void check_dims(int dx, int dz, int dy, const char* family) {
  if (dx < 1 || dz < 1 || dy < 1) {
    throw InputError(std::string(family) + ": dims must be positive");
  }
  if (dz > dx) throw InputError(std::string(family) + ": dz > dx");
  if (dy > dz) throw InputError(std::string(family) + ": dy > dz");
}

std::string fmt(double v) { return textio::format_real(v, 17); }

}  // namespace

int resolved_n0(const SplitConfig& cfg, Eigen::Index n2) {
  int n0 = cfg.n0;
  if (n0 == 0) {
    if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) {
      throw InputError("SplitConfig: alpha must be in (0,1)");
    }
    n0 = static_cast<int>(std::lround(cfg.alpha * static_cast<double>(n2)));
  }
  if (n0 < 1 || n0 >= n2) {
    throw InputError("SplitConfig: need 0 < n0 < n2, got n0 = " +
                     std::to_string(n0) + ", n2 = " + std::to_string(n2));
  }
  return n0;
}

Dataset sample_prefix_gaussian(const PrefixGaussianSpec& spec, int n,
                               RandomSource& rng) {
  check_dims(spec.dx, spec.dz, spec.dy, "prefix_gaussian");
  if (spec.noise_z < 0.0 || spec.noise_y < 0.0) {
    throw InputError("prefix_gaussian: negative noise");
  }
  if (n < 1) throw InputError("prefix_gaussian: n < 1");
  const std::uint64_t seed = rng.seed();
  // draw order: x, then z-noise, then y-noise
  Dataset data;
  data.x = linalg::gaussian_matrix(spec.dx, n, rng);
  Matrix z = data.x.topRows(spec.dz);
  if (spec.noise_z > 0.0) {
    z += spec.noise_z * linalg::gaussian_matrix(spec.dz, n, rng);
  }
  Matrix y = data.x.topRows(spec.dy);
  if (spec.noise_y > 0.0) {
    y += spec.noise_y * linalg::gaussian_matrix(spec.dy, n, rng);
  }
  data.z = std::move(z);
  data.y = std::move(y);
  data.provenance.family = "prefix_gaussian";
  data.provenance.seed = seed;
  data.provenance.fields = {{"dx", std::to_string(spec.dx)},
                            {"dz", std::to_string(spec.dz)},
                            {"dy", std::to_string(spec.dy)},
                            {"noise_z", fmt(spec.noise_z)},
                            {"noise_y", fmt(spec.noise_y)}};
  return data;
}

Dataset sample_sigma_linear(const SigmaLinearSpec& spec, int n,
                            RandomSource& rng) {
  check_dims(spec.dx, spec.dz, spec.dy, "sigma_linear");
  if (spec.sigma <= 0.0) throw InputError("sigma_linear: sigma <= 0");
  if (spec.noise_z < 0.0) throw InputError("sigma_linear: negative noise");
  if (n < spec.dz) {
    throw InputError("sigma_linear: need n >= dz for in-sample whitening");
  }
  const std::uint64_t seed = rng.seed();
  // draw order: x, z-noise, U, V
  Dataset data;
  data.x = linalg::gaussian_matrix(spec.dx, n, rng);
  Matrix z_raw = data.x.topRows(spec.dz);
  if (spec.noise_z > 0.0) {
    z_raw += spec.noise_z * linalg::gaussian_matrix(spec.dz, n, rng);
  }
  // whiten in-sample: E_hat[z z^T] = I up to eigensolver rounding
  const Matrix s = linalg::second_moment(z_raw);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
  if (eig.info() != Eigen::Success ||
      eig.eigenvalues().minCoeff() <= 0.0) {
    throw SingularityError("sigma_linear: raw z second moment is singular");
  }
  const Matrix whitener = eig.eigenvectors() *
                          eig.eigenvalues().cwiseSqrt().cwiseInverse()
                              .asDiagonal() *
                          eig.eigenvectors().transpose();
  Matrix z = whitener * z_raw;

  const Matrix u = linalg::random_orthogonal(spec.dy, rng);
  const Matrix v = linalg::random_orthogonal(spec.dz, rng);
  auto truth = std::make_shared<SigmaLinearTruth>();
  truth->sigma = spec.sigma;
  truth->b = spec.sigma * u * v.leftCols(spec.dy).transpose();
  truth->whitener = whitener;
  data.y = truth->b * z;
  data.z = std::move(z);
  data.provenance.family = "sigma_linear";
  data.provenance.seed = seed;
  data.provenance.fields = {{"dx", std::to_string(spec.dx)},
                            {"dz", std::to_string(spec.dz)},
                            {"dy", std::to_string(spec.dy)},
                            {"sigma", fmt(spec.sigma)},
                            {"noise_z", fmt(spec.noise_z)}};
  data.provenance.truth = std::move(truth);
  return data;
}

Dataset sample(const DistributionSpec& spec, int n, RandomSource& rng) {
  if (const auto* p = std::get_if<PrefixGaussianSpec>(&spec)) {
    return sample_prefix_gaussian(*p, n, rng);
  }
  return sample_sigma_linear(std::get<SigmaLinearSpec>(spec), n, rng);
}

Dataset slice_columns(const Dataset& data, Eigen::Index begin,
                      Eigen::Index count) {
  if (begin < 0 || count < 1 || begin + count > data.cols()) {
    throw InputError("slice_columns: range [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of 0.." +
                     std::to_string(data.cols()));
  }
  Dataset out;
  out.x = data.x.middleCols(begin, count);
  if (data.z) out.z = data.z->middleCols(begin, count);
  if (data.y) out.y = data.y->middleCols(begin, count);
  out.provenance = data.provenance;
  return out;
}

std::pair<Dataset, Dataset> split_downstream(const Dataset& data,
                                             const SplitConfig& cfg,
                                             RandomSource& rng) {
  const Eigen::Index n2 = data.cols();
  const int n0 = resolved_n0(cfg, n2);
  // Fisher-Yates on the column index vector
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n2));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  for (Eigen::Index i = n2 - 1; i > 0; --i) {
    const auto j = static_cast<Eigen::Index>(
        rng.uniform_index(static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[static_cast<std::size_t>(i)],
              perm[static_cast<std::size_t>(j)]);
  }
  auto gather = [&](Eigen::Index from, Eigen::Index count) {
    Dataset out;
    out.x.resize(data.x.rows(), count);
    if (data.z) out.z = Matrix(data.z->rows(), count);
    if (data.y) out.y = Matrix(data.y->rows(), count);
    for (Eigen::Index k = 0; k < count; ++k) {
      const Eigen::Index c = perm[static_cast<std::size_t>(from + k)];
      out.x.col(k) = data.x.col(c);
      if (data.z) out.z->col(k) = data.z->col(c);
      if (data.y) out.y->col(k) = data.y->col(c);
    }
    out.provenance = data.provenance;
    return out;
  };
  return {gather(0, n0), gather(n0, n2 - n0)};
}

void export_dataset(const Dataset& data, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  textio::write_block_csv(data.x, dir / "x.csv");
  std::string blocks = "x";
  if (data.z) {
    textio::write_block_csv(*data.z, dir / "z.csv");
    blocks += ",z";
  }
  if (data.y) {
    textio::write_block_csv(*data.y, dir / "y.csv");
    blocks += ",y";
  }
  std::ofstream man(dir / "manifest.txt");
  if (!man) throw IoError("cannot write manifest in " + dir.string());
  man << "# cilab dataset manifest\n";
  man << "version = " << kVersion << "\n";
  man << "family = " << data.provenance.family << "\n";
  man << "seed = " << data.provenance.seed << "\n";
  man << "n = " << data.cols() << "\n";
  man << "blocks = " << blocks << "\n";
  for (const auto& [k, v] : data.provenance.fields) {
    man << k << " = " << v << "\n";
  }
  if (!man) throw IoError("manifest write failed in " + dir.string());
}

Dataset import_dataset(const std::filesystem::path& dir) {
  Dataset data;
  data.x = textio::read_block_csv(dir / "x.csv");
  if (std::filesystem::exists(dir / "z.csv")) {
    data.z = textio::read_block_csv(dir / "z.csv");
  }
  if (std::filesystem::exists(dir / "y.csv")) {
    data.y = textio::read_block_csv(dir / "y.csv");
  }
  for (const auto& [k, v] : textio::read_kv_file(dir / "manifest.txt")) {
    if (k == "family") {
      data.provenance.family = v;
    } else if (k == "seed") {
      data.provenance.seed = textio::parse_u64(v, "manifest seed");
    } else if (k == "version" || k == "n" || k == "blocks") {
      // structural entries, nothing to restore
    } else {
      data.provenance.fields.emplace_back(k, v);
    }
  }
  if ((data.z && data.z->cols() != data.cols()) ||
      (data.y && data.y->cols() != data.cols())) {
    throw IoError(dir.string() + ": block sample counts disagree");
  }
  return data;
}

}  // namespace synth
}  // namespace cilab
