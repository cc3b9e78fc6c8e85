#include "cilab/models.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "cilab/errors.hpp"
#include "cilab/textio.hpp"

namespace cilab {
namespace models {

namespace {

Matrix apply_act(Activation act, const Matrix& pre) {
  if (act == Activation::kTanh) {
    return pre.array().tanh();
  }
  return pre.cwiseMax(0.0);
}

// derivative expressed through the activation output (tanh' = 1 - h^2,
// relu' = [h > 0])
Matrix act_deriv_from_output(Activation act, const Matrix& h) {
  if (act == Activation::kTanh) {
    return 1.0 - h.array().square();
  }
  return (h.array() > 0.0).cast<double>();
}

void check_mlp_shape(const MlpShape& shape) {
  if (shape.widths.size() < 3) {
    throw InputError("MlpShape: need at least [in, hidden, out]");
  }
  for (int w : shape.widths) {
    if (w < 1) throw InputError("MlpShape: nonpositive width");
  }
}

void fill_gaussian_rowmajor(Matrix& m, RandomSource& rng, double std) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      m(i, j) = std * rng.gaussian();
    }
  }
}

}  // namespace

Processor init_processor(const ProcessorShape& shape, RandomSource& rng,
                         double weight_scale) {
  if (weight_scale < 0.0) throw InputError("init_processor: negative scale");
  if (const auto* lin = std::get_if<LinearShape>(&shape)) {
    if (lin->out_dim < 1 || lin->in_dim < 1) {
      throw InputError("LinearShape: nonpositive dims");
    }
    LinearProcessor f;
    f.a.resize(lin->out_dim, lin->in_dim);
    fill_gaussian_rowmajor(f.a, rng,
                           weight_scale / std::sqrt(double(lin->in_dim)));
    return f;
  }
  const auto& mlp = std::get<MlpShape>(shape);
  check_mlp_shape(mlp);
  MlpProcessor f;
  f.act = mlp.act;
  const std::size_t layers = mlp.widths.size() - 1;
  f.weights.resize(layers);
  f.biases.resize(layers);
  for (std::size_t l = 0; l < layers; ++l) {
    f.weights[l].resize(mlp.widths[l + 1], mlp.widths[l]);
    fill_gaussian_rowmajor(f.weights[l], rng,
                           weight_scale / std::sqrt(double(mlp.widths[l])));
    f.biases[l] = Vector::Zero(mlp.widths[l + 1]);
  }
  return f;
}

int input_dim(const Processor& f) {
  if (const auto* lin = std::get_if<LinearProcessor>(&f)) {
    return static_cast<int>(lin->a.cols());
  }
  return static_cast<int>(std::get<MlpProcessor>(f).weights.front().cols());
}

int output_dim(const Processor& f) {
  if (const auto* lin = std::get_if<LinearProcessor>(&f)) {
    return static_cast<int>(lin->a.rows());
  }
  return static_cast<int>(std::get<MlpProcessor>(f).weights.back().rows());
}

int param_count(const Processor& f) {
  if (const auto* lin = std::get_if<LinearProcessor>(&f)) {
    return static_cast<int>(lin->a.size());
  }
  const auto& mlp = std::get<MlpProcessor>(f);
  int n = 0;
  for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
    n += static_cast<int>(mlp.weights[l].size() + mlp.biases[l].size());
  }
  return n;
}

ProcessorShape shape_of(const Processor& f) {
  if (const auto* lin = std::get_if<LinearProcessor>(&f)) {
    return LinearShape{static_cast<int>(lin->a.rows()),
                       static_cast<int>(lin->a.cols())};
  }
  const auto& mlp = std::get<MlpProcessor>(f);
  MlpShape shape;
  shape.act = mlp.act;
  shape.widths.push_back(static_cast<int>(mlp.weights.front().cols()));
  for (const auto& w : mlp.weights) {
    shape.widths.push_back(static_cast<int>(w.rows()));
  }
  return shape;
}

Matrix forward(const Processor& f, const Matrix& x) {
  if (x.rows() != input_dim(f)) {
    throw InputError("forward: input has " + std::to_string(x.rows()) +
                     " rows, model expects " + std::to_string(input_dim(f)));
  }
  if (const auto* lin = std::get_if<LinearProcessor>(&f)) {
    return lin->a * x;
  }
  const auto& mlp = std::get<MlpProcessor>(f);
  Matrix h = x;
  const std::size_t last = mlp.weights.size() - 1;
  for (std::size_t l = 0; l < last; ++l) {
    h = apply_act(mlp.act,
                  (mlp.weights[l] * h).colwise() + mlp.biases[l]);
  }
  return (mlp.weights[last] * h).colwise() + mlp.biases[last];
}

Vector to_params(const Processor& f) {
  Vector p(param_count(f));
  Eigen::Index at = 0;
  auto push_rowmajor = [&](const Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        p[at++] = m(i, j);
      }
    }
  };
  if (const auto* lin = std::get_if<LinearProcessor>(&f)) {
    push_rowmajor(lin->a);
    return p;
  }
  const auto& mlp = std::get<MlpProcessor>(f);
  for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
    push_rowmajor(mlp.weights[l]);
    p.segment(at, mlp.biases[l].size()) = mlp.biases[l];
    at += mlp.biases[l].size();
  }
  return p;
}

Processor with_params(const Processor& like, const Vector& params) {
  if (params.size() != param_count(like)) {
    throw InputError("with_params: got " + std::to_string(params.size()) +
                     " params, model holds " +
                     std::to_string(param_count(like)));
  }
  Eigen::Index at = 0;
  auto pull_rowmajor = [&](Matrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        m(i, j) = params[at++];
      }
    }
  };
  Processor out = like;
  if (auto* lin = std::get_if<LinearProcessor>(&out)) {
    pull_rowmajor(lin->a);
    return out;
  }
  auto& mlp = std::get<MlpProcessor>(out);
  for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
    pull_rowmajor(mlp.weights[l]);
    mlp.biases[l] = params.segment(at, mlp.biases[l].size());
    at += mlp.biases[l].size();
  }
  return out;
}

Vector gradient(const Processor& f, const Matrix& x, const Matrix& upstream) {
  if (upstream.rows() != output_dim(f) || upstream.cols() != x.cols()) {
    throw InputError("gradient: upstream shape mismatch");
  }
  if (x.rows() != input_dim(f)) {
    throw InputError("gradient: input dim mismatch");
  }
  if (const auto* lin = std::get_if<LinearProcessor>(&f)) {
    Matrix ga = upstream * x.transpose();  // d<u, Ax>/dA
    Vector g(ga.size());
    Eigen::Index at = 0;
    for (Eigen::Index i = 0; i < ga.rows(); ++i) {
      for (Eigen::Index j = 0; j < ga.cols(); ++j) g[at++] = ga(i, j);
    }
    return g;
  }
  const auto& mlp = std::get<MlpProcessor>(f);
  const std::size_t layers = mlp.weights.size();
  // forward pass keeping activations; acts[l] is the input of layer l
  std::vector<Matrix> acts(layers + 1);
  acts[0] = x;
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    acts[l + 1] = apply_act(
        mlp.act, (mlp.weights[l] * acts[l]).colwise() + mlp.biases[l]);
  }
  acts[layers] = (mlp.weights[layers - 1] * acts[layers - 1]).colwise() +
                 mlp.biases[layers - 1];

  std::vector<Matrix> grad_w(layers);
  std::vector<Vector> grad_b(layers);
  Matrix delta = upstream;
  for (std::size_t l = layers; l-- > 0;) {
    grad_w[l] = delta * acts[l].transpose();
    grad_b[l] = delta.rowwise().sum();
    if (l > 0) {
      delta = (mlp.weights[l].transpose() * delta).array() *
              act_deriv_from_output(mlp.act, acts[l]).array();
    }
  }
  Vector g(param_count(f));
  Eigen::Index at = 0;
  for (std::size_t l = 0; l < layers; ++l) {
    for (Eigen::Index i = 0; i < grad_w[l].rows(); ++i) {
      for (Eigen::Index j = 0; j < grad_w[l].cols(); ++j) {
        g[at++] = grad_w[l](i, j);
      }
    }
    g.segment(at, grad_b[l].size()) = grad_b[l];
    at += grad_b[l].size();
  }
  return g;
}

void save_checkpoint(const Processor& f, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# cilab model checkpoint\n";
  if (const auto* lin = std::get_if<LinearProcessor>(&f)) {
    out << "kind = linear\n";
    out << "out_dim = " << lin->a.rows() << "\n";
    out << "in_dim = " << lin->a.cols() << "\n";
  } else {
    const auto& mlp = std::get<MlpProcessor>(f);
    out << "kind = mlp\n";
    out << "activation = " << activation_name(mlp.act) << "\n";
    out << "widths = ";
    const auto shape = std::get<MlpShape>(shape_of(f));
    for (std::size_t i = 0; i < shape.widths.size(); ++i) {
      out << (i ? "," : "") << shape.widths[i];
    }
    out << "\n";
  }
  const Vector p = to_params(f);
  out << "params = " << p.size() << "\n";
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    out << textio::format_real(p[i], 17) << "\n";
  }
  if (!out) throw IoError("write failed: " + path.string());
}

Processor load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::string kind, activation = "tanh";
  std::vector<int> widths;
  int out_dim = 0, in_dim = 0;
  long long n_params = -1;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = textio::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) break;  // reached the parameter block
    const std::string key = textio::trim(line.substr(0, eq));
    const std::string value = textio::trim(line.substr(eq + 1));
    if (key == "kind") {
      kind = value;
    } else if (key == "activation") {
      activation = value;
    } else if (key == "widths") {
      widths = textio::parse_int_list(value, "checkpoint widths");
    } else if (key == "out_dim") {
      out_dim = static_cast<int>(textio::parse_int(value, "out_dim"));
    } else if (key == "in_dim") {
      in_dim = static_cast<int>(textio::parse_int(value, "in_dim"));
    } else if (key == "params") {
      n_params = textio::parse_int(value, "params");
      break;
    } else {
      throw IoError(path.string() + ": unknown checkpoint key '" + key + "'");
    }
  }
  if (n_params < 0) throw IoError(path.string() + ": missing params count");
  Processor model;
  if (kind == "linear") {
    if (out_dim < 1 || in_dim < 1) {
      throw IoError(path.string() + ": bad linear dims");
    }
    model = LinearProcessor{Matrix::Zero(out_dim, in_dim)};
  } else if (kind == "mlp") {
    MlpShape shape;
    shape.widths = widths;
    shape.act = parse_activation(activation);
    check_mlp_shape(shape);
    RandomSource dummy(0);
    model = init_processor(shape, dummy, 0.0);
  } else {
    throw IoError(path.string() + ": unknown model kind '" + kind + "'");
  }
  if (n_params != param_count(model)) {
    throw IoError(path.string() + ": parameter count mismatch");
  }
  Vector p(n_params);
  for (long long i = 0; i < n_params; ++i) {
    if (!std::getline(in, line)) {
      throw IoError(path.string() + ": truncated parameter block");
    }
    p[i] = textio::parse_real(line, "checkpoint param");
  }
  return with_params(model, p);
}

const char* activation_name(Activation a) {
  return a == Activation::kTanh ? "tanh" : "relu";
}

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "relu") return Activation::kRelu;
  throw ConfigError("unknown activation '" + name + "'");
}

}  // namespace models
}  // namespace cilab
