#pragma once

#include <filesystem>
#include <variant>
#include <vector>

#include "cilab/linalg.hpp"
#include "cilab/rng.hpp"

namespace cilab {
namespace models {

enum class Activation { kTanh, kRelu };

// f(x) = A x. No bias: the data families are centered.
struct LinearProcessor {
  Matrix a;  // out_dim x in_dim
};

// Fully connected net; hidden layers use `act`, the last layer is affine.
// widths = [in, h1, ..., out].
struct MlpProcessor {
  std::vector<Matrix> weights;  // weights[l] is widths[l+1] x widths[l]
  std::vector<Vector> biases;
  Activation act = Activation::kTanh;
};

using Processor = std::variant<LinearProcessor, MlpProcessor>;

struct LinearShape {
  int out_dim = 0;
  int in_dim = 0;
};

struct MlpShape {
  std::vector<int> widths;  // [in, h1, ..., out], at least one hidden layer
  Activation act = Activation::kTanh;
};

using ProcessorShape = std::variant<LinearShape, MlpShape>;

// Gaussian init with std weight_scale / sqrt(fan_in) per layer, zero
// biases. weight_scale = 0 gives the identically-zero map. Weights are
// drawn row-major, layer by layer.
Processor init_processor(const ProcessorShape& shape, RandomSource& rng,
                         double weight_scale = 1.0);

int input_dim(const Processor& f);
int output_dim(const Processor& f);
int param_count(const Processor& f);
ProcessorShape shape_of(const Processor& f);

Matrix forward(const Processor& f, const Matrix& x);

// Flat parameter vector. Ordering: LinearProcessor: rows of A
// concatenated. MlpProcessor: per layer, rows of W_l then b_l, layers in
// order. with_params reverses the flattening into a model shaped like
// `like`.
Vector to_params(const Processor& f);
Processor with_params(const Processor& like, const Vector& params);

// d<upstream, f(x)> / d(params): the vector J^T u where J is the Jacobian
// of the stacked outputs. `upstream` is out_dim x n, one column per sample
// (sums over samples, no 1/n factor). ReLU uses subgradient 0 at 0.
Vector gradient(const Processor& f, const Matrix& x, const Matrix& upstream);

// Structured-text checkpoint: shape header plus the flat parameter list at
// full precision.
void save_checkpoint(const Processor& f, const std::filesystem::path& path);
Processor load_checkpoint(const std::filesystem::path& path);

const char* activation_name(Activation a);
Activation parse_activation(const std::string& name);

}  // namespace models
}  // namespace cilab
