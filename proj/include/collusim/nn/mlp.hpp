#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "collusim/random.hpp"

namespace collusim::nn {

enum class OutputActivation { Linear, Tanh };

/// Intermediate activations of one forward pass; acts[0] is the input.
struct MlpTape {
  std::vector<std::vector<double>> acts;
};

/// Shape of a fully connected network. Parameters live in a caller-owned flat span laid
/// out layer by layer as row-major weights (n_out x n_in) followed by n_out biases.
/// Hidden layers use tanh.
class MlpLayout {
 public:
  MlpLayout() = default;
  explicit MlpLayout(std::vector<int> sizes, OutputActivation output = OutputActivation::Linear);

  std::size_t param_count() const { return param_count_; }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  OutputActivation output_activation() const { return output_; }

  std::vector<double> forward(std::span<const double> params, std::span<const double> x) const;
  std::vector<double> forward(std::span<const double> params, std::span<const double> x, MlpTape& tape) const;

  /// Backpropagates `upstream` (d loss / d output). Adds d loss / d params into `grad`
  /// and returns d loss / d input.
  std::vector<double> backward(std::span<const double> params, const MlpTape& tape,
                               std::span<const double> upstream, std::span<double> grad) const;

  /// Orthogonal-style init: hidden layers with gain 1, last layer with `output_gain`; zero biases.
  void initialize(std::span<double> params, double output_gain, Rng& rng) const;

 private:
  std::vector<int> sizes_{1, 1};
  OutputActivation output_ = OutputActivation::Linear;
  std::size_t param_count_ = 2;
};

/// A layout with its own parameter vector.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<int> sizes, OutputActivation output = OutputActivation::Linear);

  const MlpLayout& layout() const { return layout_; }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::vector<double> forward(std::span<const double> x) const { return layout_.forward(params_, x); }

 private:
  MlpLayout layout_;
  std::vector<double> params_;
};

struct MlpGradient {
  std::vector<double> params;
  std::vector<double> input;
};

/// Exact gradient of <upstream, forward(x)> with respect to parameters and input.
MlpGradient mlp_grad(const Mlp& net, std::span<const double> x, std::span<const double> upstream);

/// Fills `m` (rows x cols, row-major) with scaled orthonormal rows/columns.
void orthogonal_fill(std::span<double> m, int rows, int cols, double gain, Rng& rng);

}  // namespace collusim::nn
