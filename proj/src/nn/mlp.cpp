#include "collusim/nn/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace collusim::nn {

MlpLayout::MlpLayout(std::vector<int> sizes, OutputActivation output) : sizes_(std::move(sizes)), output_(output) {
  if (sizes_.size() < 2) throw std::invalid_argument("an MLP needs at least an input and an output size");
  param_count_ = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    if (sizes_[l] < 1 || sizes_[l + 1] < 1) throw std::invalid_argument("layer sizes must be positive");
    param_count_ += static_cast<std::size_t>(sizes_[l] + 1) * sizes_[l + 1];
  }
}

std::vector<double> MlpLayout::forward(std::span<const double> params, std::span<const double> x) const {
  MlpTape tape;
  forward(params, x, tape);
  return std::move(tape.acts.back());
}

std::vector<double> MlpLayout::forward(std::span<const double> params, std::span<const double> x,
                                       MlpTape& tape) const {
  if (params.size() != param_count_) throw std::invalid_argument("parameter span does not match layout");
  if (static_cast<int>(x.size()) != input_size()) {
    throw std::invalid_argument("input has " + std::to_string(x.size()) + " entries, layout expects " +
                                std::to_string(input_size()));
  }
  const std::size_t layers = sizes_.size() - 1;
  tape.acts.resize(layers + 1);
  tape.acts[0].assign(x.begin(), x.end());
  const double* p = params.data();
  for (std::size_t l = 0; l < layers; ++l) {
    const int n_in = sizes_[l];
    const int n_out = sizes_[l + 1];
    const auto& in = tape.acts[l];
    auto& out = tape.acts[l + 1];
    out.resize(n_out);
    const double* w = p;
    const double* b = p + static_cast<std::size_t>(n_in) * n_out;
    const bool squash = l + 1 < layers || output_ == OutputActivation::Tanh;
    for (int o = 0; o < n_out; ++o) {
      const double* row = w + static_cast<std::size_t>(o) * n_in;
      double acc = b[o];
      for (int i = 0; i < n_in; ++i) acc += row[i] * in[i];
      out[o] = squash ? std::tanh(acc) : acc;
    }
    p = b + n_out;
  }
  return tape.acts.back();
}

std::vector<double> MlpLayout::backward(std::span<const double> params, const MlpTape& tape,
                                        std::span<const double> upstream, std::span<double> grad) const {
  if (params.size() != param_count_ || grad.size() != param_count_) {
    throw std::invalid_argument("parameter/gradient span does not match layout");
  }
  if (static_cast<int>(upstream.size()) != output_size()) throw std::invalid_argument("upstream has wrong size");
  const std::size_t layers = sizes_.size() - 1;
  if (tape.acts.size() != layers + 1) throw std::invalid_argument("tape does not belong to this layout");

  std::vector<std::size_t> offset(layers + 1, 0);
  for (std::size_t l = 0; l < layers; ++l) {
    offset[l + 1] = offset[l] + static_cast<std::size_t>(sizes_[l] + 1) * sizes_[l + 1];
  }
  std::vector<double> delta(upstream.begin(), upstream.end());
  std::vector<double> below;
  for (std::size_t l = layers; l-- > 0;) {
    const int n_in = sizes_[l];
    const int n_out = sizes_[l + 1];
    const auto& in = tape.acts[l];
    const auto& out = tape.acts[l + 1];
    if (l + 1 < layers || output_ == OutputActivation::Tanh) {
      for (int o = 0; o < n_out; ++o) delta[o] *= 1.0 - out[o] * out[o];
    }
    const double* w = params.data() + offset[l];
    double* gw = grad.data() + offset[l];
    double* gb = gw + static_cast<std::size_t>(n_in) * n_out;
    below.assign(n_in, 0.0);
    for (int o = 0; o < n_out; ++o) {
      const double d = delta[o];
      gb[o] += d;
      if (d == 0.0) continue;
      const double* row = w + static_cast<std::size_t>(o) * n_in;
      double* grow = gw + static_cast<std::size_t>(o) * n_in;
      for (int i = 0; i < n_in; ++i) {
        grow[i] += d * in[i];
        below[i] += d * row[i];
      }
    }
    delta.swap(below);
  }
  return delta;
}

void MlpLayout::initialize(std::span<double> params, double output_gain, Rng& rng) const {
  if (params.size() != param_count_) throw std::invalid_argument("parameter span does not match layout");
  std::size_t at = 0;
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const int n_in = sizes_[l];
    const int n_out = sizes_[l + 1];
    const std::size_t nw = static_cast<std::size_t>(n_in) * n_out;
    orthogonal_fill(params.subspan(at, nw), n_out, n_in, l + 1 == layers ? output_gain : 1.0, rng);
    at += nw;
    for (int o = 0; o < n_out; ++o) params[at++] = 0.0;
  }
}

Mlp::Mlp(std::vector<int> sizes, OutputActivation output)
    : layout_(std::move(sizes), output), params_(layout_.param_count(), 0.0) {}

MlpGradient mlp_grad(const Mlp& net, std::span<const double> x, std::span<const double> upstream) {
  MlpTape tape;
  net.layout().forward(net.params(), x, tape);
  MlpGradient g;
  g.params.assign(net.layout().param_count(), 0.0);
  g.input = net.layout().backward(net.params(), tape, upstream, g.params);
  return g;
}

void orthogonal_fill(std::span<double> m, int rows, int cols, double gain, Rng& rng) {
  // Orthonormalise along the shorter dimension with modified Gram-Schmidt.
  const bool by_rows = rows <= cols;
  const int count = by_rows ? rows : cols;
  const int len = by_rows ? cols : rows;
  std::vector<std::vector<double>> vecs(count, std::vector<double>(len));
  for (int k = 0; k < count; ++k) {
    auto& v = vecs[k];
    for (;;) {
      for (double& e : v) e = standard_normal(rng);
      for (int j = 0; j < k; ++j) {
        double dot = 0.0;
        for (int i = 0; i < len; ++i) dot += v[i] * vecs[j][i];
        for (int i = 0; i < len; ++i) v[i] -= dot * vecs[j][i];
      }
      double norm = 0.0;
      for (double e : v) norm += e * e;
      norm = std::sqrt(norm);
      if (norm > 1e-8) {
        for (double& e : v) e /= norm;
        break;
      }
    }
  }
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      m[static_cast<std::size_t>(r) * cols + c] = gain * (by_rows ? vecs[r][c] : vecs[c][r]);
    }
  }
}

}  // namespace collusim::nn
