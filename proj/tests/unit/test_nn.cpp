#include <cmath>
#include <filesystem>
#include <sstream>

#include "doctest.h"

#include "collusim/errors.hpp"
#include "collusim/nn/checkpoint.hpp"
#include "collusim/nn/mlp.hpp"
#include "collusim/nn/optim.hpp"
#include "collusim/nn/ppo.hpp"
#include "collusim/nn/rollout.hpp"
#include "collusim/random.hpp"

using namespace collusim;
using namespace collusim::nn;

namespace {

std::vector<double> random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = scale * (2.0 * uniform01(rng) - 1.0);
  return v;
}

// Straight-line forward: y = W x + b per layer, tanh on hidden layers.
std::vector<double> oracle_forward(const std::vector<int>& sizes, const std::vector<double>& p,
                                   std::vector<double> x, bool tanh_out) {
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const int in = sizes[l], out = sizes[l + 1];
    std::vector<double> y(out);
    for (int o = 0; o < out; ++o) {
      double s = p[off + in * out + o];
      for (int i = 0; i < in; ++i) s += p[off + o * in + i] * x[i];
      const bool last = l + 2 == sizes.size();
      y[o] = (!last || tanh_out) ? std::tanh(s) : s;
    }
    off += static_cast<std::size_t>(in * out + out);
    x = y;
  }
  return x;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Two-action bandit: logits and value are raw parameters.
class Bandit final : public ActorCriticModel {
 public:
  std::vector<double> p{0.0, 0.0, 0.0};
  std::span<double> parameters() override { return p; }
  PolicyOutput output() const { return {{p[0], p[1]}, p[2]}; }
  PolicyOutput forward_backward(const RolloutBuffer&, std::size_t, const HeadLoss& loss,
                                std::span<double> grad) override {
    const auto out = output();
    const auto g = loss(out);
    grad[0] += g.logits[0];
    grad[1] += g.logits[1];
    grad[2] += g.value;
    return out;
  }
};

}  // namespace

TEST_CASE("forward matches a straight-line oracle") {
  Rng rng(1);
  Mlp net({4, 8, 3});
  auto p = random_vector(net.layout().param_count(), rng);
  std::copy(p.begin(), p.end(), net.params().begin());
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_vector(4, rng, 2.0);
    const auto y = net.forward(x);
    const auto expect = oracle_forward({4, 8, 3}, p, x, false);
    for (int i = 0; i < 3; ++i) CHECK(y[i] == doctest::Approx(expect[i]).epsilon(1e-10));
  }
  Mlp tanh_net({5, 6, 2}, OutputActivation::Tanh);
  auto q = random_vector(tanh_net.layout().param_count(), rng);
  std::copy(q.begin(), q.end(), tanh_net.params().begin());
  const auto x = random_vector(5, rng);
  const auto expect = oracle_forward({5, 6, 2}, q, x, true);
  CHECK(std::abs(tanh_net.forward(x)[0] - expect[0]) < 1e-12);
}

TEST_CASE("zero parameters give a zero output and identity layer passes through") {
  Mlp net({3, 5, 2});
  const std::vector<double> x{1.0, -2.0, 3.0};
  for (double y : net.forward(x)) CHECK(y == 0.0);
  Mlp id({3, 3});
  for (int i = 0; i < 3; ++i) id.params()[i * 3 + i] = 1.0;
  CHECK(id.forward(x) == x);
}

TEST_CASE("dimension mismatch is rejected") {
  Mlp net({3, 2});
  const std::vector<double> x{1.0};
  CHECK_THROWS(net.forward(x));
}

TEST_CASE("linear layer gradient rows equal the input") {
  Rng rng(2);
  Mlp net({4, 3});
  const auto x = random_vector(4, rng);
  for (int j = 0; j < 3; ++j) {
    std::vector<double> up(3, 0.0);
    up[j] = 1.0;
    const auto g = mlp_grad(net, x, up);
    for (int i = 0; i < 4; ++i) CHECK(g.params[j * 4 + i] == x[i]);
    CHECK(g.params[12 + j] == 1.0);
  }
  const auto zero = mlp_grad(net, x, std::vector<double>(3, 0.0));
  for (double g : zero.params) CHECK(g == 0.0);
  for (double g : zero.input) CHECK(g == 0.0);
}

TEST_CASE("gradients match central differences") {
  Rng rng(3);
  const std::vector<std::vector<int>> shapes{{6, 16}, {64, 64}, {80, 64, 11}, {64, 16}, {13, 32, 2}, {3, 7, 5, 1}};
  for (const auto& shape : shapes) {
    for (auto act : {OutputActivation::Linear, OutputActivation::Tanh}) {
      Mlp net(shape, act);
      auto p = random_vector(net.layout().param_count(), rng, 0.5);
      std::copy(p.begin(), p.end(), net.params().begin());
      const auto x = random_vector(static_cast<std::size_t>(shape.front()), rng);
      const auto up = random_vector(static_cast<std::size_t>(shape.back()), rng);
      const auto g = mlp_grad(net, x, up);
      const double h = 1e-5;
      for (int k = 0; k < 20; ++k) {
        const auto i = uniform_index(rng, p.size());
        const double keep = net.params()[i];
        net.params()[i] = keep + h;
        const double fp = dot(net.forward(x), up);
        net.params()[i] = keep - h;
        const double fm = dot(net.forward(x), up);
        net.params()[i] = keep;
        const double fd = (fp - fm) / (2 * h);
        CHECK(std::abs(fd - g.params[i]) <= 1e-4 * std::max(1.0, std::abs(fd)));
      }
      auto xi = x;
      const auto j = uniform_index(rng, x.size());
      xi[j] += h;
      const double fp = dot(net.forward(xi), up);
      xi[j] -= 2 * h;
      const double fm = dot(net.forward(xi), up);
      CHECK(std::abs((fp - fm) / (2 * h) - g.input[j]) <= 1e-4 * std::max(1.0, std::abs(g.input[j])));
    }
  }
}

TEST_CASE("initialization is seeded and heads are small") {
  MlpLayout layout({8, 16, 4});
  std::vector<double> a(layout.param_count()), b(layout.param_count());
  Rng r1(5), r2(5);
  layout.initialize(a, 0.01, r1);
  layout.initialize(b, 0.01, r2);
  CHECK(a == b);
  // Last-layer weights have rows of norm 0.01.
  const std::size_t off = 8 * 16 + 16;
  double norm = 0.0;
  for (int i = 0; i < 16; ++i) norm += a[off + i] * a[off + i];
  CHECK(std::sqrt(norm) == doctest::Approx(0.01).epsilon(1e-9));
}

TEST_CASE("softmax closed forms") {
  const std::vector<double> equal{2.0, 2.0, 2.0, 2.0};
  for (double p : softmax(equal)) CHECK(p == doctest::Approx(0.25));
  const std::vector<double> l3{0.0, std::log(3.0)};
  const auto p = softmax(l3);
  CHECK(p[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(0.75).epsilon(1e-12));
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    auto l = random_vector(7, rng, 30.0);
    const auto a = softmax(l);
    double sum = 0.0;
    for (double x : a) {
      CHECK(x > 0.0);
      sum += x;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
    for (auto& x : l) x += 1e3;
    const auto b = softmax(l);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) < 1e-12);
  }
}

TEST_CASE("categorical sampling") {
  Rng rng(9);
  const std::vector<double> point{1.0, 0.0, 0.0};
  for (int i = 0; i < 100; ++i) {
    const auto s = sample_action(point, rng);
    CHECK(s.action == 0);
    CHECK(s.log_prob == 0.0);
  }
  const std::vector<double> uniform(4, 0.25);
  const int n = 100000;
  std::vector<int> freq(4, 0);
  for (int i = 0; i < n; ++i) ++freq[sample_action(uniform, rng).action];
  const double sigma = std::sqrt(n * 0.25 * 0.75);
  for (int f : freq) CHECK(std::abs(f - n * 0.25) < 3 * sigma);
  Rng a(12), b(12);
  for (int i = 0; i < 50; ++i) CHECK(sample_action(uniform, a).action == sample_action(uniform, b).action);
}

TEST_CASE("returns closed forms and brute force") {
  RolloutBuffer buf;
  for (int i = 0; i < 3; ++i) buf.add(0, 0, {}, {}, 0, 0.0, 0.0);
  for (int i = 0; i < 3; ++i) buf.set_outcome(i, 1.0, i == 2);
  CHECK(compute_returns_and_advantages(buf, 0.0, false).returns == std::vector<double>{1, 1, 1});
  buf.set_outcome(0, 0.0, false);
  buf.set_outcome(1, 0.0, false);
  buf.set_outcome(2, 2.0, true);
  CHECK(compute_returns_and_advantages(buf, 0.5, false).returns == std::vector<double>{0.5, 1, 2});

  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    RolloutBuffer b;
    // Two interleaved trajectories of 20 rows each.
    std::vector<std::vector<std::size_t>> rows(2);
    for (int t = 0; t < 40; ++t) {
      const int traj = t % 2;
      const auto row = b.add(traj, traj, {}, {}, 0, -0.5, uniform01(rng));
      rows[traj].push_back(row);
      b.set_outcome(row, 2 * uniform01(rng) - 1, t >= 38);
    }
    const double gamma = 0.9;
    const auto t = compute_returns_and_advantages(b, gamma, false);
    for (const auto& r : rows)
      for (std::size_t i = 0; i < r.size(); ++i) {
        double g = 0.0;
        for (std::size_t j = i; j < r.size(); ++j) g += std::pow(gamma, static_cast<double>(j - i)) * b.reward[r[j]];
        CHECK(t.returns[r[i]] == doctest::Approx(g).epsilon(1e-12));
        CHECK(t.advantages[r[i]] == doctest::Approx(g - b.value[r[i]]).epsilon(1e-12));
      }
    const auto n = compute_returns_and_advantages(b, gamma, true);
    double mean = 0.0, var = 0.0;
    for (double a : n.advantages) mean += a / 40;
    for (double a : n.advantages) var += (a - mean) * (a - mean) / 40;
    CHECK(std::abs(mean) < 1e-12);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK_THROWS(compute_returns_and_advantages(RolloutBuffer{}, 0.9));
}

TEST_CASE("surrogate closed forms and clip band") {
  CHECK(ppo_surrogate(1.0, 2.0, 0.2) == 2.0);
  CHECK(ppo_surrogate(1.5, 1.0, 0.2) == doctest::Approx(1.2));
  CHECK(ppo_surrogate(0.5, -1.0, 0.2) == doctest::Approx(-0.8));
  Rng rng(8);
  for (int i = 0; i < 200; ++i) {
    const double a = 10 * (2 * uniform01(rng) - 1), eps = 0.05 + 0.4 * uniform01(rng);
    CHECK(ppo_surrogate(1.0, a, eps) == a);
    if (a < 0) {
      const double w = 3 * uniform01(rng) + 1e-3;
      CHECK(ppo_surrogate(w, a, eps) == doctest::Approx(a * std::max(w, 1 - eps)));
      CHECK(ppo_surrogate(w + 0.1, a, eps) <= ppo_surrogate(w, a, eps));
    }
  }
}

TEST_CASE("zero advantages leave the policy untouched") {
  Bandit model;
  model.p = {0.3, -0.2, 0.0};
  RolloutBuffer buf;
  for (int i = 0; i < 8; ++i) {
    buf.add(i, 0, {}, {}, i % 2, std::log(softmax(std::vector<double>{0.3, -0.2})[i % 2]), 0.0);
    buf.set_outcome(i, 1.0, true);
  }
  PpoConfig cfg;
  cfg.entropy_coef = 0.0;
  cfg.minibatch = 4;
  Adam adam(3, {cfg.learning_rate});
  const std::vector<double> adv(8, 0.0), ret(8, 1.0);
  const auto stats = ppo_update(model, adam, buf, adv, ret, cfg, 1);
  CHECK(model.p[0] == 0.3);
  CHECK(model.p[1] == -0.2);
  CHECK(model.p[2] != 0.0);  // the critic still learns
  CHECK(stats.clip_fraction >= 0.0);
  CHECK(stats.clip_fraction <= 1.0);
}

TEST_CASE("bandit converges to the rewarding arm") {
  Bandit model;
  PpoConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.minibatch = 16;
  Adam adam(3, {cfg.learning_rate});
  Rng rng(10);
  for (int update = 0; update < 200; ++update) {
    RolloutBuffer buf;
    const auto probs = softmax(model.output().logits);
    for (int i = 0; i < 16; ++i) {
      const auto s = sample_action(probs, rng);
      const auto row = buf.add(i, 0, {}, {}, s.action, s.log_prob, model.p[2]);
      buf.set_outcome(row, s.action == 0 ? 1.0 : -1.0, true);
    }
    const auto t = compute_returns_and_advantages(buf, cfg.gamma, cfg.normalize_advantages);
    const auto stats = ppo_update(model, adam, buf, t.advantages, t.returns, cfg, update);
    CHECK(stats.clip_fraction >= 0.0);
    CHECK(stats.clip_fraction <= 1.0);
  }
  CHECK(softmax(model.output().logits)[0] > 0.95);
}

TEST_CASE("fixed shuffle seed makes updates bit-identical") {
  auto run = [](std::uint64_t seed) {
    Bandit model;
    model.p = {0.1, 0.2, 0.3};
    RolloutBuffer buf;
    Rng rng(3);
    for (int i = 0; i < 32; ++i) {
      const auto row = buf.add(i, 0, {}, {}, i % 2, std::log(0.5), 0.0);
      buf.set_outcome(row, uniform01(rng), true);
    }
    PpoConfig cfg;
    cfg.minibatch = 5;
    Adam adam(3, {cfg.learning_rate});
    const auto t = compute_returns_and_advantages(buf, cfg.gamma);
    ppo_update(model, adam, buf, t.advantages, t.returns, cfg, seed);
    return model.p;
  };
  CHECK(run(4) == run(4));
}

TEST_CASE("non-finite loss aborts the update") {
  Bandit model;
  RolloutBuffer buf;
  const auto row = buf.add(0, 0, {}, {}, 0, std::log(0.5), 0.0);
  buf.set_outcome(row, 1.0, true);
  PpoConfig cfg;
  Adam adam(3);
  const std::vector<double> adv{std::nan("")}, ret{1.0};
  const auto before = model.p;
  CHECK_THROWS_AS(ppo_update(model, adam, buf, adv, ret, cfg, 0), TrainingDiverged);
  CHECK(model.p == before);
}

TEST_CASE("adam bias-corrected first step") {
  Adam adam(2, {0.1});
  std::vector<double> p{1.0, -1.0};
  const std::vector<double> g{0.5, -2.0};
  adam.step(p, g);
  // m_hat = g and v_hat = g^2 after one step, so the move is lr * sign(g) up to epsilon.
  CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-7));
  CHECK(p[1] == doctest::Approx(-0.9).epsilon(1e-7));
  CHECK(adam.steps() == 1);
}

TEST_CASE("checkpoint round trip and manifest checks") {
  Checkpoint c;
  c.nets = {{"actor", {4, 8, 2}, OutputActivation::Linear}, {"critic", {4, 8, 1}, OutputActivation::Linear}};
  Rng rng(5);
  c.params = random_vector(c.expected_param_count(), rng);
  std::stringstream ss;
  write_checkpoint(ss, c);
  const auto back = read_checkpoint(ss);
  CHECK(back.nets == c.nets);
  CHECK(back.params == c.params);

  const auto dir = std::filesystem::temp_directory_path() / "collusim_ckpt_test";
  std::filesystem::create_directories(dir);
  save_checkpoint(dir / "a.ckpt", c);
  CHECK(load_checkpoint(dir / "a.ckpt", c.nets).params == c.params);
  auto other = c.nets;
  other[0].sizes = {4, 9, 2};
  CHECK_THROWS_AS(load_checkpoint(dir / "a.ckpt", other), ConfigError);
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.ckpt"), IoError);
  std::stringstream bad("COLLUSIM-CKPT v9\n");
  CHECK_THROWS_AS(read_checkpoint(bad), ConfigError);
  std::filesystem::remove_all(dir);
}
