// Copyright 2026 The scnas Authors.
// SPDX-License-Identifier: Apache-2.0

#include "scnas/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "scnas/graph.h"
#include "scnas/random.h"

namespace scnas {

namespace {

constexpr double kStep = 1e-6;

struct Leaves {
  std::vector<Var> vars;     // one per input; invalid for parameter inputs
  std::vector<std::size_t> param;  // parameter index per input, or npos
};

using Builder = std::function<Var(Graph<double>&, const Leaves&)>;

struct Case {
  std::vector<Tensor<double>> inputs;
  std::vector<bool> is_param;
  Builder build;
};

Tensor<double> random_tensor(std::mt19937_64& rng, Shape shape, double lo = -1, double hi = 1) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.vec()) v = uniform(rng, lo, hi);
  return t;
}

// Entries bounded away from zero so relu kinks stay outside the FD stencil.
Tensor<double> off_zero_tensor(std::mt19937_64& rng, Shape shape) {
  Tensor<double> t(std::move(shape));
  for (auto& v : t.vec()) {
    const double m = uniform(rng, 0.05, 1.0);
    v = uniform01(rng) < 0.5 ? -m : m;
  }
  return t;
}

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(uniform_index(rng, hi - lo + 1));
}

// loss = sum(out * r) for a fixed random r.
double evaluate_case(const Case& c, const Tensor<double>& r_seed_weights,
                     std::vector<Tensor<double>>* grads) {
  ParameterSet<double> params;
  std::vector<std::size_t> pidx(c.inputs.size(), static_cast<std::size_t>(-1));
  for (std::size_t i = 0; i < c.inputs.size(); ++i) {
    if (c.is_param[i]) pidx[i] = params.add("p" + std::to_string(i), c.inputs[i]);
  }
  Gradients<double> pg(params);
  Graph<double> g(&params, &pg);
  Leaves leaves;
  leaves.param = pidx;
  for (std::size_t i = 0; i < c.inputs.size(); ++i) {
    leaves.vars.push_back(c.is_param[i] ? Var{} : g.variable(c.inputs[i]));
  }
  Var out = c.build(g, leaves);
  const auto& ov = g.value(out);
  Var loss;
  if (ov.size() == 1) {
    loss = g.scale(out, r_seed_weights[0]);
  } else {
    Tensor<double> r(ov.shape());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = r_seed_weights[i % r_seed_weights.size()];
    loss = g.sum(g.mul(out, g.constant(std::move(r))));
  }
  const double value = g.value(loss)[0];
  if (grads) {
    g.backward(loss);
    grads->clear();
    for (std::size_t i = 0; i < c.inputs.size(); ++i) {
      grads->push_back(c.is_param[i] ? pg.grad(pidx[i]) : g.grad(leaves.vars[i]));
    }
  }
  return value;
}

double check_case(Case c, std::mt19937_64& rng) {
  const Tensor<double> r = random_tensor(rng, Shape{64}, -1, 1);
  std::vector<Tensor<double>> analytic;
  evaluate_case(c, r, &analytic);
  double diff = 0, na = 0, nn = 0;
  for (std::size_t i = 0; i < c.inputs.size(); ++i) {
    for (std::size_t j = 0; j < c.inputs[i].size(); ++j) {
      const double orig = c.inputs[i][j];
      c.inputs[i][j] = orig + kStep;
      const double fp = evaluate_case(c, r, nullptr);
      c.inputs[i][j] = orig - kStep;
      const double fm = evaluate_case(c, r, nullptr);
      c.inputs[i][j] = orig;
      const double numeric = (fp - fm) / (2 * kStep);
      const double a = analytic[i][j];
      diff += (a - numeric) * (a - numeric);
      na += a * a;
      nn += numeric * numeric;
    }
  }
  const double denom = std::sqrt(na) + std::sqrt(nn);
  return denom < 1e-12 ? std::sqrt(diff) : std::sqrt(diff) / denom;
}

std::vector<std::pair<std::string, std::function<Case(std::mt19937_64&)>>> op_cases() {
  using R = std::mt19937_64;
  std::vector<std::pair<std::string, std::function<Case(R&)>>> ops;
  ops.emplace_back("conv1d", [](R& rng) {
    const std::size_t ci = pick(rng, 1, 4), co = pick(rng, 1, 4), k = pick(rng, 1, 5);
    const bool fast = uniform01(rng) < 0.25;
    const std::size_t kk = fast ? 1 : k, s = fast ? 1 : pick(rng, 1, 3);
    const std::size_t l = kk + pick(rng, 0, 10);
    return Case{{random_tensor(rng, {ci, l}), random_tensor(rng, {co, ci, kk}), random_tensor(rng, {co})},
                {false, false, false},
                [s](Graph<double>& g, const Leaves& v) { return g.conv1d(v.vars[0], v.vars[1], v.vars[2], s); }};
  });
  ops.emplace_back("channel_norm", [](R& rng) {
    const std::size_t c = pick(rng, 2, 6), l = pick(rng, 1, 6);
    return Case{{random_tensor(rng, {c, l}), random_tensor(rng, {c}, 0.5, 1.5), random_tensor(rng, {c})},
                {false, false, false},
                [](Graph<double>& g, const Leaves& v) {
                  return g.channel_norm(v.vars[0], v.vars[1], v.vars[2]);
                }};
  });
  ops.emplace_back("relu", [](R& rng) {
    return Case{{off_zero_tensor(rng, {pick(rng, 1, 4), pick(rng, 1, 8)})}, {false},
                [](Graph<double>& g, const Leaves& v) { return g.relu(v.vars[0]); }};
  });
  ops.emplace_back("crop_time", [](R& rng) {
    const std::size_t c = pick(rng, 1, 4), l = pick(rng, 1, 10);
    const std::size_t len = pick(rng, 1, l), off = pick(rng, 0, l - len);
    return Case{{random_tensor(rng, {c, l})}, {false},
                [off, len](Graph<double>& g, const Leaves& v) { return g.crop_time(v.vars[0], off, len); }};
  });
  ops.emplace_back("global_avg_pool", [](R& rng) {
    return Case{{random_tensor(rng, {pick(rng, 1, 5), pick(rng, 1, 9)})}, {false},
                [](Graph<double>& g, const Leaves& v) { return g.global_avg_pool(v.vars[0]); }};
  });
  ops.emplace_back("affine", [](R& rng) {
    const std::size_t c = pick(rng, 1, 6), n = pick(rng, 1, 6);
    return Case{{random_tensor(rng, {c}), random_tensor(rng, {n, c}), random_tensor(rng, {n})},
                {false, false, false},
                [](Graph<double>& g, const Leaves& v) { return g.affine(v.vars[0], v.vars[1], v.vars[2]); }};
  });
  ops.emplace_back("add", [](R& rng) {
    const Shape s{pick(rng, 1, 4), pick(rng, 1, 4)};
    return Case{{random_tensor(rng, s), random_tensor(rng, s)}, {false, false},
                [](Graph<double>& g, const Leaves& v) { return g.add(v.vars[0], v.vars[1]); }};
  });
  ops.emplace_back("mul", [](R& rng) {
    const Shape s{pick(rng, 1, 4), pick(rng, 1, 4)};
    return Case{{random_tensor(rng, s), random_tensor(rng, s)}, {false, false},
                [](Graph<double>& g, const Leaves& v) { return g.mul(v.vars[0], v.vars[1]); }};
  });
  ops.emplace_back("scale", [](R& rng) {
    const double f = uniform(rng, -3, 3);
    return Case{{random_tensor(rng, {pick(rng, 1, 8)})}, {false},
                [f](Graph<double>& g, const Leaves& v) { return g.scale(v.vars[0], f); }};
  });
  ops.emplace_back("sum", [](R& rng) {
    return Case{{random_tensor(rng, {pick(rng, 1, 4), pick(rng, 1, 4)})}, {false},
                [](Graph<double>& g, const Leaves& v) { return g.sum(v.vars[0]); }};
  });
  ops.emplace_back("softmax_cross_entropy", [](R& rng) {
    const std::size_t n = pick(rng, 2, 7), label = pick(rng, 0, n - 1);
    return Case{{random_tensor(rng, {n}, -3, 3)}, {false},
                [label](Graph<double>& g, const Leaves& v) {
                  return g.softmax_cross_entropy(v.vars[0], label);
                }};
  });
  ops.emplace_back("kl_to_target", [](R& rng) {
    const std::size_t n = pick(rng, 2, 7);
    const double t = uniform(rng, 0.5, 5.0);
    std::vector<double> z(n);
    for (auto& x : z) x = uniform(rng, -3, 3);
    const auto target = softmax<double>(z, 1.0);
    return Case{{random_tensor(rng, {n}, -3, 3)}, {false},
                [target, t](Graph<double>& g, const Leaves& v) {
                  return g.kl_to_target(v.vars[0], target, t);
                }};
  });
  ops.emplace_back("parameter_slice", [](R& rng) {
    const Shape full{pick(rng, 1, 4), pick(rng, 1, 4), pick(rng, 1, 5)};
    std::vector<SliceRange> ranges;
    for (std::size_t d : full) {
      const std::size_t len = pick(rng, 1, d);
      ranges.push_back({pick(rng, 0, d - len), len});
    }
    return Case{{random_tensor(rng, full)}, {true},
                [ranges](Graph<double>& g, const Leaves& v) { return g.parameter_slice(v.param[0], ranges); }};
  });
  ops.emplace_back("parameter", [](R& rng) {
    return Case{{random_tensor(rng, {pick(rng, 1, 6)})}, {true},
                [](Graph<double>& g, const Leaves& v) { return g.parameter(v.param[0]); }};
  });
  // A sliced conv block with a shortcut, as the supernet records it.
  ops.emplace_back("conv_block", [](R& rng) {
    const std::size_t cmax = pick(rng, 2, 4), kmax = pick(rng, 1, 5);
    const std::size_t c = pick(rng, 1, cmax), k = pick(rng, 1, kmax);
    const std::size_t off = (kmax - k) / 2, l = k + pick(rng, 0, 6);
    return Case{{random_tensor(rng, {c, l}), random_tensor(rng, {cmax, cmax, kmax}),
                 random_tensor(rng, {cmax}), random_tensor(rng, {cmax}, 0.5, 1.5),
                 random_tensor(rng, {cmax})},
                {false, true, true, true, true},
                [=](Graph<double>& g, const Leaves& v) {
                  Var w = g.parameter_slice(v.param[1], {{0, c}, {0, c}, {off, k}});
                  Var b = g.parameter_slice(v.param[2], {{0, c}});
                  Var ga = g.parameter_slice(v.param[3], {{0, c}});
                  Var sh = g.parameter_slice(v.param[4], {{0, c}});
                  Var y = g.channel_norm(g.conv1d(v.vars[0], w, b, 1), ga, sh);
                  const std::size_t len = g.value(y).dim(1);
                  return g.relu(g.add(y, g.crop_time(v.vars[0], (l - len) / 2, len)));
                }};
  });
  return ops;
}

}  // namespace

std::vector<OpGradCheck> run_gradcheck(std::uint64_t seed, int cases, double tolerance) {
  std::vector<OpGradCheck> out;
  std::uint64_t op_index = 0;
  for (const auto& [name, make] : op_cases()) {
    std::mt19937_64 rng(derive_seed(seed, 0x67c, op_index++));
    OpGradCheck r;
    r.op = name;
    for (int i = 0; i < cases; ++i) {
      const double err = check_case(make(rng), rng);
      r.max_rel_error = std::max(r.max_rel_error, err);
      if (!(err < tolerance)) ++r.failures;
      ++r.cases;
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace scnas
