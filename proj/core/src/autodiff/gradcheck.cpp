#include "tasktcn/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tasktcn/autodiff/ops.hpp"
#include "tasktcn/common/rng.hpp"

namespace tasktcn::autodiff {

double grad_check(const CheckedFunction& f, const std::vector<Tensor<double>>& inputs,
                  double eps) {
  std::vector<Tensor<double>> grads;
  {
    Tape<double> tape;
    std::vector<Var<double>> leaves;
    for (const auto& in : inputs) leaves.push_back(tape.leaf(in, true));
    Var<double> out = f(tape, leaves);
    if (out.value().numel() != 1) {
      throw ContractViolation("grad_check: function must be scalar-valued");
    }
    tape.backward(out);
    for (const auto& leaf : leaves) grads.push_back(tape.grad(leaf));
  }

  auto evaluate = [&](const std::vector<Tensor<double>>& values) {
    Tape<double> tape;
    std::vector<Var<double>> leaves;
    for (const auto& in : values) leaves.push_back(tape.leaf(in, true));
    return f(tape, leaves).value().item();
  };

  double worst = 0.0;
  std::vector<Tensor<double>> probe = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (std::size_t i = 0; i < inputs[k].numel(); ++i) {
      const double orig = inputs[k][i];
      probe[k][i] = orig + eps;
      const double plus = evaluate(probe);
      probe[k][i] = orig - eps;
      const double minus = evaluate(probe);
      probe[k][i] = orig;
      const double fd = (plus - minus) / (2.0 * eps);
      const double ad = grads[k][i];
      const double rel = std::abs(ad - fd) / std::max(1e-12, std::abs(ad) + std::abs(fd));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

bool GradCheckReport::all_passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
}

namespace {

struct Case {
  std::string name;
  std::vector<Tensor<double>> inputs;
  CheckedFunction fn;
};

class CaseFactory {
 public:
  explicit CaseFactory(std::uint64_t seed) : rng_(seed) {}

  std::size_t dim(std::size_t lo = 1, std::size_t hi = 5) {
    return lo + static_cast<std::size_t>(rng_() % (hi - lo + 1));
  }

  Tensor<double> normal(Shape shape, double scale = 1.0) {
    Tensor<double> t(std::move(shape));
    std::normal_distribution<double> dist(0.0, scale);
    for (double& v : t.values()) v = dist(rng_);
    return t;
  }

  /// Normal draws pushed away from zero so kinks (relu) are not straddled by eps
  /// and projected gradients are not tiny by chance.
  Tensor<double> away_from_zero(Shape shape) {
    Tensor<double> t = normal(std::move(shape));
    for (double& v : t.values()) v = v >= 0 ? v + 0.1 : v - 0.1;
    return t;
  }

  Tensor<double> positive(Shape shape) {
    Tensor<double> t(std::move(shape));
    for (double& v : t.values()) v = 0.5 + uniform01(rng_);
    return t;
  }

  Rng& rng() { return rng_; }

 private:
  Rng rng_;
};

/// sum(weights * y) with fixed random weights so no gradient is degenerate.
Var<double> project(const Var<double>& y, const Tensor<double>& weights) {
  Tape<double>& tape = y.tape();
  return sum(mul(y, tape.constant(weights)));
}

std::vector<Case> build_cases(CaseFactory& gen) {
  std::vector<Case> cases;

  {
    const std::size_t n = gen.dim(), fin = gen.dim(), fout = gen.dim();
    auto w = gen.away_from_zero({n, fout});
    cases.push_back({"linear",
                     {gen.normal({n, fin}), gen.normal({fout, fin}), gen.normal({fout})},
                     [w](Tape<double>&, std::span<const Var<double>> in) {
                       return project(linear(in[0], in[1], in[2]), w);
                     }});
  }
  for (std::size_t dilation : {1u, 2u, 4u}) {
    const std::size_t n = gen.dim(), cin = gen.dim(), cout = gen.dim(), len = gen.dim(2, 5),
                      k = gen.dim(1, 3);
    auto w = gen.away_from_zero({n, cout, len});
    cases.push_back({"conv1d_causal(d=" + std::to_string(dilation) + ")",
                     {gen.normal({n, cin, len}), gen.normal({cout, cin, k}), gen.normal({cout})},
                     [w, dilation](Tape<double>&, std::span<const Var<double>> in) {
                       return project(conv1d_causal(in[0], in[1], in[2], dilation), w);
                     }});
  }
  {
    // two pooled values normalise to +-1 whatever x is; the vanishing gradient
    // is then all finite-difference noise
    const std::size_t n = gen.dim(3, 5), c = gen.dim();
    auto w = gen.away_from_zero({n, c});
    cases.push_back({"batch_norm(train,2d)",
                     {gen.normal({n, c}), gen.away_from_zero({c}), gen.normal({c})},
                     [w](Tape<double>&, std::span<const Var<double>> in) {
                       return project(batch_norm<double>(in[0], in[1], in[2], nullptr,
                                                         Phase::train),
                                      w);
                     }});
  }
  {
    const std::size_t n = gen.dim(1, 5), c = gen.dim(), len = gen.dim(3, 5);
    auto w = gen.away_from_zero({n, c, len});
    cases.push_back({"batch_norm(train,3d)",
                     {gen.normal({n, c, len}), gen.away_from_zero({c}), gen.normal({c})},
                     [w](Tape<double>&, std::span<const Var<double>> in) {
                       return project(batch_norm<double>(in[0], in[1], in[2], nullptr,
                                                         Phase::train),
                                      w);
                     }});
  }
  {
    const std::size_t n = gen.dim(), c = gen.dim();
    auto w = gen.away_from_zero({n, c});
    RunningStats<double> stats{gen.normal({c}), gen.positive({c})};
    cases.push_back({"batch_norm(eval)",
                     {gen.normal({n, c}), gen.away_from_zero({c}), gen.normal({c})},
                     [w, stats](Tape<double>&, std::span<const Var<double>> in) mutable {
                       return project(batch_norm<double>(in[0], in[1], in[2], &stats,
                                                         Phase::eval),
                                      w);
                     }});
  }
  {
    // a single-element direction is just sign(v), with zero gradient
    const std::size_t o = gen.dim(), c = gen.dim(2, 5), k = gen.dim(1, 3);
    auto w = gen.away_from_zero({o, c, k});
    cases.push_back({"weight_norm",
                     {gen.normal({o, c, k}), gen.away_from_zero({o})},
                     [w](Tape<double>&, std::span<const Var<double>> in) {
                       return project(weight_norm(in[0], in[1]), w);
                     }});
  }
  {
    const std::size_t n = gen.dim(), c = gen.dim();
    auto w = gen.away_from_zero({n, c});
    cases.push_back({"dropout(eval)",
                     {gen.normal({n, c})},
                     [w](Tape<double>&, std::span<const Var<double>> in) {
                       Rng rng(7);
                       return project(dropout(in[0], 0.3, Phase::eval, rng), w);
                     }});
    cases.push_back({"dropout(train,fixed mask)",
                     {gen.normal({n, c})},
                     [w](Tape<double>&, std::span<const Var<double>> in) {
                       Rng rng(7);
                       return project(dropout(in[0], 0.3, Phase::train, rng), w);
                     }});
  }
  {
    const std::size_t n = gen.dim(), c = gen.dim();
    auto w = gen.away_from_zero({n, c});
    cases.push_back({"relu",
                     {gen.away_from_zero({n, c})},
                     [w](Tape<double>&, std::span<const Var<double>> in) {
                       return project(relu(in[0]), w);
                     }});
    cases.push_back({"softplus",
                     {gen.normal({n, c})},
                     [w](Tape<double>&, std::span<const Var<double>> in) {
                       return project(softplus(in[0]), w);
                     }});
  }
  {
    const std::size_t n = gen.dim(), c = gen.dim();
    auto target = gen.normal({n, c});
    cases.push_back({"mse_loss",
                     {gen.normal({n, c})},
                     [target](Tape<double>&, std::span<const Var<double>> in) {
                       return mse_loss(in[0], target);
                     }});
  }
  {
    const std::size_t m = gen.dim(), d = gen.dim();
    cases.push_back({"kld_std_normal",
                     {gen.normal({m, d}), gen.positive({m, d})},
                     [](Tape<double>&, std::span<const Var<double>> in) {
                       return kld_std_normal(in[0], in[1]);
                     }});
  }
  {
    const std::size_t m = gen.dim(), d = gen.dim(), n = gen.dim();
    std::vector<std::size_t> rows(n);
    for (auto& r : rows) r = static_cast<std::size_t>(gen.rng()() % m);
    auto w = gen.away_from_zero({n, d});
    cases.push_back({"embedding_lookup",
                     {gen.normal({m, d})},
                     [w, rows](Tape<double>&, std::span<const Var<double>> in) {
                       return project(gather_rows<double>(in[0], rows), w);
                     }});
    auto eps = gen.normal({n, d});
    cases.push_back({"bayesian_sample",
                     {gen.normal({m, d}), gen.normal({m, d})},
                     [w, rows, eps](Tape<double>& tape, std::span<const Var<double>> in) {
                       auto mu = gather_rows<double>(in[0], rows);
                       auto sigma = gather_rows<double>(softplus(in[1]), rows);
                       auto sample = add(mu, mul(sigma, tape.constant(eps)));
                       return project(sample, w);
                     }});
  }
  {
    const std::size_t n = gen.dim(), a = gen.dim(), b = gen.dim(), steps = gen.dim();
    auto w = gen.away_from_zero({n, a + b, steps});
    cases.push_back({"concat+repeat_time",
                     {gen.normal({n, a}), gen.normal({n, b})},
                     [w, steps](Tape<double>&, std::span<const Var<double>> in) {
                       return project(repeat_time(concat_features(in[0], in[1]), steps), w);
                     }});
  }
  {
    const std::size_t n = gen.dim(), c = gen.dim();
    auto w = gen.away_from_zero({c, n});
    cases.push_back({"elementwise(add,sub,mul,scale)+reshape+mean",
                     {gen.normal({n, c}), gen.normal({n, c})},
                     [w, n, c](Tape<double>&, std::span<const Var<double>> in) {
                       auto y = mul(add(in[0], scale(in[1], 0.7)), sub(in[0], in[1]));
                       auto r = reshape(y, {c, n});
                       return add(project(r, w), scale(mean(in[0]), 3.0));
                     }});
  }
  return cases;
}

}  // namespace

GradCheckReport run_gradcheck_suite(std::uint64_t seed, double tolerance,
                                    std::size_t trials_per_op) {
  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t trial = 0; trial < std::max<std::size_t>(1, trials_per_op); ++trial) {
    CaseFactory gen(derive_seed(seed, trial));
    auto cases = build_cases(gen);
    for (std::size_t i = 0; i < cases.size(); ++i) {
      const double err = grad_check(cases[i].fn, cases[i].inputs);
      if (trial == 0) {
        report.entries.push_back({cases[i].name, err, false});
      } else {
        report.entries[i].max_rel_error = std::max(report.entries[i].max_rel_error, err);
      }
    }
  }
  for (auto& e : report.entries) e.passed = e.max_rel_error < tolerance;
  return report;
}

}  // namespace tasktcn::autodiff
