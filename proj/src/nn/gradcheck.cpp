#include "cast/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace cast::nn {

GradCheckResult grad_check(const std::function<Var(Tape<double>&)>& build_loss, ParamSet<double>& params,
                           const GradCheckOptions& opts) {
  params.zero_grad();
  GradCheckResult res;
  {
    Tape<double> tape(&params);
    Var loss = build_loss(tape);
    tape.backward(loss);
    res.loss = tape.scalar(loss);
    tape.add_param_grads_to(params);
  }
  auto eval = [&] {
    Tape<double> tape(&params);
    return tape.scalar(build_loss(tape));
  };

  std::mt19937_64 rng(opts.seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi];
    const std::size_t n = static_cast<std::size_t>(p.value.size());
    std::size_t want = std::max<std::size_t>(opts.min_coords, static_cast<std::size_t>(std::ceil(opts.fraction * n)));
    want = std::min(want, n);
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(want);
    for (std::size_t k : idx) {
      double& x = p.value.data()[k];
      const double saved = x;
      x = saved + opts.eps;
      double up = eval();
      x = saved - opts.eps;
      double down = eval();
      x = saved;
      double numeric = (up - down) / (2.0 * opts.eps);
      double analytic = p.grad.data()[k];
      double err = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      ++res.coords;
      res.rel_errors.push_back(err);
      res.analytic.push_back(analytic);
      res.max_abs_error = std::max(res.max_abs_error, std::abs(analytic - numeric));
      if (err > res.max_rel_error) {
        res.max_rel_error = err;
        res.worst_param = p.name + "[" + std::to_string(k) + "]";
        res.worst_analytic = analytic;
        res.worst_numeric = numeric;
      }
    }
  }
  return res;
}

double GradCheckResult::resolution(double eps) const {
  return (std::nextafter(std::abs(loss), 1e300) - std::abs(loss)) / (2.0 * eps);
}

std::size_t GradCheckResult::count_above(double tol) const {
  return static_cast<std::size_t>(std::count_if(rel_errors.begin(), rel_errors.end(), [&](double e) { return e > tol; }));
}

}  // namespace cast::nn
