#pragma once

#include <cmath>
#include <deque>

#include <Eigen/Core>

namespace hallu {

struct LbfgsOptions {
  int max_iter = 100;
  double tol = 1e-4;  // on the infinity norm of the gradient
  int history = 10;
  int max_backtracks = 50;
};

template <typename Scalar>
struct LbfgsResult {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x;
  Scalar value = 0;
  Scalar grad_norm = 0;
  int iterations = 0;
  bool converged = false;
};

/// Limited-memory BFGS with a backtracking Armijo line search.
/// `objective(x, grad)` returns f(x) and writes the gradient into `grad`.
template <typename Scalar, typename Objective>
LbfgsResult<Scalar> minimize_lbfgs(Objective&& objective,
                                   Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x,
                                   const LbfgsOptions& options = {}) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  struct Pair {
    Vector s, y;
    Scalar rho;
  };

  Vector grad(x.size());
  Scalar f = objective(x, grad);
  std::deque<Pair> memory;

  LbfgsResult<Scalar> result;
  result.grad_norm = grad.template lpNorm<Eigen::Infinity>();
  int iter = 0;
  while (result.grad_norm > options.tol && iter < options.max_iter) {
    // Two-loop recursion for d = -H g.
    Vector q = grad;
    std::vector<Scalar> alpha(memory.size());
    for (std::size_t i = memory.size(); i-- > 0;) {
      alpha[i] = memory[i].rho * memory[i].s.dot(q);
      q -= alpha[i] * memory[i].y;
    }
    Scalar gamma = 1;
    if (!memory.empty()) {
      const auto& last = memory.back();
      gamma = last.s.dot(last.y) / last.y.squaredNorm();
    }
    Vector d = gamma * q;
    for (std::size_t i = 0; i < memory.size(); ++i) {
      const Scalar beta = memory[i].rho * memory[i].y.dot(d);
      d += (alpha[i] - beta) * memory[i].s;
    }
    d = -d;

    Scalar slope = grad.dot(d);
    if (!(slope < 0)) {
      memory.clear();
      d = -grad;
      slope = -grad.squaredNorm();
    }

    Scalar step = memory.empty() ? std::min<Scalar>(1, 1 / grad.norm()) : Scalar(1);
    Vector x_new(x.size());
    Vector grad_new(x.size());
    Scalar f_new = f;
    bool accepted = false;
    for (int k = 0; k < options.max_backtracks; ++k) {
      x_new = x + step * d;
      f_new = objective(x_new, grad_new);
      if (std::isfinite(f_new) && f_new <= f + Scalar(1e-4) * step * slope) {
        accepted = true;
        break;
      }
      step /= 2;
    }
    ++iter;
    if (!accepted) break;

    Vector s = x_new - x;
    Vector y = grad_new - grad;
    const Scalar sy = s.dot(y);
    if (sy > Scalar(1e-12) * y.squaredNorm()) {
      memory.push_back({std::move(s), std::move(y), 1 / sy});
      if (static_cast<int>(memory.size()) > options.history) memory.pop_front();
    }
    x = std::move(x_new);
    grad = std::move(grad_new);
    f = f_new;
    result.grad_norm = grad.template lpNorm<Eigen::Infinity>();
  }

  result.x = std::move(x);
  result.value = f;
  result.iterations = iter;
  result.converged = result.grad_norm <= options.tol;
  return result;
}

}  // namespace hallu
