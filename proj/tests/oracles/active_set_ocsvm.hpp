#pragma once

// Reference solver for the one-class SVM dual
//
//   min 1/2 a'Qa   s.t.   0 <= a_i <= C,   sum_i a_i = 1
//
// by exhaustive enumeration of active-set assignments: each variable is
// pinned at 0, pinned at C, or left free. For every assignment the KKT
// stationarity system on the free block is solved directly (one shared
// multiplier lambda for the equality constraint) and the candidate is kept if
// it lands in the box and satisfies the KKT sign conditions. The problem is
// convex, so any such point is a global minimizer; among numerically
// acceptable candidates the lowest objective wins. Cost is 3^n * O(n^3),
// usable for n up to about 10. Shares no code with the production solver.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace oracle {

struct DualSolution {
  bool found = false;
  std::vector<double> alpha;
  double lambda = 0.0;  // equality multiplier; the decision threshold
  double objective = 0.0;
};

namespace detail {

// Gaussian elimination with partial pivoting on a dense row-major system.
// Returns false when a pivot collapses (singular free block).
inline bool solve_linear(std::vector<double> a, std::vector<double> b,
                         std::size_t n, std::vector<double>& x) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(a[r * n + col]) > std::fabs(a[pivot * n + col])) pivot = r;
    if (std::fabs(a[pivot * n + col]) < 1e-12) return false;
    if (pivot != col) {
      for (std::size_t c = 0; c < n; ++c)
        std::swap(a[col * n + c], a[pivot * n + c]);
      std::swap(b[col], b[pivot]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / a[col * n + col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t col = n; col-- > 0;) {
    double s = b[col];
    for (std::size_t c = col + 1; c < n; ++c) s -= a[col * n + c] * x[c];
    x[col] = s / a[col * n + col];
  }
  return true;
}

}  // namespace detail

inline DualSolution solve_dual(const std::vector<double>& Q, std::size_t n,
                               double C) {
  const double feas_tol = 1e-9;
  const double kkt_tol = 1e-7;
  DualSolution best;

  std::vector<int> state(n);  // 0 = at zero, 1 = at C, 2 = free
  std::vector<std::size_t> free_idx;
  std::vector<double> alpha(n), grad(n), a, b, x;

  std::size_t combos = 1;
  for (std::size_t i = 0; i < n; ++i) combos *= 3;

  for (std::size_t code = 0; code < combos; ++code) {
    std::size_t rem = code;
    free_idx.clear();
    std::size_t upper = 0;
    for (std::size_t i = 0; i < n; ++i) {
      state[i] = static_cast<int>(rem % 3);
      rem /= 3;
      if (state[i] == 1) ++upper;
      if (state[i] == 2) free_idx.push_back(i);
    }
    const std::size_t m = free_idx.size();
    const double free_mass = 1.0 - C * static_cast<double>(upper);
    if (m == 0) {
      if (std::fabs(free_mass) > feas_tol) continue;
    } else if (free_mass < -feas_tol ||
               free_mass > C * static_cast<double>(m) + feas_tol) {
      continue;
    }

    for (std::size_t i = 0; i < n; ++i) alpha[i] = state[i] == 1 ? C : 0.0;

    double lambda = 0.0;
    if (m > 0) {
      // Unknowns: the free alphas, then lambda.
      const std::size_t dim = m + 1;
      a.assign(dim * dim, 0.0);
      b.assign(dim, 0.0);
      for (std::size_t r = 0; r < m; ++r) {
        const std::size_t i = free_idx[r];
        for (std::size_t c = 0; c < m; ++c)
          a[r * dim + c] = Q[i * n + free_idx[c]];
        a[r * dim + m] = -1.0;
        double rhs = 0.0;
        for (std::size_t j = 0; j < n; ++j)
          if (state[j] == 1) rhs -= C * Q[i * n + j];
        b[r] = rhs;
      }
      for (std::size_t c = 0; c < m; ++c) a[m * dim + c] = 1.0;
      b[m] = free_mass;
      if (!detail::solve_linear(a, b, dim, x)) continue;

      bool in_box = true;
      for (std::size_t r = 0; r < m && in_box; ++r)
        in_box = x[r] >= -feas_tol && x[r] <= C + feas_tol;
      if (!in_box) continue;
      for (std::size_t r = 0; r < m; ++r)
        alpha[free_idx[r]] = std::clamp(x[r], 0.0, C);
      lambda = x[m];
    }

    for (std::size_t i = 0; i < n; ++i) {
      double g = 0.0;
      for (std::size_t j = 0; j < n; ++j) g += Q[i * n + j] * alpha[j];
      grad[i] = g;
    }
    if (m == 0) {
      // Any lambda between the bound gradients witnesses optimality.
      double upper_max = -std::numeric_limits<double>::infinity();
      double lower_min = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        if (state[i] == 1) upper_max = std::max(upper_max, grad[i]);
        else lower_min = std::min(lower_min, grad[i]);
      }
      if (upper_max > lower_min + kkt_tol) continue;
      if (std::isfinite(upper_max) && std::isfinite(lower_min))
        lambda = 0.5 * (upper_max + lower_min);
      else if (std::isfinite(upper_max)) lambda = upper_max;
      else lambda = lower_min;
    }

    bool kkt_ok = true;
    for (std::size_t i = 0; i < n && kkt_ok; ++i) {
      if (state[i] == 0 && grad[i] < lambda - kkt_tol) kkt_ok = false;
      if (state[i] == 1 && grad[i] > lambda + kkt_tol) kkt_ok = false;
    }
    if (!kkt_ok) continue;

    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) objective += alpha[i] * grad[i];
    objective *= 0.5;
    if (!best.found || objective < best.objective) {
      best.found = true;
      best.alpha = alpha;
      best.lambda = lambda;
      best.objective = objective;
    }
  }
  return best;
}

// Kernel matrix and scoring helpers, written directly from the RBF formula
// so the oracle path stays independent of the library's algebra.
inline std::vector<double> rbf_matrix(const std::vector<double>& z,
                                      std::size_t n, std::size_t d,
                                      double gamma) {
  std::vector<double> q(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double sq = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = z[i * d + k] - z[j * d + k];
        sq += diff * diff;
      }
      q[i * n + j] = std::exp(-gamma * sq);
    }
  return q;
}

inline double score(const DualSolution& sol, const std::vector<double>& z,
                    std::size_t n, std::size_t d, const double* candidate,
                    double gamma) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (sol.alpha[i] == 0.0) continue;
    double sq = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = candidate[k] - z[i * d + k];
      sq += diff * diff;
    }
    acc += sol.alpha[i] * std::exp(-gamma * sq);
  }
  return acc - sol.lambda;
}

}  // namespace oracle
