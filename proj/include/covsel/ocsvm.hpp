#pragma once

// One-class support vector machine for novelty scoring.
//
// The model solves the standard one-class dual
//
//   min  1/2 a' Q a   s.t.  0 <= a_i <= C,  sum a_i = 1,  C = 1 / (nu n)
//
// with Q_ij = k(x_i, x_j), by sequential minimal optimization on the
// maximal-KKT-violating pair. The dissimilarity score of a candidate x is
//
//   phi(x) = sum_i a_i k(x, sv_i) - theta
//
// where theta is the decision threshold recovered from the margin support
// vectors. More negative phi means less similar to the training set; phi < 0
// classifies x as novel.
//
// Features are standardized per field before the kernel sees them
// (constant fields are dropped with a warning), and the same transform is
// applied to candidates at scoring time.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "covsel/core.hpp"
#include "covsel/error.hpp"
#include "covsel/format.hpp"
#include "covsel/log.hpp"
#include "covsel/parallel.hpp"

namespace covsel {

struct KernelSpec {
  enum class Kind { rbf };
  Kind kind = Kind::rbf;
  // gamma <= 0 selects the default 1 / (d * mean field variance), computed
  // after standardization.
  double gamma = 0.0;
};

struct SolverOptions {
  double tolerance = 1e-5;          // KKT gap below which SMO stops
  std::uint64_t max_iterations = 1'000'000;
  bool standardize = true;
};

// Per-field affine transform fitted on the training matrix. Fields whose
// variance is numerically zero carry no information for an isotropic kernel
// and are dropped.
struct Standardizer {
  std::vector<std::uint32_t> kept;
  std::vector<double> mean;     // per kept field
  std::vector<double> inv_std;  // per kept field
  std::uint32_t input_dim = 0;

  static Standardizer fit(const FeatureMatrix& m) {
    require(m.rows > 0, "standardizer: empty training matrix");
    Standardizer s;
    s.input_dim = m.cols;
    std::vector<double> mean(m.cols, 0.0), var(m.cols, 0.0);
    for (std::size_t r = 0; r < m.rows; ++r) {
      const double* row = m.data + r * m.cols;
      for (std::uint32_t c = 0; c < m.cols; ++c) mean[c] += row[c];
    }
    for (std::uint32_t c = 0; c < m.cols; ++c)
      mean[c] /= static_cast<double>(m.rows);
    for (std::size_t r = 0; r < m.rows; ++r) {
      const double* row = m.data + r * m.cols;
      for (std::uint32_t c = 0; c < m.cols; ++c) {
        const double d = row[c] - mean[c];
        var[c] += d * d;
      }
    }
    std::uint32_t dropped = 0;
    for (std::uint32_t c = 0; c < m.cols; ++c) {
      var[c] /= static_cast<double>(m.rows);
      if (var[c] < 1e-24) {
        ++dropped;
        continue;
      }
      s.kept.push_back(c);
      s.mean.push_back(mean[c]);
      s.inv_std.push_back(1.0 / std::sqrt(var[c]));
    }
    if (dropped > 0)
      log_warn("standardizer: dropped ", dropped,
               " constant field(s) of ", m.cols);
    require(!s.kept.empty(),
            "standardizer: every field is constant; the kernel would be "
            "uninformative");
    return s;
  }

  // Identity transform that keeps all fields (standardize = false).
  static Standardizer identity(std::uint32_t dim) {
    Standardizer s;
    s.input_dim = dim;
    s.kept.resize(dim);
    s.mean.assign(dim, 0.0);
    s.inv_std.assign(dim, 1.0);
    for (std::uint32_t c = 0; c < dim; ++c) s.kept[c] = c;
    return s;
  }

  std::uint32_t output_dim() const {
    return static_cast<std::uint32_t>(kept.size());
  }

  void apply(std::span<const double> in, double* out) const {
    for (std::size_t k = 0; k < kept.size(); ++k)
      out[k] = (in[kept[k]] - mean[k]) * inv_std[k];
  }

  std::vector<double> apply_matrix(const FeatureMatrix& m) const {
    require(m.cols == input_dim, "standardizer fitted on ", input_dim,
            " fields, applied to ", m.cols);
    std::vector<double> out(m.rows * kept.size());
    for (std::size_t r = 0; r < m.rows; ++r)
      apply(m.row(r), out.data() + r * kept.size());
    return out;
  }
};

struct NoveltyModel {
  KernelSpec kernel;  // gamma resolved to its effective value
  double nu = 0.5;
  double theta = 0.0;
  Standardizer standardizer;

  std::vector<TestId> support_ids;
  std::vector<double> alphas;            // same order as support_ids
  std::vector<double> support_features;  // standardized, n_sv x output_dim
  std::vector<double> support_sqnorm;

  std::size_t training_size = 0;
  std::uint64_t iterations = 0;
  bool hit_iteration_cap = false;
  double dual_objective = 0.0;

  std::size_t support_count() const { return support_ids.size(); }
};

namespace detail {

inline double rbf_from_sq(double sqdist, double gamma) {
  return std::exp(-gamma * sqdist);
}

inline double sqdist(const double* a, const double* b, std::uint32_t d) {
  double s = 0.0;
  for (std::uint32_t k = 0; k < d; ++k) {
    const double diff = a[k] - b[k];
    s += diff * diff;
  }
  return s;
}

// Default gamma: 1 / (d * mean per-field variance) of the given matrix.
inline double default_gamma(const double* data, std::size_t rows,
                            std::uint32_t cols) {
  double total_var = 0.0;
  for (std::uint32_t c = 0; c < cols; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < rows; ++r) mean += data[r * cols + c];
    mean /= static_cast<double>(rows);
    double var = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      const double d = data[r * cols + c] - mean;
      var += d * d;
    }
    total_var += var / static_cast<double>(rows);
  }
  const double mean_var = total_var / static_cast<double>(cols);
  if (mean_var <= 0.0) return 1.0;
  return 1.0 / (static_cast<double>(cols) * mean_var);
}

}  // namespace detail

inline NoveltyModel train_ocsvm(const FeatureMatrix& training,
                                std::span<const TestId> ids, double nu,
                                KernelSpec kernel = {},
                                SolverOptions options = {}) {
  const std::size_t n = training.rows;
  require(n > 0, "ocsvm: empty training set");
  require(training.cols > 0, "ocsvm: zero-width training set");
  require(nu > 0.0 && nu <= 1.0, "ocsvm: nu must be in (0, 1], got ", nu);
  require(ids.empty() || ids.size() == n, "ocsvm: ", ids.size(),
          " ids for ", n, " training rows");
  const double nu_n = nu * static_cast<double>(n);
  require(nu_n >= 1.0, "ocsvm: nu * n = ", nu_n,
          " < 1; the equality constraint is infeasible (add training points "
          "or raise nu)");
  for (std::size_t i = 0; i < n * training.cols; ++i)
    require(std::isfinite(training.data[i]),
            "ocsvm: non-finite training feature");

  NoveltyModel model;
  model.nu = nu;
  model.training_size = n;
  model.standardizer = options.standardize
                           ? Standardizer::fit(training)
                           : Standardizer::identity(training.cols);
  const std::uint32_t d = model.standardizer.output_dim();
  const std::vector<double> z = model.standardizer.apply_matrix(training);

  model.kernel = kernel;
  if (model.kernel.gamma <= 0.0)
    model.kernel.gamma = detail::default_gamma(z.data(), n, d);
  const double gamma = model.kernel.gamma;

  // Dense kernel matrix. Callers cap the training size; at the default cap
  // of 4096 rows this is 128 MiB, transient.
  std::vector<double> Q(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    Q[i * n + i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double k = detail::rbf_from_sq(
          detail::sqdist(z.data() + i * d, z.data() + j * d, d), gamma);
      Q[i * n + j] = k;
      Q[j * n + i] = k;
    }
  }

  const double C = 1.0 / nu_n;
  std::vector<double> alpha(n, 0.0);
  {
    const auto full = static_cast<std::size_t>(nu_n);  // floor
    for (std::size_t i = 0; i < full && i < n; ++i) alpha[i] = C;
    const double frac = nu_n - static_cast<double>(full);
    if (frac > 0.0 && full < n) alpha[full] = C * frac;
  }

  std::vector<double> G(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (alpha[i] == 0.0) continue;
    const double a = alpha[i];
    const double* qrow = Q.data() + i * n;
    for (std::size_t k = 0; k < n; ++k) G[k] += a * qrow[k];
  }

  std::uint64_t iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    // Maximal violating pair: take mass from the highest gradient among
    // movable-down, give it to the lowest gradient among movable-up.
    std::size_t i = n, j = n;
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
      if (alpha[k] > 0.0 && G[k] > gmax) {
        gmax = G[k];
        i = k;
      }
      if (alpha[k] < C && G[k] < gmin) {
        gmin = G[k];
        j = k;
      }
    }
    if (i == n || j == n || gmax - gmin < options.tolerance) break;

    const double denom =
        std::max(Q[i * n + i] + Q[j * n + j] - 2.0 * Q[i * n + j], 1e-12);
    double delta = (gmax - gmin) / denom;
    const double room_i = alpha[i];
    const double room_j = C - alpha[j];
    if (delta >= room_i && room_i <= room_j) {
      delta = room_i;
      alpha[i] = 0.0;
      alpha[j] += delta;
      if (alpha[j] > C) alpha[j] = C;
    } else if (delta >= room_j) {
      delta = room_j;
      alpha[j] = C;
      alpha[i] -= delta;
      if (alpha[i] < 0.0) alpha[i] = 0.0;
    } else {
      alpha[i] -= delta;
      alpha[j] += delta;
    }
    const double* qi = Q.data() + i * n;
    const double* qj = Q.data() + j * n;
    for (std::size_t k = 0; k < n; ++k) G[k] += delta * (qj[k] - qi[k]);
  }
  model.iterations = iter;
  if (iter == options.max_iterations) {
    model.hit_iteration_cap = true;
    log_warn("ocsvm: SMO stopped at the iteration cap (",
             options.max_iterations, "); the solution may be inexact");
  }

  // Refresh the gradient from scratch: theta and the reported objective
  // should not carry the solver's accumulated update error.
  std::fill(G.begin(), G.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (alpha[i] == 0.0) continue;
    const double a = alpha[i];
    const double* qrow = Q.data() + i * n;
    for (std::size_t k = 0; k < n; ++k) G[k] += a * qrow[k];
  }
  double objective = 0.0;
  for (std::size_t i = 0; i < n; ++i) objective += alpha[i] * G[i];
  model.dual_objective = 0.5 * objective;

  // theta: mean gradient over margin support vectors; if none exist, the
  // midpoint of the KKT interval [max G at upper bound, min G at lower
  // bound], or whichever side exists.
  const double margin_tol = C * 1e-8;
  double theta_sum = 0.0;
  std::size_t margin_count = 0;
  double at_upper = -std::numeric_limits<double>::infinity();
  double at_zero = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    if (alpha[k] > margin_tol && alpha[k] < C - margin_tol) {
      theta_sum += G[k];
      ++margin_count;
    } else if (alpha[k] >= C - margin_tol) {
      at_upper = std::max(at_upper, G[k]);
    } else {
      at_zero = std::min(at_zero, G[k]);
    }
  }
  if (margin_count > 0) {
    model.theta = theta_sum / static_cast<double>(margin_count);
  } else {
    const bool have_upper = std::isfinite(at_upper);
    const bool have_zero = std::isfinite(at_zero);
    if (have_upper && have_zero) model.theta = 0.5 * (at_upper + at_zero);
    else if (have_upper) model.theta = at_upper;
    else model.theta = at_zero;
  }

  for (std::size_t k = 0; k < n; ++k) {
    if (alpha[k] <= 0.0) continue;
    model.support_ids.push_back(ids.empty() ? static_cast<TestId>(k) : ids[k]);
    model.alphas.push_back(alpha[k]);
    const double* zr = z.data() + k * d;
    model.support_features.insert(model.support_features.end(), zr, zr + d);
    double sq = 0.0;
    for (std::uint32_t c = 0; c < d; ++c) sq += zr[c] * zr[c];
    model.support_sqnorm.push_back(sq);
  }
  return model;
}

inline NoveltyModel train_ocsvm(const FeatureMatrix& training, double nu,
                                KernelSpec kernel = {},
                                SolverOptions options = {}) {
  return train_ocsvm(training, std::span<const TestId>{}, nu, kernel, options);
}

namespace detail {

// phi for one standardized candidate against the support set.
inline double score_standardized(const NoveltyModel& model, const double* zc,
                                 double zc_sqnorm) {
  const std::uint32_t d = model.standardizer.output_dim();
  const std::size_t n_sv = model.support_count();
  const double gamma = model.kernel.gamma;
  double acc = 0.0;
  for (std::size_t s = 0; s < n_sv; ++s) {
    const double* sv = model.support_features.data() + s * d;
    double dot = 0.0;
    for (std::uint32_t k = 0; k < d; ++k) dot += zc[k] * sv[k];
    const double sq = zc_sqnorm + model.support_sqnorm[s] - 2.0 * dot;
    acc += model.alphas[s] * std::exp(-gamma * (sq > 0.0 ? sq : 0.0));
  }
  return acc - model.theta;
}

}  // namespace detail

inline double dissimilarity_score(const NoveltyModel& model,
                                  std::span<const double> features) {
  require(features.size() == model.standardizer.input_dim,
          "ocsvm: candidate has ", features.size(), " fields, model expects ",
          model.standardizer.input_dim);
  const std::uint32_t d = model.standardizer.output_dim();
  std::vector<double> zc(d);
  model.standardizer.apply(features, zc.data());
  double sq = 0.0;
  for (std::uint32_t k = 0; k < d; ++k) sq += zc[k] * zc[k];
  return detail::score_standardized(model, zc.data(), sq);
}

inline bool is_novel(const NoveltyModel& model,
                     std::span<const double> features) {
  return dissimilarity_score(model, features) < 0.0;
}

// Scores a block of candidates. Each index writes its own slot, so the
// result is identical for any thread count.
inline std::vector<double> score_many(const NoveltyModel& model,
                                      const FeatureMatrix& candidates,
                                      unsigned threads = 1) {
  require(candidates.cols == model.standardizer.input_dim,
          "ocsvm: candidates have ", candidates.cols,
          " fields, model expects ", model.standardizer.input_dim);
  const std::uint32_t d = model.standardizer.output_dim();
  std::vector<double> scores(candidates.rows);
  parallel_for(candidates.rows, threads, [&](std::size_t r) {
    double zc[512];
    std::vector<double> zc_heap;
    double* zp = zc;
    if (d > 512) {
      zc_heap.resize(d);
      zp = zc_heap.data();
    }
    model.standardizer.apply(candidates.row(r), zp);
    double sq = 0.0;
    for (std::uint32_t k = 0; k < d; ++k) sq += zp[k] * zp[k];
    scores[r] = detail::score_standardized(model, zp, sq);
  });
  return scores;
}

struct ScoredCandidate {
  TestId id = 0;
  double score = 0.0;  // phi; ascending = most novel first
};

// Ranks candidates by ascending phi, ties broken by ascending id. Duplicate
// candidate ids are rejected.
inline std::vector<ScoredCandidate> rank_by_novelty(
    const NoveltyModel& model, std::span<const TestId> ids,
    const FeatureMatrix& candidates, unsigned threads = 1) {
  require(ids.size() == candidates.rows, "ocsvm: ", ids.size(), " ids for ",
          candidates.rows, " candidate rows");
  const std::vector<double> scores = score_many(model, candidates, threads);
  std::vector<ScoredCandidate> out(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i)
    out[i] = ScoredCandidate{ids[i], scores[i]};
  std::sort(out.begin(), out.end(),
            [](const ScoredCandidate& a, const ScoredCandidate& b) {
              if (a.score != b.score) return a.score < b.score;
              return a.id < b.id;
            });
  for (std::size_t i = 1; i < out.size(); ++i)
    require(out[i].id != out[i - 1].id, "ocsvm: duplicate candidate id ",
            out[i].id);
  return out;
}

// Full-precision text dump: nu, gamma, theta, then one (id, alpha) line per
// support vector.
inline std::string render_model_dump(const NoveltyModel& model) {
  std::string out;
  out += concat("nu ", format_double(model.nu), '\n');
  out += concat("gamma ", format_double(model.kernel.gamma), '\n');
  out += concat("theta ", format_double(model.theta), '\n');
  out += concat("training_size ", model.training_size, '\n');
  out += concat("support_vectors ", model.support_count(), '\n');
  for (std::size_t s = 0; s < model.support_count(); ++s)
    out += concat(model.support_ids[s], ' ', format_double(model.alphas[s]),
                  '\n');
  return out;
}

}  // namespace covsel
