#pragma once

// Synthetic database generator.
//
// Stimuli are drawn from an equal-weight mixture of isotropic Gaussian
// clusters over the numeric fields (values clamped to [0, 1] and quantized to
// six decimals) with a per-cluster preferred value on each categorical field.
// Every coverage point is a conjunction of per-field predicates anchored at a
// "witness" stimulus, so each point is satisfiable by construction unless its
// interval width underflows. Witnesses are drawn with probability
// proportional to the squared spread of their cluster, which concentrates
// coverage points in sparsely populated regions of feature space; that is
// what gives novelty- and coverage-directed selection something to find.
//
// All drawing is done on streams derived from (seed, purpose, index), so any
// point or test can be regenerated in isolation and the output is independent
// of evaluation order.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <set>
#include <vector>

#include "covsel/core.hpp"
#include "covsel/error.hpp"
#include "covsel/log.hpp"
#include "covsel/prng.hpp"

namespace covsel {

struct SyntheticSpec {
  std::uint64_t n_tests = 0;
  std::uint32_t n_numeric_fields = 0;
  std::uint32_t n_categorical_fields = 0;
  std::uint32_t categorical_cardinality = 8;
  std::uint32_t n_points = 0;
  std::uint32_t n_groups = 0;
  std::uint32_t predicates_per_point = 3;
  double rarity_exponent = 2.0;
  std::uint32_t mixture_components = 12;
  std::uint64_t seed = 1;

  std::uint32_t dimension() const {
    return n_numeric_fields + n_categorical_fields;
  }

  void validate() const {
    require(n_tests > 0, "synthetic: n_tests must be positive");
    require(dimension() > 0, "synthetic: at least one field is required");
    require(n_points > 0, "synthetic: n_points must be positive");
    require(n_groups > 0, "synthetic: n_groups must be positive");
    require(n_groups <= n_points, "synthetic: n_groups (", n_groups,
            ") exceeds n_points (", n_points, ")");
    require(predicates_per_point >= 1,
            "synthetic: predicates_per_point must be positive");
    require(predicates_per_point <= dimension(),
            "synthetic: predicates_per_point (", predicates_per_point,
            ") exceeds the field count (", dimension(), ")");
    require(n_categorical_fields == 0 || categorical_cardinality >= 2,
            "synthetic: categorical_cardinality must be at least 2");
    require(rarity_exponent >= 0.0,
            "synthetic: rarity_exponent must be non-negative");
    require(mixture_components >= 1,
            "synthetic: mixture_components must be positive");
    // Groups are distinct field subsets; there must be enough of them.
    long double combos = 1.0L;
    for (std::uint32_t i = 0; i < predicates_per_point; ++i) {
      combos *= static_cast<long double>(dimension() - i) /
                static_cast<long double>(i + 1);
      if (combos > 1e18L) break;
    }
    require(static_cast<long double>(n_groups) <= combos,
            "synthetic: n_groups (", n_groups,
            ") exceeds the number of distinct field subsets of size ",
            predicates_per_point);
  }
};

// One predicate of a coverage point. Numeric predicates are half-open
// intervals lo <= x < hi, except that hi >= 1 is treated as closed because
// feature values are clamped to [0, 1]. A zero-width interval is empty.
// Categorical predicates test equality of the stored code.
struct Predicate {
  std::uint32_t field = 0;
  bool categorical = false;
  double lo = 0.0;
  double hi = 0.0;
  double category = 0.0;

  bool matches(double value) const {
    if (categorical) return value == category;
    if (hi >= 1.0) return value >= lo && value <= 1.0;
    return value >= lo && value < hi;
  }
};

struct SyntheticPoint {
  std::vector<Predicate> predicates;
  GroupId group = 0;
};

// Distribution of hits per point: bucket 0 counts unreachable points, bucket
// b >= 1 counts points hit by h tests with floor(log2(h)) == b - 1 (the last
// bucket absorbs everything above).
struct ReachabilityReport {
  std::uint32_t points = 0;
  std::uint32_t reachable = 0;
  std::array<std::uint64_t, 18> hit_histogram{};

  double reachable_fraction() const {
    return points == 0 ? 0.0
                       : static_cast<double>(reachable) /
                             static_cast<double>(points);
  }
};

struct SyntheticResult {
  TestDatabase db;
  std::vector<SyntheticPoint> points;
  ReachabilityReport report;
};

namespace detail {

// Per-cluster spread, log-uniform over [0.02, 0.32]. The wide ratio matters:
// dense and sparse clusters must coexist for rarity weighting to bite.
inline constexpr double kSigmaMin = 0.02;
inline constexpr double kSigmaMax = 0.32;
// Probability that a categorical field takes its cluster's preferred value.
inline constexpr double kCategoricalPreference = 0.75;

inline double quantize6(double v) {
  return std::nearbyint(v * 1e6) / 1e6;
}

struct ClusterParams {
  std::vector<double> center;           // numeric fields
  double sigma = 0.1;
  std::vector<std::uint32_t> preferred; // categorical fields
};

inline std::vector<ClusterParams> draw_clusters(const SyntheticSpec& spec) {
  SplitMix64 rng = derive_stream(spec.seed, StreamPurpose::synth_clusters);
  std::vector<ClusterParams> clusters(spec.mixture_components);
  const double log_min = std::log(kSigmaMin);
  const double log_max = std::log(kSigmaMax);
  for (auto& c : clusters) {
    c.center.resize(spec.n_numeric_fields);
    for (double& v : c.center) v = rng.next_double();
    c.sigma = std::exp(log_min + (log_max - log_min) * rng.next_double());
    c.preferred.resize(spec.n_categorical_fields);
    for (auto& v : c.preferred)
      v = static_cast<std::uint32_t>(rng.below(spec.categorical_cardinality));
  }
  return clusters;
}

}  // namespace detail

inline SyntheticResult generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::uint32_t dim = spec.dimension();

  const auto clusters = detail::draw_clusters(spec);

  SyntheticResult result;
  TestDatabase& db = result.db;
  db.dimension = dim;
  db.ids.resize(spec.n_tests);
  db.features.resize(spec.n_tests * static_cast<std::size_t>(dim));
  std::vector<std::uint32_t> cluster_of(spec.n_tests);
  std::vector<std::vector<std::uint32_t>> cluster_members(
      spec.mixture_components);

  for (std::uint64_t t = 0; t < spec.n_tests; ++t) {
    SplitMix64 rng = derive_stream(spec.seed, StreamPurpose::synth_test, t);
    const auto c = static_cast<std::uint32_t>(rng.below(spec.mixture_components));
    cluster_of[t] = c;
    cluster_members[c].push_back(static_cast<std::uint32_t>(t));
    db.ids[t] = static_cast<TestId>(t);
    double* row = db.features.data() + t * dim;
    for (std::uint32_t f = 0; f < spec.n_numeric_fields; ++f) {
      const double raw = clusters[c].center[f] + clusters[c].sigma * rng.normal();
      row[f] = detail::quantize6(std::clamp(raw, 0.0, 1.0));
    }
    for (std::uint32_t f = 0; f < spec.n_categorical_fields; ++f) {
      const std::uint32_t preferred = clusters[c].preferred[f];
      const bool keep = rng.next_double() < detail::kCategoricalPreference;
      const auto value =
          keep ? preferred
               : static_cast<std::uint32_t>(
                     rng.below(spec.categorical_cardinality));
      row[spec.n_numeric_fields + f] = static_cast<double>(value);
    }
  }

  // Distinct field subsets, one per group. Rejection sampling is fine: the
  // spec guarantees enough combinations exist.
  std::vector<std::vector<std::uint32_t>> subsets;
  {
    SplitMix64 rng = derive_stream(spec.seed, StreamPurpose::synth_subsets);
    std::set<std::vector<std::uint32_t>> seen;
    while (subsets.size() < spec.n_groups) {
      auto fields = sample_indices(dim, spec.predicates_per_point, rng);
      std::vector<std::uint32_t> key(fields.begin(), fields.end());
      std::sort(key.begin(), key.end());
      if (seen.insert(key).second) subsets.push_back(std::move(key));
    }
  }

  // Witness cluster weights: squared spread, zeroed for empty clusters.
  std::vector<double> cluster_weight(spec.mixture_components, 0.0);
  double total_weight = 0.0;
  for (std::uint32_t c = 0; c < spec.mixture_components; ++c) {
    if (cluster_members[c].empty()) continue;
    cluster_weight[c] = clusters[c].sigma * clusters[c].sigma;
    total_weight += cluster_weight[c];
  }

  result.points.resize(spec.n_points);
  std::vector<GroupId> group_of_point(spec.n_points);
  for (std::uint32_t i = 0; i < spec.n_points; ++i) {
    SplitMix64 rng = derive_stream(spec.seed, StreamPurpose::synth_point, i);
    const GroupId g = i % spec.n_groups;
    group_of_point[i] = g;
    SyntheticPoint& point = result.points[i];
    point.group = g;

    // Witness pick: cluster by weight, then a uniform member.
    const double r = rng.next_double() * total_weight;
    std::uint32_t chosen = 0;
    double cum = 0.0;
    for (std::uint32_t c = 0; c < spec.mixture_components; ++c) {
      cum += cluster_weight[c];
      if (r < cum || c + 1 == spec.mixture_components) {
        chosen = c;
        break;
      }
    }
    while (cluster_members[chosen].empty()) chosen = (chosen + 1) % spec.mixture_components;
    const std::uint32_t witness =
        cluster_members[chosen][rng.below(cluster_members[chosen].size())];
    const double* wrow = db.features.data() +
                         static_cast<std::size_t>(witness) * dim;

    for (const std::uint32_t f : subsets[g]) {
      Predicate p;
      p.field = f;
      if (f < spec.n_numeric_fields) {
        const double u = rng.next_double();
        const double width = std::pow(10.0, -spec.rarity_exponent * u);
        // Shift the interval inside [0, 1] so the witness stays a member
        // whenever the width is representable around it.
        const double lo =
            std::clamp(wrow[f] - width / 2.0, 0.0, std::max(0.0, 1.0 - width));
        p.lo = lo;
        p.hi = lo + width;
      } else {
        p.categorical = true;
        p.category = wrow[f];
      }
      point.predicates.push_back(p);
    }
  }

  // Evaluate signatures. Points are visited in id order, so each signature
  // comes out sorted.
  db.signatures.assign(spec.n_tests, {});
  std::vector<std::uint32_t> hits(spec.n_points, 0);
  for (std::uint32_t i = 0; i < spec.n_points; ++i) {
    const auto& preds = result.points[i].predicates;
    for (std::uint64_t t = 0; t < spec.n_tests; ++t) {
      const double* row = db.features.data() + t * dim;
      bool all = true;
      for (const Predicate& p : preds) {
        if (!p.matches(row[p.field])) {
          all = false;
          break;
        }
      }
      if (all) {
        db.signatures[t].points.push_back(i);
        ++hits[i];
      }
    }
  }

  ReachabilityReport& report = result.report;
  report.points = spec.n_points;
  for (std::uint32_t i = 0; i < spec.n_points; ++i) {
    if (hits[i] == 0) {
      ++report.hit_histogram[0];
      continue;
    }
    ++report.reachable;
    std::uint32_t bucket = 1;
    std::uint32_t h = hits[i];
    while (h > 1 && bucket + 1 < report.hit_histogram.size()) {
      h >>= 1;
      ++bucket;
    }
    ++report.hit_histogram[bucket];
  }
  require(report.reachable > 0,
          "synthetic spec produced zero reachable coverage points; widen the "
          "predicates (lower rarity_exponent) or add tests");
  if (report.reachable < report.points)
    log_info("synthetic: ", report.points - report.reachable, " of ",
             report.points, " points are unreachable");

  db.model.point_count = spec.n_points;
  db.model.point_names.reserve(spec.n_points);
  for (std::uint32_t i = 0; i < spec.n_points; ++i)
    db.model.point_names.push_back(concat("pt", i, "_g", group_of_point[i]));
  db.partition = CoveragePartition::from_group_of(std::move(group_of_point),
                                                  spec.n_groups);
  db.finalize();
  return result;
}

inline std::string render_reachability(const ReachabilityReport& report) {
  std::string out;
  out += concat("points ", report.points, '\n');
  out += concat("reachable ", report.reachable, '\n');
  char frac[32];
  std::snprintf(frac, sizeof(frac), "%.4f", report.reachable_fraction());
  out += concat("reachable_fraction ", frac, '\n');
  out += "hits_per_point_histogram\n";
  out += concat("  0 hits: ", report.hit_histogram[0], '\n');
  for (std::size_t b = 1; b < report.hit_histogram.size(); ++b) {
    if (report.hit_histogram[b] == 0) continue;
    const std::uint64_t lo = 1ULL << (b - 1);
    const std::uint64_t hi = (1ULL << b) - 1;
    if (b + 1 == report.hit_histogram.size())
      out += concat("  >=", lo, " hits: ", report.hit_histogram[b], '\n');
    else if (lo == hi)
      out += concat("  ", lo, " hits: ", report.hit_histogram[b], '\n');
    else
      out += concat("  ", lo, "-", hi, " hits: ", report.hit_histogram[b],
                    '\n');
  }
  return out;
}

}  // namespace covsel
