#pragma once

// Binary classification tree, CART-style: greedy splits minimizing weighted
// Gini impurity, thresholds at midpoints between consecutive distinct sorted
// feature values.
//
// Split quality is compared in exact integer arithmetic. Minimizing the
// weighted Gini of a candidate split is equivalent to minimizing
//
//   f = posL (nL - posL) / nL + posR (nR - posR) / nR
//
// and two candidates are ordered by cross-multiplying the rational values in
// 128-bit integers. No floating-point tie can flip a result, so training is
// exactly reproducible and ties are broken purely by enumeration order:
// lower feature index first, then lower threshold.

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "covsel/core.hpp"
#include "covsel/error.hpp"
#include "covsel/format.hpp"

namespace covsel {

struct TreeHyperparams {
  std::uint32_t max_depth = 4;
  std::uint32_t min_leaf = 2;

  void validate() const {
    require(max_depth >= 1, "tree: max_depth must be at least 1");
    require(min_leaf >= 1, "tree: min_leaf must be at least 1");
  }
};

struct DecisionTree {
  struct Node {
    std::int32_t left = -1;   // -1 = leaf
    std::int32_t right = -1;
    std::uint32_t feature = 0;
    double threshold = 0.0;
    std::uint32_t samples = 0;
    std::uint32_t positives = 0;

    bool is_leaf() const { return left < 0; }
    double positive_fraction() const {
      return static_cast<double>(positives) / static_cast<double>(samples);
    }
  };

  std::vector<Node> nodes;  // nodes[0] is the root
  std::uint32_t dimension = 0;
  std::uint32_t depth = 0;

  std::uint32_t leaf_index_for(std::span<const double> x) const {
    require(x.size() == dimension, "tree: input has ", x.size(),
            " fields, tree expects ", dimension);
    std::uint32_t at = 0;
    while (!nodes[at].is_leaf()) {
      const Node& nd = nodes[at];
      at = static_cast<std::uint32_t>(x[nd.feature] <= nd.threshold ? nd.left
                                                                    : nd.right);
    }
    return at;
  }

  // Estimated probability of the positive class: the positive fraction of
  // the leaf the input lands in.
  double predict(std::span<const double> x) const {
    return nodes[leaf_index_for(x)].positive_fraction();
  }
};

namespace detail {

struct SplitCost {
  // f = num / den, den > 0. Smaller is better. den < 2^64 (product of two
  // 32-bit counts), so remainder cross-products below cannot overflow.
  unsigned __int128 num = 0;
  unsigned __int128 den = 1;

  bool better_than(const SplitCost& other) const {
    // Naive cross-multiplication overflows 128 bits for node sizes near
    // 2^30; comparing quotient first and then the sub-unit remainders is
    // exact over the whole 32-bit count domain.
    const unsigned __int128 q1 = num / den;
    const unsigned __int128 q2 = other.num / other.den;
    if (q1 != q2) return q1 < q2;
    return (num % den) * other.den < (other.num % other.den) * den;
  }
};

inline SplitCost split_cost(std::uint64_t nL, std::uint64_t posL,
                            std::uint64_t nR, std::uint64_t posR) {
  const unsigned __int128 a =
      static_cast<unsigned __int128>(posL) * (nL - posL);
  const unsigned __int128 b =
      static_cast<unsigned __int128>(posR) * (nR - posR);
  SplitCost c;
  c.num = a * nR + b * nL;
  c.den = static_cast<unsigned __int128>(nL) * nR;
  return c;
}

// Midpoint between consecutive distinct values, pulled back to the lower
// value if rounding would land it on the upper one: a sample equal to the
// threshold goes left, so the threshold must stay below the upper value.
inline double split_threshold(double lo, double hi) {
  const double mid = lo + (hi - lo) / 2.0;
  return mid < hi ? mid : lo;
}

}  // namespace detail

inline DecisionTree train_tree(const FeatureMatrix& features,
                               std::span<const std::uint8_t> labels,
                               TreeHyperparams hp = {}) {
  hp.validate();
  require(features.rows > 0, "tree: empty training set");
  require(features.cols > 0, "tree: zero-width training set");
  require(labels.size() == features.rows, "tree: ", labels.size(),
          " labels for ", features.rows, " rows");
  for (const std::uint8_t l : labels)
    require(l <= 1, "tree: labels must be 0 or 1");

  DecisionTree tree;
  tree.dimension = features.cols;

  struct Pending {
    std::vector<std::uint32_t> rows;
    std::uint32_t node = 0;
    std::uint32_t depth = 0;
  };

  std::vector<std::uint32_t> all(features.rows);
  for (std::uint32_t r = 0; r < features.rows; ++r) all[r] = r;

  tree.nodes.emplace_back();
  std::vector<Pending> stack;
  stack.push_back(Pending{std::move(all), 0, 0});

  std::vector<std::pair<double, std::uint8_t>> column;
  while (!stack.empty()) {
    Pending task = std::move(stack.back());
    stack.pop_back();
    const auto n = static_cast<std::uint32_t>(task.rows.size());
    std::uint32_t pos = 0;
    for (const std::uint32_t r : task.rows) pos += labels[r];
    DecisionTree::Node& node = tree.nodes[task.node];
    node.samples = n;
    node.positives = pos;
    tree.depth = std::max(tree.depth, task.depth);

    const bool pure = pos == 0 || pos == n;
    if (pure || task.depth >= hp.max_depth || n < 2 * hp.min_leaf) continue;

    bool found = false;
    detail::SplitCost best;
    std::uint32_t best_feature = 0;
    double best_threshold = 0.0;
    for (std::uint32_t f = 0; f < features.cols; ++f) {
      column.clear();
      column.reserve(n);
      for (const std::uint32_t r : task.rows)
        column.emplace_back(features.data[static_cast<std::size_t>(r) *
                                              features.cols +
                                          f],
                            labels[r]);
      std::sort(column.begin(), column.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      std::uint32_t nL = 0, posL = 0;
      for (std::uint32_t k = 0; k + 1 < n; ++k) {
        ++nL;
        posL += column[k].second;
        if (column[k].first == column[k + 1].first) continue;
        const std::uint32_t nR = n - nL;
        if (nL < hp.min_leaf || nR < hp.min_leaf) continue;
        const auto cost = detail::split_cost(nL, posL, nR, pos - posL);
        if (!found || cost.better_than(best)) {
          found = true;
          best = cost;
          best_feature = f;
          best_threshold =
              detail::split_threshold(column[k].first, column[k + 1].first);
        }
      }
    }
    if (!found) continue;

    std::vector<std::uint32_t> left_rows, right_rows;
    for (const std::uint32_t r : task.rows) {
      const double v =
          features.data[static_cast<std::size_t>(r) * features.cols +
                        best_feature];
      (v <= best_threshold ? left_rows : right_rows).push_back(r);
    }

    const auto left_index = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    DecisionTree::Node& parent = tree.nodes[task.node];
    parent.feature = best_feature;
    parent.threshold = best_threshold;
    parent.left = left_index;
    parent.right = left_index + 1;
    stack.push_back(Pending{std::move(right_rows),
                            static_cast<std::uint32_t>(left_index + 1),
                            task.depth + 1});
    stack.push_back(Pending{std::move(left_rows),
                            static_cast<std::uint32_t>(left_index),
                            task.depth + 1});
  }
  return tree;
}

struct RuleLiteral {
  std::uint32_t feature = 0;
  bool is_leq = true;  // true: x[feature] <= threshold, false: >
  double threshold = 0.0;
};

struct Rule {
  std::vector<RuleLiteral> literals;  // root-to-leaf order
  int predicted = 0;                  // positive_fraction > epsilon
  double positive_fraction = 0.0;
  std::uint32_t samples = 0;
};

// One rule per leaf, in depth-first left-to-right leaf order. The literals
// are exactly the conditions on the root-to-leaf path, so for any input
// exactly one rule fires.
inline std::vector<Rule> extract_rules(const DecisionTree& tree,
                                       double epsilon) {
  require(epsilon > 0.0 && epsilon < 1.0,
          "extract_rules: epsilon must be in (0, 1), got ", epsilon);
  require(!tree.nodes.empty(), "extract_rules: empty tree");
  std::vector<Rule> rules;
  std::vector<RuleLiteral> path;

  const auto visit = [&](const auto& self, std::uint32_t index) -> void {
    const DecisionTree::Node& nd = tree.nodes[index];
    if (nd.is_leaf()) {
      Rule rule;
      rule.literals = path;
      rule.positive_fraction = nd.positive_fraction();
      rule.predicted = rule.positive_fraction > epsilon ? 1 : 0;
      rule.samples = nd.samples;
      rules.push_back(std::move(rule));
      return;
    }
    path.push_back(RuleLiteral{nd.feature, true, nd.threshold});
    self(self, static_cast<std::uint32_t>(nd.left));
    path.back().is_leq = false;
    self(self, static_cast<std::uint32_t>(nd.right));
    path.pop_back();
  };
  visit(visit, 0);
  return rules;
}

inline std::string render_rule(const Rule& rule) {
  std::string out;
  if (rule.literals.empty()) {
    out = "TRUE";
  } else {
    for (std::size_t i = 0; i < rule.literals.size(); ++i) {
      if (i > 0) out += " AND ";
      const RuleLiteral& lit = rule.literals[i];
      out += concat("f", lit.feature, lit.is_leq ? " <= " : " > ",
                    format_double(lit.threshold));
    }
  }
  out += concat(" -> class ", rule.predicted,
                " (p=", format_fixed(rule.positive_fraction, 2),
                ", n=", rule.samples, ")");
  return out;
}

inline std::string render_rules(const std::vector<Rule>& rules) {
  std::string out;
  for (const Rule& r : rules) {
    out += render_rule(r);
    out += '\n';
  }
  return out;
}

}  // namespace covsel
