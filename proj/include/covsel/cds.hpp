#pragma once

// Coverage-directed selection: per-group binary classifiers over stimulus
// features, trained on the simulated history, used to pick candidates that
// look like past exercisers of groups that still have holes.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "covsel/core.hpp"
#include "covsel/error.hpp"
#include "covsel/log.hpp"
#include "covsel/prng.hpp"
#include "covsel/tree.hpp"

namespace covsel {

// A group worth targeting: it still has uncovered points, and enough
// simulated tests have exercised it to learn from.
struct TargetGroup {
  GroupId group_id = 0;
  std::vector<TestId> positive_ids;  // simulated exercisers, ascending id
  std::vector<PointId> hole_ids;     // uncovered member points, ascending
};

inline std::vector<TargetGroup> find_target_groups(
    const CoverageState& state, const CoveragePartition& partition,
    const TestDatabase& db, std::uint32_t min_hits) {
  require(min_hits >= 1, "find_target_groups: min_hits must be positive");
  std::vector<std::vector<TestId>> exercisers(partition.group_count());
  for (const TestId id : state.simulated())
    for (const GroupId g : db.groups_of_row[db.row_of_id(id)])
      exercisers[g].push_back(id);

  std::vector<TargetGroup> out;
  for (GroupId g = 0; g < partition.group_count(); ++g) {
    std::vector<PointId> holes;
    for (const PointId p : partition.members[g])
      if (state.hit_counts()[p] == 0) holes.push_back(p);
    if (holes.empty()) continue;
    if (exercisers[g].size() < min_hits) continue;
    TargetGroup t;
    t.group_id = g;
    t.positive_ids = exercisers[g];
    std::sort(t.positive_ids.begin(), t.positive_ids.end());
    t.hole_ids = std::move(holes);
    out.push_back(std::move(t));
  }
  return out;
}

// Balanced training set for one group: positives are exercisers, negatives a
// seeded sample of simulated non-exercisers of the same size. max_per_class
// of 0 means unlimited; a positive value caps both classes (the cap keeps
// tree training affordable on long runs).
struct TrainingSet {
  std::vector<double> features;  // row-major, positives first
  std::vector<std::uint8_t> labels;
  std::vector<TestId> ids;
  std::uint32_t width = 0;
  std::uint32_t n_pos = 0;
  std::uint32_t n_neg = 0;
  bool imbalanced = false;  // fewer negatives than positives were available

  std::size_t size() const { return labels.size(); }
  FeatureMatrix matrix() const {
    return FeatureMatrix{features.data(), labels.size(), width};
  }
};

inline TrainingSet build_training_set(const TargetGroup& group,
                                      const TestDatabase& db,
                                      const CoverageState& state,
                                      SplitMix64& rng,
                                      std::uint32_t max_per_class = 0) {
  require(!group.positive_ids.empty(), "group ", group.group_id,
          " has no exercising tests to learn from");

  std::vector<TestId> positives = group.positive_ids;
  std::vector<TestId> negatives;
  {
    std::vector<TestId> simulated = state.simulated();
    std::sort(simulated.begin(), simulated.end());
    negatives.reserve(simulated.size());
    std::size_t pi = 0;
    for (const TestId id : simulated) {
      while (pi < positives.size() && positives[pi] < id) ++pi;
      if (pi < positives.size() && positives[pi] == id) continue;
      negatives.push_back(id);
    }
  }
  require(!negatives.empty(), "group ", group.group_id,
          ": every simulated test exercises the group; no negative examples "
          "exist");

  const auto cap = max_per_class == 0
                       ? std::numeric_limits<std::uint32_t>::max()
                       : max_per_class;
  if (positives.size() > cap) {
    const auto picks = sample_indices(positives.size(), cap, rng);
    std::vector<TestId> kept;
    kept.reserve(cap);
    for (const auto k : picks) kept.push_back(positives[k]);
    std::sort(kept.begin(), kept.end());
    positives = std::move(kept);
  }
  const std::size_t want_neg = std::min<std::size_t>(positives.size(), cap);
  TrainingSet set;
  if (negatives.size() > want_neg) {
    const auto picks = sample_indices(negatives.size(), want_neg, rng);
    std::vector<TestId> kept;
    kept.reserve(want_neg);
    for (const auto k : picks) kept.push_back(negatives[k]);
    std::sort(kept.begin(), kept.end());
    negatives = std::move(kept);
  } else if (negatives.size() < positives.size()) {
    set.imbalanced = true;
    log_warn("group ", group.group_id, ": only ", negatives.size(),
             " negatives for ", positives.size(),
             " positives; training set is imbalanced");
  }

  set.width = db.dimension;
  set.n_pos = static_cast<std::uint32_t>(positives.size());
  set.n_neg = static_cast<std::uint32_t>(negatives.size());
  set.features.reserve((positives.size() + negatives.size()) * db.dimension);
  const auto append = [&](const std::vector<TestId>& list, std::uint8_t label) {
    for (const TestId id : list) {
      const auto row = db.row(db.row_of_id(id));
      set.features.insert(set.features.end(), row.begin(), row.end());
      set.labels.push_back(label);
      set.ids.push_back(id);
    }
  };
  append(positives, 1);
  append(negatives, 0);
  return set;
}

struct GroupClassifier {
  GroupId group_id = 0;
  DecisionTree tree;
  double epsilon = 0.5;
  std::uint32_t n_pos = 0;
  std::uint32_t n_neg = 0;
  bool imbalanced = false;
};

inline GroupClassifier train_group_classifier(const TargetGroup& group,
                                              const TestDatabase& db,
                                              const CoverageState& state,
                                              TreeHyperparams hp,
                                              double epsilon, SplitMix64& rng,
                                              std::uint32_t max_per_class = 0) {
  require(epsilon > 0.0 && epsilon < 1.0,
          "train_group_classifier: epsilon must be in (0, 1), got ", epsilon);
  const TrainingSet set = build_training_set(group, db, state, rng,
                                             max_per_class);
  GroupClassifier clf;
  clf.group_id = group.group_id;
  clf.epsilon = epsilon;
  clf.n_pos = set.n_pos;
  clf.n_neg = set.n_neg;
  clf.imbalanced = set.imbalanced;
  clf.tree = train_tree(set.matrix(), set.labels, hp);
  return clf;
}

inline double predict_prob(const GroupClassifier& clf,
                           std::span<const double> features) {
  return clf.tree.predict(features);
}

inline int classify(const GroupClassifier& clf,
                    std::span<const double> features) {
  return predict_prob(clf, features) > clf.epsilon ? 1 : 0;
}

struct CdsSelection {
  struct Entry {
    TestId id = 0;
    double prob = 0.0;
  };
  std::vector<GroupId> group_ids;              // ascending
  std::vector<std::vector<Entry>> per_group;   // prob desc, then id asc
  std::vector<TestId> flat;                    // group order, duplicates
                                               // removed keeping the first
};

// For each classifier, the candidates it accepts (probability above epsilon)
// ranked by descending probability with ascending-id tie-break; plus the
// flattened union in (group order, rank order).
inline CdsSelection cds_select(std::span<const TestId> ids,
                               const FeatureMatrix& candidates,
                               const std::vector<GroupClassifier>& classifiers,
                               double epsilon) {
  require(epsilon > 0.0 && epsilon < 1.0,
          "cds_select: epsilon must be in (0, 1), got ", epsilon);
  require(ids.size() == candidates.rows, "cds_select: ", ids.size(),
          " ids for ", candidates.rows, " candidate rows");

  CdsSelection sel;
  sel.group_ids.reserve(classifiers.size());
  sel.per_group.reserve(classifiers.size());
  for (const GroupClassifier& clf : classifiers) {
    require(sel.group_ids.empty() || clf.group_id > sel.group_ids.back(),
            "cds_select: classifiers must be sorted by ascending group id");
    std::vector<CdsSelection::Entry> entries;
    for (std::size_t r = 0; r < candidates.rows; ++r) {
      const double prob = clf.tree.predict(candidates.row(r));
      if (prob > epsilon) entries.push_back({ids[r], prob});
    }
    std::sort(entries.begin(), entries.end(),
              [](const CdsSelection::Entry& a, const CdsSelection::Entry& b) {
                if (a.prob != b.prob) return a.prob > b.prob;
                return a.id < b.id;
              });
    sel.group_ids.push_back(clf.group_id);
    sel.per_group.push_back(std::move(entries));
  }

  std::unordered_set<TestId> seen;
  for (const auto& entries : sel.per_group)
    for (const auto& e : entries)
      if (seen.insert(e.id).second) sel.flat.push_back(e.id);
  return sel;
}

inline std::string render_group_rules(const GroupClassifier& clf) {
  std::string out = concat("group ", clf.group_id, " (pos=", clf.n_pos,
                           ", neg=", clf.n_neg,
                           clf.imbalanced ? ", imbalanced" : "", ")\n");
  out += render_rules(extract_rules(clf.tree, clf.epsilon));
  return out;
}

}  // namespace covsel
