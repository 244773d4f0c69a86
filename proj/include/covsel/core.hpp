#pragma once

// Core data model: tests, coverage points, point groups, and the running
// coverage state of a simulation campaign.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "covsel/error.hpp"

namespace covsel {

using TestId = std::uint32_t;
using PointId = std::uint32_t;
using GroupId = std::uint32_t;

// A stimulus is a point in feature space. Categorical fields are stored as
// small non-negative codes in the same double vector as numeric fields.
struct TestStimulus {
  TestId id = 0;
  std::vector<double> features;
};

// Non-owning view of a row-major feature matrix.
struct FeatureMatrix {
  const double* data = nullptr;
  std::size_t rows = 0;
  std::uint32_t cols = 0;

  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data + r * cols, cols);
  }
};

// The universe of coverage points. Names are optional; when present there is
// one per point.
struct CoverageModel {
  std::uint32_t point_count = 0;
  std::vector<std::string> point_names;

  void validate() const {
    require(point_count > 0, "coverage model has no points");
    require(point_names.empty() || point_names.size() == point_count,
            "coverage model has ", point_names.size(), " names for ",
            point_count, " points");
  }
};

// Disjoint, covering, non-empty grouping of the point universe.
struct CoveragePartition {
  std::vector<GroupId> group_of;               // size point_count
  std::vector<std::vector<PointId>> members;   // size group_count, each sorted

  std::uint32_t group_count() const {
    return static_cast<std::uint32_t>(members.size());
  }

  static CoveragePartition from_group_of(std::vector<GroupId> group_of,
                                         std::uint32_t group_count) {
    CoveragePartition p;
    p.members.resize(group_count);
    for (PointId point = 0; point < group_of.size(); ++point) {
      const GroupId g = group_of[point];
      require(g < group_count, "point ", point, " assigned to group ", g,
              " but there are only ", group_count, " groups");
      p.members[g].push_back(point);
    }
    p.group_of = std::move(group_of);
    for (GroupId g = 0; g < group_count; ++g)
      require(!p.members[g].empty(), "group ", g, " has no points");
    return p;
  }

  void validate(std::uint32_t point_count) const {
    require(group_of.size() == point_count, "partition covers ",
            group_of.size(), " points, model has ", point_count);
    std::size_t total = 0;
    for (GroupId g = 0; g < members.size(); ++g) {
      require(!members[g].empty(), "group ", g, " has no points");
      total += members[g].size();
      require(std::is_sorted(members[g].begin(), members[g].end()),
              "group ", g, " member list is not sorted");
      for (const PointId p : members[g]) {
        require(p < point_count, "group ", g, " references point ", p,
                " outside the model");
        require(group_of[p] == g, "point ", p, " listed in group ", g,
                " but assigned to group ", group_of[p]);
      }
    }
    require(total == point_count, "groups cover ", total, " of ", point_count,
            " points; the partition must be disjoint and covering");
  }
};

// The set of coverage points a test exercises: sorted, unique point ids.
struct CoverageSignature {
  std::vector<PointId> points;
};

// Mutable per-run coverage bookkeeping. hit_count[p] is the number of
// simulated tests whose signature contains p.
class CoverageState {
 public:
  explicit CoverageState(std::uint32_t point_count)
      : hit_count_(point_count, 0) {
    require(point_count > 0, "coverage state needs a non-empty point universe");
  }

  std::uint32_t point_count() const {
    return static_cast<std::uint32_t>(hit_count_.size());
  }
  std::uint32_t covered_points() const { return covered_; }
  const std::vector<std::uint32_t>& hit_counts() const { return hit_count_; }
  const std::vector<TestId>& simulated() const { return simulated_; }
  bool is_simulated(TestId id) const { return simulated_set_.contains(id); }

  double coverage_fraction() const {
    return static_cast<double>(covered_) /
           static_cast<double>(hit_count_.size());
  }

  // Records one simulated test. Rejects repeat simulation of the same id:
  // re-running a test cannot add information and usually signals a selection
  // bug upstream.
  void apply_test(TestId id, const CoverageSignature& sig) {
    require(!simulated_set_.contains(id), "test ", id, " already simulated");
    PointId prev = 0;
    bool first = true;
    for (const PointId p : sig.points) {
      require(p < hit_count_.size(), "signature of test ", id,
              " references point ", p, " outside the model");
      require(first || p > prev, "signature of test ", id,
              " is not sorted-unique");
      first = false;
      prev = p;
      if (hit_count_[p]++ == 0) ++covered_;
    }
    simulated_.push_back(id);
    simulated_set_.insert(id);
  }

 private:
  std::vector<std::uint32_t> hit_count_;
  std::vector<TestId> simulated_;
  std::unordered_set<TestId> simulated_set_;
  std::uint32_t covered_ = 0;
};

inline void apply_test(CoverageState& state, TestId id,
                       const CoverageSignature& sig) {
  state.apply_test(id, sig);
}

// A full replayable test-coverage database: the stimulus pool, the recorded
// signature of every stimulus, the point universe, and its grouping.
struct TestDatabase {
  std::uint32_t dimension = 0;
  std::vector<TestId> ids;            // row -> id, unique
  std::vector<double> features;       // row-major, ids.size() x dimension
  std::vector<CoverageSignature> signatures;  // per row
  CoverageModel model;
  CoveragePartition partition;

  // Derived on finalize().
  std::unordered_map<TestId, std::uint32_t> row_of;
  std::vector<std::vector<GroupId>> groups_of_row;  // sorted unique

  std::size_t size() const { return ids.size(); }

  std::span<const double> row(std::uint32_t r) const {
    return std::span<const double>(features.data() +
                                       static_cast<std::size_t>(r) * dimension,
                                   dimension);
  }

  std::uint32_t row_of_id(TestId id) const {
    const auto it = row_of.find(id);
    require(it != row_of.end(), "unknown test id ", id);
    return it->second;
  }

  // Validates every cross-reference and builds the derived indexes. Must be
  // called once after the raw fields are populated.
  void finalize() {
    require(!ids.empty(), "test database is empty");
    require(dimension > 0, "test database has zero feature fields");
    require(features.size() == ids.size() * static_cast<std::size_t>(dimension),
            "feature matrix has ", features.size(), " values, expected ",
            ids.size() * static_cast<std::size_t>(dimension));
    require(signatures.size() == ids.size(), "database has ",
            signatures.size(), " signatures for ", ids.size(), " tests");
    model.validate();
    partition.validate(model.point_count);

    for (const double v : features)
      require(std::isfinite(v), "non-finite feature value in test database");

    row_of.clear();
    row_of.reserve(ids.size());
    for (std::uint32_t r = 0; r < ids.size(); ++r) {
      const auto [it, inserted] = row_of.emplace(ids[r], r);
      (void)it;
      require(inserted, "duplicate test id ", ids[r]);
    }

    groups_of_row.assign(ids.size(), {});
    for (std::uint32_t r = 0; r < ids.size(); ++r) {
      PointId prev = 0;
      bool first = true;
      auto& groups = groups_of_row[r];
      for (const PointId p : signatures[r].points) {
        require(p < model.point_count, "signature of test ", ids[r],
                " references point ", p, " outside the model");
        require(first || p > prev, "signature of test ", ids[r],
                " is not sorted-unique");
        first = false;
        prev = p;
        groups.push_back(partition.group_of[p]);
      }
      std::sort(groups.begin(), groups.end());
      groups.erase(std::unique(groups.begin(), groups.end()), groups.end());
    }
  }
};

// Replays the recorded signature of a stimulus. This is the oracle: the
// coverage outcome of "simulating" a test is a lookup, never a model guess.
inline const CoverageSignature& simulate(const TestDatabase& db, TestId id) {
  return db.signatures[db.row_of_id(id)];
}

struct GroupStatus {
  GroupId group = 0;
  std::uint32_t exercising_tests = 0;  // simulated tests hitting >= 1 point
  std::uint32_t holes = 0;             // member points with zero hits
};

// Per-group progress summary against the current state. exercising_tests
// counts simulated tests whose signature intersects the group; holes counts
// the group's uncovered points.
inline std::vector<GroupStatus> group_status(const CoverageState& state,
                                             const CoveragePartition& partition,
                                             const TestDatabase& db) {
  require(state.point_count() == db.model.point_count,
          "coverage state tracks ", state.point_count(),
          " points, database has ", db.model.point_count);
  std::vector<GroupStatus> out(partition.group_count());
  for (GroupId g = 0; g < partition.group_count(); ++g) {
    out[g].group = g;
    for (const PointId p : partition.members[g])
      if (state.hit_counts()[p] == 0) ++out[g].holes;
  }
  for (const TestId id : state.simulated()) {
    const auto& groups = db.groups_of_row[db.row_of_id(id)];
    for (const GroupId g : groups) ++out[g].exercising_tests;
  }
  return out;
}

}  // namespace covsel
