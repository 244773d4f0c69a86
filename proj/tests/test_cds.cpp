#include <algorithm>
#include <set>
#include <vector>

#include "catch_amalgamated.hpp"
#include "covsel/cds.hpp"
#include "covsel/synthetic.hpp"

using namespace covsel;

namespace {

// 8 tests over 6 points in 3 groups; features separate exercisers of group 0
// on field 0. Group layout: g0 = {0,1}, g1 = {2,3}, g2 = {4,5}.
TestDatabase make_db() {
  TestDatabase db;
  db.dimension = 2;
  const std::vector<std::vector<PointId>> sigs = {
      {0},     // t0: group 0
      {0, 2},  // t1: groups 0, 1
      {2},     // t2: group 1
      {3},     // t3: group 1
      {4},     // t4: group 2
      {},      // t5: nothing
      {0},     // t6: group 0
      {2, 4},  // t7: groups 1, 2
  };
  for (TestId t = 0; t < 8; ++t) {
    db.ids.push_back(t);
    // Field 0 is high exactly for the group-0 exercisers {0, 1, 6}.
    const bool g0 = t == 0 || t == 1 || t == 6;
    db.features.push_back(g0 ? 0.9 : 0.1);
    db.features.push_back(0.5);
    db.signatures.push_back({sigs[t]});
  }
  db.model.point_count = 6;
  db.partition = CoveragePartition::from_group_of({0, 0, 1, 1, 2, 2}, 3);
  db.finalize();
  return db;
}

CoverageState simulate_all(const TestDatabase& db,
                           const std::vector<TestId>& ids) {
  CoverageState state(db.model.point_count);
  for (const TestId id : ids) apply_test(state, id, simulate(db, id));
  return state;
}

}  // namespace

TEST_CASE("target groups need holes and enough exercisers", "[cds]") {
  const TestDatabase db = make_db();
  // Simulate t0, t1, t2, t4: group 0 has exercisers {t0, t1} and hole 1;
  // group 1 has exercisers {t1, t2} and hole 3; group 2 has {t4}, hole 5.
  const CoverageState state = simulate_all(db, {0, 1, 2, 4});

  const auto targets = find_target_groups(state, db.partition, db, 2);
  REQUIRE(targets.size() == 2);  // group 2 has only one exerciser
  CHECK(targets[0].group_id == 0);
  CHECK(targets[0].positive_ids == std::vector<TestId>{0, 1});
  CHECK(targets[0].hole_ids == std::vector<PointId>{1});
  CHECK(targets[1].group_id == 1);
  CHECK(targets[1].positive_ids == std::vector<TestId>{1, 2});
  CHECK(targets[1].hole_ids == std::vector<PointId>{3});

  const auto lax = find_target_groups(state, db.partition, db, 1);
  REQUIRE(lax.size() == 3);
  CHECK(lax[2].group_id == 2);
  CHECK(lax[2].positive_ids == std::vector<TestId>{4});

  CHECK_THROWS_AS(find_target_groups(state, db.partition, db, 0), Error);
}

TEST_CASE("fully covered groups are not targets", "[cds]") {
  const TestDatabase db = make_db();
  // t0..t3 cover points 0, 2, 3: group 1 is fully covered.
  const CoverageState state = simulate_all(db, {0, 1, 2, 3});
  const auto targets = find_target_groups(state, db.partition, db, 1);
  for (const auto& t : targets) CHECK(t.group_id != 1);
}

TEST_CASE("training sets are balanced and positives-first", "[cds]") {
  const TestDatabase db = make_db();
  const CoverageState state = simulate_all(db, {0, 1, 2, 3, 4, 5, 6});
  const auto targets = find_target_groups(state, db.partition, db, 1);
  REQUIRE_FALSE(targets.empty());
  CHECK(targets[0].group_id == 0);
  // Positives for group 0: {0, 1, 6}; negatives drawn from {2, 3, 4, 5}.
  SplitMix64 rng(1);
  const TrainingSet set = build_training_set(targets[0], db, state, rng);
  CHECK(set.n_pos == 3);
  CHECK(set.n_neg == 3);
  CHECK_FALSE(set.imbalanced);
  CHECK(set.width == 2);
  CHECK(set.size() == 6);
  for (std::size_t i = 0; i < 3; ++i) CHECK(set.labels[i] == 1);
  for (std::size_t i = 3; i < 6; ++i) CHECK(set.labels[i] == 0);
  CHECK(std::vector<TestId>(set.ids.begin(), set.ids.begin() + 3) ==
        std::vector<TestId>{0, 1, 6});
  // Sampled negatives keep ascending id order and are non-exercisers.
  CHECK(std::is_sorted(set.ids.begin() + 3, set.ids.end()));
  for (std::size_t i = 3; i < 6; ++i)
    CHECK(std::set<TestId>{2, 3, 4, 5}.count(set.ids[i]) == 1);
  // Feature rows match the database rows for each id.
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto want = db.row(db.row_of_id(set.ids[i]));
    CHECK(set.features[i * 2] == want[0]);
    CHECK(set.features[i * 2 + 1] == want[1]);
  }

  // Determinism: same seed, same draw.
  SplitMix64 rng_a(9), rng_b(9);
  const TrainingSet a = build_training_set(targets[0], db, state, rng_a);
  const TrainingSet b = build_training_set(targets[0], db, state, rng_b);
  CHECK(a.ids == b.ids);
}

TEST_CASE("imbalanced and impossible training sets", "[cds]") {
  const TestDatabase db = make_db();
  {
    // Only one non-exerciser of group 1 simulated: imbalanced.
    const CoverageState state = simulate_all(db, {1, 2, 7, 0});
    // Group 1 exercisers: {1, 2, 7}; negatives: {0}.
    TargetGroup group;
    group.group_id = 1;
    group.positive_ids = {1, 2, 7};
    SplitMix64 rng(2);
    const TrainingSet set = build_training_set(group, db, state, rng);
    CHECK(set.n_pos == 3);
    CHECK(set.n_neg == 1);
    CHECK(set.imbalanced);
  }
  {
    // Every simulated test exercises the group: no negatives, an error.
    const CoverageState state = simulate_all(db, {0, 1, 6});
    TargetGroup group;
    group.group_id = 0;
    group.positive_ids = {0, 1, 6};
    SplitMix64 rng(3);
    CHECK_THROWS_AS(build_training_set(group, db, state, rng), Error);
  }
  {
    TargetGroup empty;
    empty.group_id = 0;
    SplitMix64 rng(4);
    const CoverageState state = simulate_all(db, {0, 2});
    CHECK_THROWS_AS(build_training_set(empty, db, state, rng), Error);
  }
}

TEST_CASE("per-class cap subsamples both sides", "[cds]") {
  // Larger synthetic database so the cap actually bites.
  SyntheticSpec spec;
  spec.n_tests = 300;
  spec.n_numeric_fields = 4;
  spec.n_points = 12;
  spec.n_groups = 3;
  spec.predicates_per_point = 2;
  spec.rarity_exponent = 2.5;
  spec.mixture_components = 4;
  spec.seed = 5;
  const auto synth = generate_synthetic(spec);
  const TestDatabase& db = synth.db;

  CoverageState state(db.model.point_count);
  for (TestId t = 0; t < 200; ++t) apply_test(state, t, simulate(db, t));
  const auto targets = find_target_groups(state, db.partition, db, 1);

  // Pick a target with more positives than the cap and at least one
  // simulated non-exerciser, so both subsampling paths run.
  const TargetGroup* group = nullptr;
  for (const auto& t : targets)
    if (t.positive_ids.size() > 16 && t.positive_ids.size() < 200) group = &t;
  REQUIRE(group != nullptr);

  SplitMix64 rng(6);
  const TrainingSet capped = build_training_set(*group, db, state, rng, 16);
  CHECK(capped.n_pos <= 16);
  CHECK(capped.n_neg <= 16);
  CHECK(capped.n_neg <= capped.n_pos);
  CHECK(std::is_sorted(capped.ids.begin(), capped.ids.begin() + capped.n_pos));
  CHECK(std::is_sorted(capped.ids.begin() + capped.n_pos, capped.ids.end()));
}

TEST_CASE("group classifier learns a separable group", "[cds]") {
  const TestDatabase db = make_db();
  const CoverageState state = simulate_all(db, {0, 1, 2, 3, 4, 5, 6});
  const auto targets = find_target_groups(state, db.partition, db, 3);
  REQUIRE(targets.size() == 1);
  REQUIRE(targets[0].group_id == 0);

  SplitMix64 rng(7);
  TreeHyperparams hp;
  hp.min_leaf = 1;
  const GroupClassifier clf =
      train_group_classifier(targets[0], db, state, hp, 0.5, rng);
  CHECK(clf.group_id == 0);
  CHECK(clf.n_pos == 3);
  // Field 0 high = group-0 exerciser; the tree should recover that.
  const std::vector<double> high = {0.9, 0.5};
  const std::vector<double> low = {0.1, 0.5};
  CHECK(predict_prob(clf, high) == 1.0);
  CHECK(predict_prob(clf, low) == 0.0);
  CHECK(classify(clf, high) == 1);
  CHECK(classify(clf, low) == 0);

  CHECK_THROWS_AS(
      train_group_classifier(targets[0], db, state, hp, 0.0, rng), Error);
  CHECK_THROWS_AS(
      train_group_classifier(targets[0], db, state, hp, 1.0, rng), Error);

  const std::string rules = render_group_rules(clf);
  CHECK_THAT(rules, Catch::Matchers::ContainsSubstring(
                        "group 0 (pos=3, neg=3)\n"));
  CHECK_THAT(rules, Catch::Matchers::ContainsSubstring("class 1"));
}

TEST_CASE("selection ranks accepted candidates per group", "[cds]") {
  // Hand-built classifiers with known trees: group 3 accepts high field 0,
  // group 7 accepts high field 1.
  const auto make_clf = [](GroupId g, std::uint32_t feature) {
    GroupClassifier clf;
    clf.group_id = g;
    clf.epsilon = 0.5;
    clf.tree.dimension = 2;
    clf.tree.nodes.resize(3);
    clf.tree.nodes[0] = {1, 2, feature, 0.5, 8, 4};
    clf.tree.nodes[1] = {-1, -1, 0, 0.0, 4, 1};  // p = 0.25
    clf.tree.nodes[2] = {-1, -1, 0, 0.0, 4, 3};  // p = 0.75
    return clf;
  };
  const std::vector<GroupClassifier> classifiers = {make_clf(3, 0),
                                                    make_clf(7, 1)};

  //                         id 10        id 11       id 12       id 13
  const std::vector<double> cand = {0.9, 0.1, 0.1, 0.9, 0.9, 0.9, 0.1, 0.1};
  const std::vector<TestId> ids = {10, 11, 12, 13};
  const FeatureMatrix m{cand.data(), 4, 2};

  const CdsSelection sel = cds_select(ids, m, classifiers, 0.5);
  REQUIRE(sel.group_ids == std::vector<GroupId>{3, 7});
  // Group 3 accepts ids 10 and 12 (p = 0.75 each): tie broken by id.
  REQUIRE(sel.per_group[0].size() == 2);
  CHECK(sel.per_group[0][0].id == 10);
  CHECK(sel.per_group[0][1].id == 12);
  CHECK(sel.per_group[0][0].prob == 0.75);
  // Group 7 accepts ids 11 and 12.
  REQUIRE(sel.per_group[1].size() == 2);
  CHECK(sel.per_group[1][0].id == 11);
  CHECK(sel.per_group[1][1].id == 12);
  // Flat: group order with duplicates removed keeping the first.
  CHECK(sel.flat == std::vector<TestId>{10, 12, 11});

  // Higher epsilon rejects everything.
  const CdsSelection none = cds_select(ids, m, classifiers, 0.9);
  CHECK(none.per_group[0].empty());
  CHECK(none.per_group[1].empty());
  CHECK(none.flat.empty());

  // Classifiers must arrive sorted by group.
  const std::vector<GroupClassifier> unsorted = {make_clf(7, 1),
                                                 make_clf(3, 0)};
  CHECK_THROWS_AS(cds_select(ids, m, unsorted, 0.5), Error);

  const std::vector<TestId> short_ids = {10};
  CHECK_THROWS_AS(cds_select(short_ids, m, classifiers, 0.5), Error);
}
