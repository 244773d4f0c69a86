#pragma once

// Test selection strategies and the engine that runs them.
//
// Five strategies share one engine:
//
//   random  seeded uniform batches from the unsimulated pool
//   cds     per-group hole classifiers pick lookalike candidates
//   ndv     one-class SVM novelty ranking picks unfamiliar candidates
//   uha     phases: random until the first switch level, then one of
//           cds/ndv, then the other (order configurable, phases never
//           regress)
//   iha     random until the first switch level, then per-iteration
//           intersection of both models (order decides which one leads)
//
// Determinism contract: every random draw comes from a stream derived from
// (seed, purpose, n_simulated). Because the key is the number of simulated
// tests rather than an iteration counter, a hybrid phase issues exactly the
// batches the standalone method would issue from the same entering state,
// which makes phase traces replayable and testable.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "covsel/cds.hpp"
#include "covsel/core.hpp"
#include "covsel/error.hpp"
#include "covsel/log.hpp"
#include "covsel/ocsvm.hpp"
#include "covsel/prng.hpp"
#include "covsel/tree.hpp"

namespace covsel {

enum class StrategyKind { random, cds, ndv, uha, iha };
enum class HybridOrder { cds_first, ndv_first };
enum class Phase { random, warmup, ndv, cds, iha };

inline std::string_view to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::random: return "random";
    case StrategyKind::cds: return "cds";
    case StrategyKind::ndv: return "ndv";
    case StrategyKind::uha: return "uha";
    case StrategyKind::iha: return "iha";
  }
  return "?";
}

inline std::string_view to_string(HybridOrder o) {
  return o == HybridOrder::cds_first ? "cds_first" : "ndv_first";
}

inline std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::random: return "random";
    case Phase::warmup: return "warmup";
    case Phase::ndv: return "ndv";
    case Phase::cds: return "cds";
    case Phase::iha: return "iha";
  }
  return "?";
}

inline StrategyKind parse_strategy_kind(std::string_view text) {
  if (text == "random") return StrategyKind::random;
  if (text == "cds") return StrategyKind::cds;
  if (text == "ndv") return StrategyKind::ndv;
  if (text == "uha") return StrategyKind::uha;
  if (text == "iha") return StrategyKind::iha;
  fail("unknown strategy kind '", text,
       "' (expected random, cds, ndv, uha, or iha)");
}

inline HybridOrder parse_hybrid_order(std::string_view text) {
  if (text == "cds_first") return HybridOrder::cds_first;
  if (text == "ndv_first") return HybridOrder::ndv_first;
  fail("unknown hybrid order '", text,
       "' (expected cds_first or ndv_first)");
}

struct StrategyConfig {
  StrategyKind kind = StrategyKind::random;
  std::optional<HybridOrder> order;  // default: uha ndv_first, iha cds_first
  std::uint32_t batch_size = 100;
  std::vector<double> switch_levels = {0.90, 0.98};
  std::optional<std::uint32_t> dynamic_stagnation;  // advance phase after N
                                                    // flat iterations
  std::uint32_t min_hits = 10;
  double epsilon = 0.5;
  double nu = 0.5;
  KernelSpec kernel;
  SolverOptions solver;
  TreeHyperparams tree;
  std::uint64_t seed = 1;

  // Cost knobs. Defaults favor fidelity; long campaigns lower the caps and
  // stretch the cadence.
  std::uint32_t warmup = 0;          // 0 = one batch worth
  std::uint32_t retrain_every = 1;   // batches per model refresh in a phase
  bool train_once = false;           // train only at phase entry
  std::uint32_t ocsvm_max_train = 4096;
  std::uint32_t cds_max_per_class = 0;  // 0 = unlimited
  std::uint32_t overprovision = 10;     // novelty head factor for iha
  unsigned threads = 1;

  HybridOrder effective_order() const {
    if (order) return *order;
    return kind == StrategyKind::uha ? HybridOrder::ndv_first
                                     : HybridOrder::cds_first;
  }

  std::uint32_t effective_warmup() const {
    return warmup == 0 ? batch_size : warmup;
  }

  void validate() const {
    require(batch_size >= 1, "strategy: batch_size must be positive");
    require(epsilon > 0.0 && epsilon < 1.0,
            "strategy: epsilon must be in (0, 1), got ", epsilon);
    require(nu > 0.0 && nu <= 1.0, "strategy: nu must be in (0, 1], got ", nu);
    require(min_hits >= 1, "strategy: min_hits must be positive");
    require(retrain_every >= 1, "strategy: retrain_every must be positive");
    require(overprovision >= 1, "strategy: overprovision must be positive");
    tree.validate();
    if (kind == StrategyKind::uha)
      require(switch_levels.size() == 2,
              "strategy: uha needs exactly 2 switch levels, got ",
              switch_levels.size());
    if (kind == StrategyKind::iha)
      require(!switch_levels.empty(),
              "strategy: iha needs a switch level");
    if (kind == StrategyKind::uha || kind == StrategyKind::iha) {
      double prev = 0.0;
      for (const double level : switch_levels) {
        require(level > 0.0 && level < 1.0,
                "strategy: switch levels must be in (0, 1), got ", level);
        require(level > prev, "strategy: switch levels must be ascending");
        prev = level;
      }
    }
    if (order)
      require(kind == StrategyKind::uha || kind == StrategyKind::iha,
              "strategy: order applies only to hybrid strategies");
    if (dynamic_stagnation)
      require(*dynamic_stagnation >= 1,
              "strategy: dynamic_stagnation must be positive");
  }
};

// Seeded uniform sample used to bootstrap model-based strategies. Draws
// min(effective warmup, pool size) distinct unsimulated tests.
inline std::vector<TestId> warmup_sample(const StrategyConfig& cfg,
                                         const TestDatabase& db,
                                         const CoverageState& state) {
  std::vector<TestId> pool;
  pool.reserve(db.size());
  for (std::uint32_t r = 0; r < db.size(); ++r)
    if (!state.is_simulated(db.ids[r])) pool.push_back(db.ids[r]);
  const std::uint64_t want =
      std::min<std::uint64_t>(cfg.effective_warmup(), pool.size());
  SplitMix64 rng = derive_stream(cfg.seed, StreamPurpose::warmup);
  const auto picks = sample_indices(pool.size(), want, rng);
  std::vector<TestId> out;
  out.reserve(want);
  for (const auto k : picks) out.push_back(pool[k]);
  return out;
}

struct StrategyState {
  Phase phase = Phase::random;
  std::size_t phase_index = 0;     // position in the phase chain
  std::uint64_t iteration = 0;     // batches issued so far
  std::uint64_t iter_in_phase = 0;
  std::uint32_t stagnation = 0;    // consecutive iterations without new
                                   // covered points
};

struct RunDiagnostics {
  std::vector<std::pair<std::uint64_t, Phase>> phase_switches;
  std::uint64_t retrain_count = 0;
  std::uint64_t topup_random = 0;
  std::uint64_t topup_novel = 0;
  std::uint64_t no_target_group_batches = 0;
  std::size_t last_support_count = 0;
  std::uint32_t max_tree_depth = 0;
  bool ocsvm_cap_applied = false;
};

// Models currently held by the engine, refreshed on the retrain cadence.
// ranking and selection are computed against the candidate pool at training
// time; consumers skip entries simulated since.
struct ModelSet {
  std::optional<NoveltyModel> novelty;
  std::vector<GroupClassifier> classifiers;
  std::vector<ScoredCandidate> ranking;  // ascending score
  std::vector<double> score_by_row;      // NaN for unscored rows
  std::optional<CdsSelection> selection;
  std::uint64_t trained_at = 0;          // n_simulated at training time
};

class SelectionEngine {
 public:
  SelectionEngine(const TestDatabase& db, StrategyConfig cfg)
      : db_(db), cfg_(std::move(cfg)) {
    cfg_.validate();
    build_phase_chain();
  }

  const StrategyConfig& config() const { return cfg_; }
  const StrategyState& state() const { return strat_; }
  const ModelSet& models() const { return models_; }
  const RunDiagnostics& diagnostics() const { return diag_; }

  // Selects the next batch: up to batch_size distinct unsimulated test ids.
  // The caller simulates them and applies the results to `coverage` before
  // the next call.
  std::vector<TestId> next_batch(const CoverageState& coverage) {
    collect_candidates(coverage);
    require(!candidate_rows_.empty(),
            "selection: the unsimulated pool is empty");

    update_stagnation(coverage);
    advance_phases(coverage);

    std::vector<TestId> batch;
    switch (strat_.phase) {
      case Phase::random:
        batch = random_batch(coverage);
        break;
      case Phase::warmup:
        batch = warmup_batch(coverage);
        break;
      case Phase::ndv:
        ensure_novelty(coverage);
        batch = novelty_batch(coverage);
        break;
      case Phase::cds:
        ensure_classifiers(coverage);
        batch = cds_batch(coverage);
        break;
      case Phase::iha:
        ensure_novelty(coverage);
        ensure_classifiers(coverage);
        batch = iha_batch(coverage);
        break;
    }

    require(!batch.empty(), "selection: produced an empty batch");
    require(batch.size() <= cfg_.batch_size,
            "selection: batch exceeds batch_size");
    std::unordered_set<TestId> seen;
    for (const TestId id : batch) {
      require(seen.insert(id).second, "selection: duplicate id ", id,
              " in batch");
      require(!coverage.is_simulated(id), "selection: id ", id,
              " was already simulated");
    }
    ++strat_.iteration;
    ++strat_.iter_in_phase;
    return batch;
  }

 private:
  void build_phase_chain() {
    switch (cfg_.kind) {
      case StrategyKind::random:
        phases_ = {Phase::random};
        break;
      case StrategyKind::ndv:
        phases_ = {Phase::warmup, Phase::ndv};
        break;
      case StrategyKind::cds:
        phases_ = {Phase::warmup, Phase::cds};
        break;
      case StrategyKind::uha:
        if (cfg_.effective_order() == HybridOrder::ndv_first)
          phases_ = {Phase::random, Phase::ndv, Phase::cds};
        else
          phases_ = {Phase::random, Phase::cds, Phase::ndv};
        break;
      case StrategyKind::iha:
        phases_ = {Phase::random, Phase::iha};
        break;
    }
    strat_.phase = phases_[0];
    strat_.phase_index = 0;
  }

  void collect_candidates(const CoverageState& coverage) {
    candidate_rows_.clear();
    for (std::uint32_t r = 0; r < db_.size(); ++r)
      if (!coverage.is_simulated(db_.ids[r])) candidate_rows_.push_back(r);
  }

  void update_stagnation(const CoverageState& coverage) {
    if (strat_.iteration > 0) {
      if (coverage.covered_points() == last_covered_)
        ++strat_.stagnation;
      else
        strat_.stagnation = 0;
    }
    last_covered_ = coverage.covered_points();
  }

  bool phase_done(const CoverageState& coverage) const {
    if (strat_.phase_index + 1 >= phases_.size()) return false;
    const Phase current = phases_[strat_.phase_index];
    if (current == Phase::warmup)
      return coverage.simulated().size() >= cfg_.effective_warmup();
    // Level-gated phases: random/ndv/cds inside uha, random before iha.
    const double level = cfg_.switch_levels[strat_.phase_index];
    if (coverage.coverage_fraction() >= level) return true;
    return cfg_.dynamic_stagnation &&
           strat_.stagnation >= *cfg_.dynamic_stagnation;
  }

  void advance_phases(const CoverageState& coverage) {
    while (phase_done(coverage)) {
      ++strat_.phase_index;
      strat_.phase = phases_[strat_.phase_index];
      strat_.iter_in_phase = 0;
      strat_.stagnation = 0;
      diag_.phase_switches.emplace_back(strat_.iteration, strat_.phase);
      log_info("strategy ", to_string(cfg_.kind), ": entering phase ",
               to_string(strat_.phase), " at ", coverage.simulated().size(),
               " simulated tests, coverage ",
               format_fixed(coverage.coverage_fraction(), 4));
    }
  }

  std::vector<TestId> random_batch(const CoverageState& coverage) {
    SplitMix64 rng = derive_stream(cfg_.seed, StreamPurpose::random_batch,
                                   coverage.simulated().size());
    const std::uint64_t want =
        std::min<std::uint64_t>(cfg_.batch_size, candidate_rows_.size());
    const auto picks = sample_indices(candidate_rows_.size(), want, rng);
    std::vector<TestId> batch;
    batch.reserve(want);
    for (const auto k : picks) batch.push_back(db_.ids[candidate_rows_[k]]);
    return batch;
  }

  std::vector<TestId> warmup_batch(const CoverageState& coverage) {
    if (!warmup_list_) warmup_list_ = warmup_sample(cfg_, db_, coverage);
    std::vector<TestId> batch;
    while (warmup_pos_ < warmup_list_->size() &&
           batch.size() < cfg_.batch_size) {
      const TestId id = (*warmup_list_)[warmup_pos_++];
      if (!coverage.is_simulated(id)) batch.push_back(id);
    }
    // The pool can be smaller than the warmup budget; fall through to a
    // random batch rather than emit nothing.
    if (batch.empty()) return random_batch(coverage);
    return batch;
  }

  bool retrain_due() const {
    if (models_.trained_at == 0 && !models_.novelty &&
        models_.classifiers.empty())
      return true;
    if (cfg_.train_once) return strat_.iter_in_phase == 0;
    return strat_.iter_in_phase % cfg_.retrain_every == 0;
  }

  // Gathers the feature rows for the ids picked for model training.
  std::vector<double> gather_rows(const std::vector<std::uint32_t>& rows) {
    std::vector<double> out(rows.size() *
                            static_cast<std::size_t>(db_.dimension));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto row = db_.row(rows[i]);
      std::copy(row.begin(), row.end(),
                out.begin() + i * static_cast<std::size_t>(db_.dimension));
    }
    return out;
  }

  void ensure_novelty(const CoverageState& coverage) {
    if (models_.novelty && !retrain_due()) return;
    if (models_.novelty && models_.trained_at == coverage.simulated().size())
      return;  // already refreshed this iteration (iha trains both models)

    const auto& simulated = coverage.simulated();
    std::vector<std::uint32_t> train_rows;
    train_rows.reserve(simulated.size());
    for (const TestId id : simulated) train_rows.push_back(db_.row_of_id(id));
    if (cfg_.ocsvm_max_train > 0 && train_rows.size() > cfg_.ocsvm_max_train) {
      SplitMix64 rng = derive_stream(cfg_.seed, StreamPurpose::ocsvm_subsample,
                                     simulated.size());
      const auto picks =
          sample_indices(train_rows.size(), cfg_.ocsvm_max_train, rng);
      std::vector<std::uint32_t> kept;
      kept.reserve(picks.size());
      for (const auto k : picks) kept.push_back(train_rows[k]);
      std::sort(kept.begin(), kept.end());
      train_rows = std::move(kept);
      diag_.ocsvm_cap_applied = true;
    }

    const std::vector<double> train = gather_rows(train_rows);
    std::vector<TestId> train_ids;
    train_ids.reserve(train_rows.size());
    for (const auto r : train_rows) train_ids.push_back(db_.ids[r]);
    models_.novelty = train_ocsvm(
        FeatureMatrix{train.data(), train_rows.size(), db_.dimension},
        train_ids, cfg_.nu, cfg_.kernel, cfg_.solver);
    diag_.last_support_count = models_.novelty->support_count();
    ++diag_.retrain_count;
    models_.trained_at = simulated.size();

    // Score every candidate once per refresh; batches between refreshes
    // consume the ranking.
    const std::vector<double> cand = gather_rows(candidate_rows_);
    std::vector<TestId> cand_ids;
    cand_ids.reserve(candidate_rows_.size());
    for (const auto r : candidate_rows_) cand_ids.push_back(db_.ids[r]);
    models_.ranking = rank_by_novelty(
        *models_.novelty, cand_ids,
        FeatureMatrix{cand.data(), candidate_rows_.size(), db_.dimension},
        cfg_.threads);
    models_.score_by_row.assign(db_.size(),
                                std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < models_.ranking.size(); ++i) {
      const auto& sc = models_.ranking[i];
      models_.score_by_row[db_.row_of_id(sc.id)] = sc.score;
    }
  }

  void ensure_classifiers(const CoverageState& coverage) {
    const bool fresh_at_this_n =
        classifiers_trained_at_ == coverage.simulated().size() &&
        classifiers_valid_;
    if (classifiers_valid_ && !retrain_due()) return;
    if (fresh_at_this_n) return;

    const auto targets =
        find_target_groups(coverage, db_.partition, db_, cfg_.min_hits);
    models_.classifiers.clear();
    for (const TargetGroup& t : targets) {
      SplitMix64 rng = derive_stream(
          cfg_.seed, StreamPurpose::cds_negatives,
          hash_combine(coverage.simulated().size(), t.group_id));
      GroupClassifier clf =
          train_group_classifier(t, db_, coverage, cfg_.tree, cfg_.epsilon,
                                 rng, cfg_.cds_max_per_class);
      diag_.max_tree_depth = std::max(diag_.max_tree_depth, clf.tree.depth);
      models_.classifiers.push_back(std::move(clf));
    }
    classifiers_valid_ = true;
    classifiers_trained_at_ = coverage.simulated().size();
    ++diag_.retrain_count;

    models_.selection.reset();
    if (!models_.classifiers.empty()) {
      const std::vector<double> cand = gather_rows(candidate_rows_);
      std::vector<TestId> cand_ids;
      cand_ids.reserve(candidate_rows_.size());
      for (const auto r : candidate_rows_) cand_ids.push_back(db_.ids[r]);
      models_.selection = cds_select(
          cand_ids,
          FeatureMatrix{cand.data(), candidate_rows_.size(), db_.dimension},
          models_.classifiers, cfg_.epsilon);
    }
  }

  std::vector<TestId> novelty_batch(const CoverageState& coverage) {
    std::vector<TestId> batch;
    for (const ScoredCandidate& sc : models_.ranking) {
      if (coverage.is_simulated(sc.id)) continue;
      batch.push_back(sc.id);
      if (batch.size() == cfg_.batch_size) break;
    }
    return batch;
  }

  // Round-robin over the per-group ranked selections: every target group
  // contributes its best remaining candidate before any group gets a second
  // one. Shortfalls are topped up with seeded random picks.
  std::vector<TestId> cds_batch(const CoverageState& coverage) {
    std::vector<TestId> batch;
    std::unordered_set<TestId> picked;
    if (models_.classifiers.empty() || !models_.selection) {
      ++diag_.no_target_group_batches;
      log_info("cds: no target groups (all covered groups lack holes or "
               "support); issuing a random batch");
      return random_batch(coverage);
    }

    const CdsSelection& sel = *models_.selection;
    std::size_t longest = 0;
    for (const auto& entries : sel.per_group)
      longest = std::max(longest, entries.size());
    for (std::size_t rank = 0; rank < longest && batch.size() < cfg_.batch_size;
         ++rank) {
      for (const auto& entries : sel.per_group) {
        if (rank >= entries.size()) continue;
        const TestId id = entries[rank].id;
        if (coverage.is_simulated(id) || !picked.insert(id).second) continue;
        batch.push_back(id);
        if (batch.size() == cfg_.batch_size) break;
      }
    }

    if (batch.size() < cfg_.batch_size) top_up_random(coverage, picked, batch);
    return batch;
  }

  void top_up_random(const CoverageState& coverage,
                     std::unordered_set<TestId>& picked,
                     std::vector<TestId>& batch) {
    std::vector<TestId> rest;
    rest.reserve(candidate_rows_.size());
    for (const auto r : candidate_rows_) {
      const TestId id = db_.ids[r];
      if (!picked.contains(id)) rest.push_back(id);
    }
    if (rest.empty()) return;
    SplitMix64 rng = derive_stream(cfg_.seed, StreamPurpose::cds_topup,
                                   coverage.simulated().size());
    const std::uint64_t want = std::min<std::uint64_t>(
        cfg_.batch_size - batch.size(), rest.size());
    const auto picks = sample_indices(rest.size(), want, rng);
    for (const auto k : picks) {
      batch.push_back(rest[k]);
      picked.insert(rest[k]);
    }
    diag_.topup_random += want;
    log_debug("selection: topped up ", want, " random candidates");
  }

  void top_up_novel(std::unordered_set<TestId>& picked,
                    const CoverageState& coverage, std::vector<TestId>& batch) {
    for (const ScoredCandidate& sc : models_.ranking) {
      if (batch.size() >= cfg_.batch_size) break;
      if (coverage.is_simulated(sc.id) || !picked.insert(sc.id).second)
        continue;
      batch.push_back(sc.id);
      ++diag_.topup_novel;
    }
  }

  std::vector<TestId> iha_batch(const CoverageState& coverage) {
    if (models_.classifiers.empty() || !models_.selection) {
      // Nothing to intersect with: fall back to pure novelty.
      ++diag_.no_target_group_batches;
      log_info("iha: no target groups; issuing a pure novelty batch");
      return novelty_batch(coverage);
    }
    return cfg_.effective_order() == HybridOrder::cds_first
               ? iha_cds_first(coverage)
               : iha_ndv_first(coverage);
  }

  // CDS leads: per target group take the accepted candidate with the lowest
  // (most novel) score; dedup in group order; top up with globally most
  // novel candidates.
  std::vector<TestId> iha_cds_first(const CoverageState& coverage) {
    const CdsSelection& sel = *models_.selection;
    std::vector<TestId> batch;
    std::unordered_set<TestId> picked;
    for (const auto& entries : sel.per_group) {
      if (batch.size() >= cfg_.batch_size) break;
      TestId best_id = 0;
      double best_score = std::numeric_limits<double>::infinity();
      bool found = false;
      for (const auto& e : entries) {
        if (coverage.is_simulated(e.id) || picked.contains(e.id)) continue;
        const double score = models_.score_by_row[db_.row_of_id(e.id)];
        if (std::isnan(score)) continue;
        if (!found || score < best_score ||
            (score == best_score && e.id < best_id)) {
          found = true;
          best_score = score;
          best_id = e.id;
        }
      }
      if (found) {
        picked.insert(best_id);
        batch.push_back(best_id);
      }
    }
    if (batch.size() < cfg_.batch_size) top_up_novel(picked, coverage, batch);
    return batch;
  }

  // Novelty leads: take an overprovisioned head of the novelty ranking, keep
  // candidates at least one classifier accepts, order by (acceptance
  // probability desc, score asc, id asc).
  std::vector<TestId> iha_ndv_first(const CoverageState& coverage) {
    struct Scored {
      TestId id;
      double prob;
      double score;
    };
    std::vector<Scored> kept;
    std::size_t examined = 0;
    const std::size_t head_limit =
        static_cast<std::size_t>(cfg_.batch_size) * cfg_.overprovision;
    std::vector<TestId> head_ids;
    for (const ScoredCandidate& sc : models_.ranking) {
      if (examined >= head_limit) break;
      if (coverage.is_simulated(sc.id)) continue;
      ++examined;
      const auto row = db_.row(db_.row_of_id(sc.id));
      double best_prob = 0.0;
      bool accepted = false;
      for (const GroupClassifier& clf : models_.classifiers) {
        const double prob = clf.tree.predict(row);
        if (prob > cfg_.epsilon && prob > best_prob) {
          best_prob = prob;
          accepted = true;
        }
      }
      if (accepted) kept.push_back(Scored{sc.id, best_prob, sc.score});
    }
    std::sort(kept.begin(), kept.end(), [](const Scored& a, const Scored& b) {
      if (a.prob != b.prob) return a.prob > b.prob;
      if (a.score != b.score) return a.score < b.score;
      return a.id < b.id;
    });

    std::vector<TestId> batch;
    std::unordered_set<TestId> picked;
    for (const Scored& s : kept) {
      if (batch.size() >= cfg_.batch_size) break;
      picked.insert(s.id);
      batch.push_back(s.id);
    }
    if (batch.size() < cfg_.batch_size) top_up_novel(picked, coverage, batch);
    return batch;
  }

  const TestDatabase& db_;
  StrategyConfig cfg_;
  std::vector<Phase> phases_;
  StrategyState strat_;
  RunDiagnostics diag_;
  ModelSet models_;
  bool classifiers_valid_ = false;
  std::uint64_t classifiers_trained_at_ = 0;
  std::uint32_t last_covered_ = 0;
  std::vector<std::uint32_t> candidate_rows_;
  std::optional<std::vector<TestId>> warmup_list_;
  std::size_t warmup_pos_ = 0;
};

}  // namespace covsel
