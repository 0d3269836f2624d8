#pragma once

// Cross-validation harness. Base learners are never trained here: callers
// supply held-out (out-of-fold or validation) scores, and the harness turns
// them into per-learner cross-validated risks, Super Learner fits, and a
// side-by-side comparison of every ensemble rule on a test set.

#include <ensemblex/combiners.hpp>
#include <ensemblex/core.hpp>
#include <ensemblex/metrics.hpp>
#include <ensemblex/predict.hpp>
#include <ensemblex/superlearner.hpp>

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace ensemblex {

namespace detail {

// Unbiased-enough bounded draw; the 128-bit multiply keeps the result
// independent of the standard library's distribution implementation.
inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t bound) {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(rng()) * bound) >> 64);
}

inline void shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(bounded(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

// Unit order grouped by class (ascending), shuffled within each class.
// Without labels: one shuffled group.
inline std::vector<std::size_t> stratified_order(std::size_t n, const LabelVector* labels,
                                                 std::mt19937_64& rng) {
  std::vector<std::size_t> order;
  order.reserve(n);
  if (!labels) {
    order.resize(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    shuffle(order, rng);
    return order;
  }
  for (std::size_t c = 0; c < labels->n_classes(); ++c) {
    std::vector<std::size_t> group;
    for (std::size_t i = 0; i < n; ++i) {
      if ((*labels)[i] == c) group.push_back(i);
    }
    shuffle(group, rng);
    order.insert(order.end(), group.begin(), group.end());
  }
  return order;
}

}  // namespace detail

struct SplitSpec {
  enum class Mode { SingleSplit, VFold };

  Mode mode = Mode::SingleSplit;
  /// VFold: fold index per unit. SingleSplit: 0 = fit part, 1 = validation.
  std::vector<std::size_t> assignments;
  std::size_t n_folds = 2;
  std::uint64_t seed = 0;

  std::vector<std::size_t> members(std::size_t part) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
      if (assignments[i] == part) out.push_back(i);
    }
    return out;
  }

  std::vector<std::size_t> validation_units() const {
    ENSEMBLEX_REQUIRE(mode == Mode::SingleSplit, ErrorKind::InvalidInput, "not a single split");
    return members(1);
  }
};

/// Balanced V-fold assignment. With labels the folds are stratified: units
/// are dealt round-robin over a class-grouped shuffled order.
inline SplitSpec make_vfold_split(std::size_t n, std::size_t n_folds, std::uint64_t seed,
                                  const LabelVector* labels = nullptr) {
  ENSEMBLEX_REQUIRE(n_folds >= 2, ErrorKind::InvalidInput, "V-fold split needs V >= 2");
  ENSEMBLEX_REQUIRE(n >= n_folds, ErrorKind::InvalidInput,
                    "cannot split " + std::to_string(n) + " units into " + std::to_string(n_folds) + " folds");
  ENSEMBLEX_REQUIRE(!labels || labels->size() == n, ErrorKind::DimensionMismatch,
                    "label count differs from unit count");
  std::mt19937_64 rng(seed);
  auto order = detail::stratified_order(n, labels, rng);
  SplitSpec spec;
  spec.mode = SplitSpec::Mode::VFold;
  spec.n_folds = n_folds;
  spec.seed = seed;
  spec.assignments.assign(n, 0);
  for (std::size_t p = 0; p < n; ++p) spec.assignments[order[p]] = p % n_folds;
  return spec;
}

/// Fit/validation partition with round(n * validation_fraction) validation
/// units (at least one in each part), allocated proportionally per class
/// when labels are given.
inline SplitSpec make_single_split(std::size_t n, double validation_fraction, std::uint64_t seed,
                                   const LabelVector* labels = nullptr) {
  ENSEMBLEX_REQUIRE(n >= 2, ErrorKind::InvalidInput, "single split needs at least two units");
  ENSEMBLEX_REQUIRE(validation_fraction > 0.0 && validation_fraction < 1.0, ErrorKind::InvalidInput,
                    "validation fraction must lie in (0, 1)");
  ENSEMBLEX_REQUIRE(!labels || labels->size() == n, ErrorKind::DimensionMismatch,
                    "label count differs from unit count");
  auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * validation_fraction));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  std::mt19937_64 rng(seed);
  auto order = detail::stratified_order(n, labels, rng);
  SplitSpec spec;
  spec.mode = SplitSpec::Mode::SingleSplit;
  spec.n_folds = 2;
  spec.seed = seed;
  spec.assignments.assign(n, 0);
  // Systematic sampling along the class-grouped order.
  for (std::size_t p = 0; p < n; ++p) {
    if ((p + 1) * n_val / n > p * n_val / n) spec.assignments[order[p]] = 1;
  }
  return spec;
}

struct Fold {
  ScoreTensor scores;
  LabelVector labels;
  std::vector<std::size_t> units;  // original unit indices, may be empty
};

/// Held-out scores grouped by fold. Learner j's scores in fold v come from a
/// model trained without fold v.
class FoldedScores {
 public:
  explicit FoldedScores(std::vector<Fold> folds) : folds_(std::move(folds)) {
    ENSEMBLEX_REQUIRE(!folds_.empty(), ErrorKind::InvalidInput, "no folds");
    const auto m = folds_[0].scores.n_learners(), k = folds_[0].scores.n_classes();
    std::vector<std::size_t> seen;
    for (const auto& f : folds_) {
      require_matching(f.scores, f.labels);
      ENSEMBLEX_REQUIRE(f.scores.n_learners() == m, ErrorKind::DimensionMismatch,
                        "learner count differs between folds");
      ENSEMBLEX_REQUIRE(f.scores.n_classes() == k, ErrorKind::DimensionMismatch,
                        "class count differs between folds");
      ENSEMBLEX_REQUIRE(f.units.empty() || f.units.size() == f.labels.size(), ErrorKind::DimensionMismatch,
                        "fold unit index list has the wrong length");
      seen.insert(seen.end(), f.units.begin(), f.units.end());
    }
    std::sort(seen.begin(), seen.end());
    ENSEMBLEX_REQUIRE(std::adjacent_find(seen.begin(), seen.end()) == seen.end(), ErrorKind::InvalidInput,
                      "a unit appears in more than one fold");
  }

  /// Whole held-out set as a single fold (single-split Super Learner).
  static FoldedScores single(ScoreTensor scores, LabelVector labels) {
    std::vector<Fold> f;
    f.push_back({std::move(scores), std::move(labels), {}});
    return FoldedScores(std::move(f));
  }

  const std::vector<Fold>& folds() const noexcept { return folds_; }
  std::size_t n_folds() const noexcept { return folds_.size(); }
  std::size_t n_learners() const { return folds_[0].scores.n_learners(); }
  std::size_t n_classes() const { return folds_[0].scores.n_classes(); }

  std::size_t n_units() const {
    std::size_t n = 0;
    for (const auto& f : folds_) n += f.labels.size();
    return n;
  }

  /// All held-out units in fold order.
  std::pair<ScoreTensor, LabelVector> concatenated() const {
    if (folds_.size() == 1) return {folds_[0].scores, folds_[0].labels};
    std::vector<double> values;
    std::vector<std::size_t> labels;
    for (const auto& f : folds_) {
      values.insert(values.end(), f.scores.values().begin(), f.scores.values().end());
      labels.insert(labels.end(), f.labels.labels().begin(), f.labels.labels().end());
    }
    const auto n = labels.size();
    return {ScoreTensor(n, n_learners(), n_classes(), std::move(values)),
            LabelVector(std::move(labels), n_classes())};
  }

 private:
  std::vector<Fold> folds_;
};

/// Groups out-of-fold scores by a split. A single split keeps only the
/// validation part.
inline FoldedScores fold_scores(const ScoreTensor& scores, const LabelVector& labels, const SplitSpec& split) {
  require_matching(scores, labels);
  ENSEMBLEX_REQUIRE(split.assignments.size() == scores.n_units(), ErrorKind::DimensionMismatch,
                    "split covers a different number of units");
  std::vector<Fold> folds;
  if (split.mode == SplitSpec::Mode::SingleSplit) {
    auto units = split.validation_units();
    folds.push_back({unit_subset(scores, units), label_subset(labels, units), units});
  } else {
    for (std::size_t v = 0; v < split.n_folds; ++v) {
      auto units = split.members(v);
      ENSEMBLEX_REQUIRE(!units.empty(), ErrorKind::InvalidInput, "empty fold " + std::to_string(v));
      folds.push_back({unit_subset(scores, units), label_subset(labels, units), units});
    }
  }
  return FoldedScores(std::move(folds));
}

/// Mean held-out loss of learner j over all folds.
inline double cv_learner_risk(const FoldedScores& folds, std::size_t j, Loss loss) {
  ENSEMBLEX_REQUIRE(j < folds.n_learners(), ErrorKind::InvalidInput, "learner index out of range");
  double total = 0.0;
  for (const auto& f : folds.folds()) {
    for (std::size_t i = 0; i < f.labels.size(); ++i) {
      auto row = f.scores.row(i, j);
      total += loss == Loss::Nll ? nll_from_scores(row, f.labels[i])
                                 : (argmax_class(row) == f.labels[i] ? 0.0 : 1.0);
    }
  }
  return total / static_cast<double>(folds.n_units());
}

/// Super Learner on the pooled held-out predictions. With one fold this is
/// the single-split Super Learner.
inline FittedEnsemble cv_sl_fit(const FoldedScores& folds, const SolverConfig& cfg = {},
                                Constraint constraint = Constraint::simplex(),
                                StackingScale scale = StackingScale::Score) {
  auto [scores, labels] = folds.concatenated();
  return sl_fit(SlObjective(std::move(scores), std::move(labels), constraint, scale), cfg);
}

struct CompareOptions {
  SolverConfig solver;
  Constraint constraint = Constraint::simplex();
  StackingScale scale = StackingScale::Score;
};

struct MethodResult {
  std::string key;
  std::string label;
  FittedEnsemble model;
  EvalReport report;
};

struct Comparison {
  std::vector<MethodResult> rows;
  std::vector<double> learner_val_nll;  // cv_learner_risk(j, Nll)
  double sl_val_risk = 0.0;             // stacked objective at the fitted weights

  const MethodResult& row(std::string_view key) const {
    for (const auto& r : rows) {
      if (r.key == key) return r;
    }
    throw Error(ErrorKind::InvalidInput, "no comparison row named " + std::string(key));
  }
};

inline EvalReport evaluate_model(const FittedEnsemble& model, const ScoreTensor& s, const LabelVector& y) {
  if (model.method == Method::MajorityVote) return evaluate_hard(majority_vote(s), y);
  return evaluate(predict_proba(model, s), y);
}

/// Fits every ensemble rule on the held-out data and evaluates all of them,
/// plus the best single learner on the test set, on the test data.
inline Comparison compare_all(const FoldedScores& fit_data, const ScoreTensor& test_scores,
                              const LabelVector& test_labels, const CompareOptions& opts = {}) {
  require_matching(test_scores, test_labels);
  ENSEMBLEX_REQUIRE(test_scores.n_learners() == fit_data.n_learners(), ErrorKind::DimensionMismatch,
                    "fit and test data disagree on the learner count");
  ENSEMBLEX_REQUIRE(test_scores.n_classes() == fit_data.n_classes(), ErrorKind::DimensionMismatch,
                    "fit and test data disagree on the class count");
  const auto m = fit_data.n_learners(), k = fit_data.n_classes();
  auto [val_scores, val_labels] = fit_data.concatenated();

  Comparison out;
  for (std::size_t j = 0; j < m; ++j) out.learner_val_nll.push_back(cv_learner_risk(fit_data, j, Loss::Nll));

  auto add = [&](std::string key, std::string label, FittedEnsemble model) {
    auto report = evaluate_model(model, test_scores, test_labels);
    out.rows.push_back({std::move(key), std::move(label), std::move(model), std::move(report)});
  };

  // Empirical oracle: best single learner by test accuracy.
  {
    auto test_err = learner_risks(test_scores, test_labels, Loss::Error);
    FittedEnsemble oracle;
    oracle.method = Method::DiscreteSl;
    oracle.loss = Loss::Error;
    oracle.selected_learner = argmin_index(test_err);
    oracle.n_learners = m;
    oracle.n_classes = k;
    add("oracle", "Empirical oracle (best learner on test)", oracle);
  }

  SlObjective obj(val_scores, val_labels, opts.constraint, opts.scale);
  auto sl = sl_fit(obj, opts.solver);
  out.sl_val_risk = obj.risk(sl.weights->weights());
  add("superlearner", "Super Learner", std::move(sl));
  add("discrete-sl-nll", "Discrete Super Learner (nll)", fit_discrete_sl(val_scores, val_labels, Loss::Nll));
  add("discrete-sl-error", "Discrete Super Learner (error)",
      fit_discrete_sl(val_scores, val_labels, Loss::Error));
  add("boc-before-softmax", "BOC (before softmax)",
      fit_boc(val_scores, val_labels, CombineScale::BeforeSoftmax));
  add("boc-after-softmax", "BOC (after softmax)", fit_boc(val_scores, val_labels, CombineScale::AfterSoftmax));
  add("avg-before-softmax", "Unweighted average (before softmax)",
      fit_average(m, k, CombineScale::BeforeSoftmax));
  add("avg-after-softmax", "Unweighted average (after softmax)", fit_average(m, k, CombineScale::AfterSoftmax));
  add("majority-vote", "Majority vote", fit_majority_vote(m, k));
  return out;
}

}  // namespace ensemblex
