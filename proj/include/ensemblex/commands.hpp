#pragma once

// Implementations behind the `ensemblex` command-line tool. Each command
// takes a plain options struct, reads and writes files, and throws
// ensemblex::Error on failure; argument parsing lives in tools/.

#include <ensemblex/combiners.hpp>
#include <ensemblex/core.hpp>
#include <ensemblex/cvharness.hpp>
#include <ensemblex/io.hpp>
#include <ensemblex/metrics.hpp>
#include <ensemblex/predict.hpp>
#include <ensemblex/superlearner.hpp>
#include <ensemblex/synthgen.hpp>

#include <filesystem>
#include <optional>
#include <ostream>
#include <set>
#include <string>

namespace ensemblex::cmd {

namespace fs = std::filesystem;

struct FitFlags {
  std::string method = "superlearner";  // superlearner | discrete-sl | boc | average | majority-vote
  std::string loss = "nll";
  std::optional<std::string> scale;     // before-softmax | after-softmax | logit
  std::string constraint = "simplex";   // simplex | l1
  double l1_bound = kDefaultL1Bound;
  std::size_t folds = 1;
  std::uint64_t seed = 0;
  std::size_t max_iters = SolverConfig{}.max_iters;
  double rel_tol = SolverConfig{}.rel_tol;
};

struct FitOptions {
  fs::path manifest;
  fs::path out;
  FitFlags flags;
};

struct PredictOptions {
  fs::path model;
  fs::path manifest;
  fs::path out;
};

struct EvaluateOptions {
  fs::path manifest;                   // must carry labels
  std::optional<fs::path> model;       // either a model ...
  std::optional<fs::path> predictions; // ... or a probability CSV from `predict`
  fs::path out;
};

struct CompareOptions {
  fs::path manifest;       // validation / out-of-fold scores with labels
  fs::path test_manifest;  // test scores with labels
  fs::path out;            // JSON table
  FitFlags flags;          // constraint, scale, folds, seed, solver
};

struct SynthOptions {
  fs::path spec;
  fs::path out;  // directory
  std::optional<std::uint64_t> seed;
};

inline Constraint constraint_from_flags(const FitFlags& f) {
  if (f.constraint == "simplex") return Constraint::simplex();
  if (f.constraint == "l1") return Constraint::l1(f.l1_bound);
  throw Error(ErrorKind::InvalidInput, "unknown constraint '" + f.constraint + "'");
}

inline SolverConfig solver_from_flags(const FitFlags& f) {
  SolverConfig cfg;
  cfg.max_iters = f.max_iters;
  cfg.rel_tol = f.rel_tol;
  return cfg;
}

inline StackingScale stacking_scale_from_flags(const FitFlags& f) {
  const auto s = f.scale.value_or("before-softmax");
  if (s == "before-softmax") return StackingScale::Score;
  if (s == "logit") return StackingScale::Logit;
  throw Error(ErrorKind::UnsupportedScale, "Super Learner cannot stack on scale '" + s + "'");
}

inline CombineScale combine_scale_from_flags(const FitFlags& f) {
  const auto s = f.scale.value_or("after-softmax");
  if (s == "before-softmax") return CombineScale::BeforeSoftmax;
  if (s == "after-softmax") return CombineScale::AfterSoftmax;
  throw Error(ErrorKind::UnsupportedScale, "scale '" + s + "' is not valid for averaging or BOC");
}

inline const LabelVector& require_labels(const io::LoadedScores& data, const fs::path& manifest) {
  if (!data.labels) throw Error(ErrorKind::InvalidInput, manifest.string() + " has no labels_path");
  return *data.labels;
}

/// Held-out data grouped by --folds (1 = the whole set is one validation fold).
inline FoldedScores folded_from_flags(const ScoreTensor& s, const LabelVector& y, const FitFlags& f) {
  if (f.folds <= 1) return FoldedScores::single(s, y);
  return fold_scores(s, y, make_vfold_split(s.n_units(), f.folds, f.seed, &y));
}

inline FittedEnsemble fit_from_flags(const FoldedScores& folds, const FitFlags& f) {
  const auto m = folds.n_learners(), k = folds.n_classes();
  if (f.method == "superlearner") {
    return cv_sl_fit(folds, solver_from_flags(f), constraint_from_flags(f), stacking_scale_from_flags(f));
  }
  auto [scores, labels] = folds.concatenated();
  if (f.method == "discrete-sl") return fit_discrete_sl(scores, labels, io::parse_loss(f.loss));
  if (f.method == "boc") return fit_boc(scores, labels, combine_scale_from_flags(f));
  if (f.method == "average") return fit_average(m, k, combine_scale_from_flags(f));
  if (f.method == "majority-vote") return fit_majority_vote(m, k);
  throw Error(ErrorKind::InvalidInput, "unknown method '" + f.method + "'");
}

inline io::ModelFile cmd_fit(const FitOptions& opts) {
  auto data = io::load_scores(opts.manifest);
  const auto& labels = require_labels(data, opts.manifest);
  auto folds = folded_from_flags(data.scores, labels, opts.flags);
  io::ModelFile mf{fit_from_flags(folds, opts.flags), data.names};
  io::save_model(opts.out, mf);
  return mf;
}

inline ProbTensor cmd_predict(const PredictOptions& opts) {
  auto mf = io::load_model(opts.model);
  auto data = io::load_scores(opts.manifest);
  io::check_learner_names(mf, data.names);
  auto probs = predict_proba(mf.model, data.scores);
  io::write_matrix_csv(opts.out, probs.values(), probs.n_classes());
  return probs;
}

inline EvalReport cmd_evaluate(const EvaluateOptions& opts) {
  auto data = io::load_scores(opts.manifest);
  const auto& labels = require_labels(data, opts.manifest);
  if (opts.model.has_value() == opts.predictions.has_value()) {
    throw Error(ErrorKind::InvalidInput, "evaluate needs exactly one of --model or --predictions");
  }
  EvalReport report;
  if (opts.model) {
    auto mf = io::load_model(*opts.model);
    io::check_learner_names(mf, data.names);
    report = evaluate_model(mf.model, data.scores, labels);
  } else {
    auto rows = io::read_matrix_csv(*opts.predictions);
    if (rows.front().size() != labels.n_classes()) {
      throw Error(ErrorKind::ClassMismatch, "prediction file has the wrong number of columns");
    }
    std::vector<double> values;
    for (const auto& r : rows) values.insert(values.end(), r.begin(), r.end());
    report = evaluate(ProbTensor(rows.size(), 1, labels.n_classes(), std::move(values)), labels);
  }
  io::write_atomic(opts.out, io::report_document(report).dump(2) + "\n");
  return report;
}

inline Comparison cmd_compare(const CompareOptions& opts, std::ostream* text_out = nullptr) {
  auto fit_data = io::load_scores(opts.manifest);
  auto test_data = io::load_scores(opts.test_manifest);
  if (fit_data.names != test_data.names) {
    throw Error(ErrorKind::NameMismatch, "validation and test manifests list different learners");
  }
  const auto& fit_labels = require_labels(fit_data, opts.manifest);
  const auto& test_labels = require_labels(test_data, opts.test_manifest);
  auto folds = folded_from_flags(fit_data.scores, fit_labels, opts.flags);
  ensemblex::CompareOptions co;
  co.solver = solver_from_flags(opts.flags);
  co.constraint = constraint_from_flags(opts.flags);
  co.scale = stacking_scale_from_flags(opts.flags);
  auto table = compare_all(folds, test_data.scores, test_labels, co);
  io::write_atomic(opts.out, io::comparison_to_json(table, fit_data.names).dump(2) + "\n");
  if (text_out) *text_out << io::comparison_table(table);
  return table;
}

/// Writes <out>/validation (n_units) and, when requested, <out>/test
/// (n_test_units) drawn from the same mixture, each with a manifest,
/// per-learner score files, labels, and the Bayes scores.
inline void cmd_synth(const SynthOptions& opts) {
  auto sf = io::synth_from_json(io::parse_json(io::read_text(opts.spec), opts.spec.string()));
  if (opts.seed) sf.spec.seed = *opts.seed;
  std::set<std::string> unique(sf.names.begin(), sf.names.end());
  if (unique.size() != sf.names.size()) throw Error(ErrorKind::InvalidInput, "learner names must be unique");

  const auto n_val = sf.spec.n_units;
  auto spec = sf.spec;
  spec.n_units = n_val + sf.n_test_units;
  auto syn = generate(spec);

  auto emit = [&](const fs::path& dir, std::size_t begin, std::size_t end) {
    auto scores = unit_slice(syn.scores, begin, end);
    auto labels = label_slice(syn.labels, begin, end);
    io::write_scores(dir, scores, sf.names, &labels);
    auto bayes = unit_slice(syn.bayes_scores, begin, end);
    io::write_matrix_csv(dir / "bayes_scores.csv", bayes.values(), bayes.n_classes());
  };
  emit(opts.out / "validation", 0, n_val);
  if (sf.n_test_units > 0) emit(opts.out / "test", n_val, spec.n_units);
}

}  // namespace ensemblex::cmd
