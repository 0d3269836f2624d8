#pragma once

// Unoptimized ensemble rules: unweighted averaging on either side of the
// softmax, plurality voting, the Bayes Optimal Classifier with a uniform
// prior, and the discrete Super Learner selector.

#include <ensemblex/core.hpp>

#include <cstddef>
#include <span>
#include <vector>

namespace ensemblex {

inline void require_matching(const ScoreTensor& s, const LabelVector& y) {
  ENSEMBLEX_REQUIRE(s.n_units() == y.size(), ErrorKind::DimensionMismatch,
                    "score tensor has " + std::to_string(s.n_units()) + " units but " +
                        std::to_string(y.size()) + " labels");
  ENSEMBLEX_REQUIRE(s.n_classes() == y.n_classes(), ErrorKind::DimensionMismatch,
                    "score tensor and labels disagree on the class count");
}

/// softmax of the per-unit mean score vector.
inline ProbTensor avg_before_softmax(const ScoreTensor& s) {
  const auto n = s.n_units(), m = s.n_learners(), k = s.n_classes();
  std::vector<double> out(n * k);
  std::vector<double> mean(k);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(mean.begin(), mean.end(), 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      auto r = s.row(i, j);
      for (std::size_t c = 0; c < k; ++c) mean[c] += r[c];
    }
    for (auto& v : mean) v /= static_cast<double>(m);
    softmax_into(mean, std::span<double>(out.data() + i * k, k));
  }
  return collapse_rows(n, k, std::move(out));
}

/// Per-unit mean of the learners' softmax probabilities.
inline ProbTensor avg_after_softmax(const ScoreTensor& s) {
  const auto n = s.n_units(), m = s.n_learners(), k = s.n_classes();
  std::vector<double> out(n * k, 0.0);
  std::vector<double> p(k);
  for (std::size_t i = 0; i < n; ++i) {
    double* acc = out.data() + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      softmax_into(s.row(i, j), p);
      for (std::size_t c = 0; c < k; ++c) acc[c] += p[c];
    }
    for (std::size_t c = 0; c < k; ++c) acc[c] /= static_cast<double>(m);
  }
  return collapse_rows(n, k, std::move(out));
}

/// Plurality of the learners' argmax votes; ties go to the lowest class.
inline LabelVector majority_vote(const ScoreTensor& s) {
  const auto n = s.n_units(), m = s.n_learners(), k = s.n_classes();
  std::vector<std::size_t> preds(n);
  std::vector<std::size_t> votes(k);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(votes.begin(), votes.end(), 0);
    for (std::size_t j = 0; j < m; ++j) ++votes[argmax_class(s.row(i, j))];
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c) {
      if (votes[c] > votes[best]) best = c;
    }
    preds[i] = best;
  }
  return LabelVector(std::move(preds), k);
}

/// Validation log-likelihood per hypothesis and the resulting posterior
/// weights under a uniform prior.
struct BocPosterior {
  std::vector<double> log_likelihoods;
  std::vector<double> posterior_weights;
};

/// Total clipped log-likelihood of the labels under each learner's softmax.
inline std::vector<double> learner_log_likelihoods(const ScoreTensor& s, const LabelVector& y) {
  require_matching(s, y);
  std::vector<double> ll(s.n_learners(), 0.0);
  for (std::size_t j = 0; j < s.n_learners(); ++j) {
    for (std::size_t i = 0; i < s.n_units(); ++i) ll[j] -= nll_from_scores(s.row(i, j), y[i]);
  }
  return ll;
}

inline BocPosterior boc_posterior_from_log_likelihoods(std::vector<double> log_likelihoods) {
  const double lse = log_sum_exp(log_likelihoods);
  std::vector<double> w(log_likelihoods.size());
  for (std::size_t j = 0; j < w.size(); ++j) w[j] = std::exp(log_likelihoods[j] - lse);
  double sum = 0.0;
  for (double v : w) sum += v;
  for (double& v : w) v /= sum;
  return {std::move(log_likelihoods), std::move(w)};
}

/// The posterior does not depend on the combination scale; the scale only
/// matters at prediction time.
inline BocPosterior boc_fit(const ScoreTensor& val_scores, const LabelVector& val_labels) {
  ENSEMBLEX_REQUIRE(!val_labels.empty(), ErrorKind::InvalidInput, "empty validation set");
  return boc_posterior_from_log_likelihoods(learner_log_likelihoods(val_scores, val_labels));
}

/// Weighted combination of learner outputs: softmax of the weighted score
/// sum (BeforeSoftmax) or weighted sum of probabilities (AfterSoftmax).
inline ProbTensor weighted_combine(std::span<const double> weights, const ScoreTensor& s,
                                   CombineScale scale) {
  ENSEMBLEX_REQUIRE(weights.size() == s.n_learners(), ErrorKind::DimensionMismatch,
                    "weight count differs from learner count");
  const auto n = s.n_units(), m = s.n_learners(), k = s.n_classes();
  std::vector<double> out(n * k, 0.0);
  std::vector<double> buf(k);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<double> dst(out.data() + i * k, k);
    if (scale == CombineScale::BeforeSoftmax) {
      std::fill(buf.begin(), buf.end(), 0.0);
      for (std::size_t j = 0; j < m; ++j) {
        auto r = s.row(i, j);
        for (std::size_t c = 0; c < k; ++c) buf[c] += weights[j] * r[c];
      }
      softmax_into(buf, dst);
    } else {
      for (std::size_t j = 0; j < m; ++j) {
        if (weights[j] == 0.0) continue;
        softmax_into(s.row(i, j), buf);
        for (std::size_t c = 0; c < k; ++c) dst[c] += weights[j] * buf[c];
      }
      double sum = 0.0;
      for (double v : dst) sum += v;
      for (double& v : dst) v /= sum;
    }
  }
  return collapse_rows(n, k, std::move(out));
}

inline ProbTensor boc_predict(const BocPosterior& posterior, const ScoreTensor& s, CombineScale scale) {
  return weighted_combine(posterior.posterior_weights, s, scale);
}

/// Mean validation risk of every learner under the given loss.
inline std::vector<double> learner_risks(const ScoreTensor& s, const LabelVector& y, Loss loss) {
  require_matching(s, y);
  ENSEMBLEX_REQUIRE(!y.empty(), ErrorKind::InvalidInput, "empty validation set");
  std::vector<double> risk(s.n_learners(), 0.0);
  for (std::size_t j = 0; j < s.n_learners(); ++j) {
    double total = 0.0;
    for (std::size_t i = 0; i < s.n_units(); ++i) {
      if (loss == Loss::Nll) {
        total += nll_from_scores(s.row(i, j), y[i]);
      } else {
        total += argmax_class(s.row(i, j)) == y[i] ? 0.0 : 1.0;
      }
    }
    risk[j] = total / static_cast<double>(s.n_units());
  }
  return risk;
}

/// Lowest-risk learner; ties go to the lowest learner index.
inline std::size_t argmin_index(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < values.size(); ++j) {
    if (values[j] < values[best]) best = j;
  }
  return best;
}

inline std::size_t discrete_sl_select(const ScoreTensor& val_scores, const LabelVector& val_labels,
                                      Loss loss) {
  return argmin_index(learner_risks(val_scores, val_labels, loss));
}

// FittedEnsemble wrappers so every rule can travel through the same model
// file and prediction path.

inline FittedEnsemble fit_average(std::size_t m, std::size_t k, CombineScale scale) {
  FittedEnsemble f;
  f.method = scale == CombineScale::BeforeSoftmax ? Method::AvgBeforeSoftmax : Method::AvgAfterSoftmax;
  f.combine_scale = scale;
  f.n_learners = m;
  f.n_classes = k;
  return f;
}

inline FittedEnsemble fit_majority_vote(std::size_t m, std::size_t k) {
  FittedEnsemble f;
  f.method = Method::MajorityVote;
  f.n_learners = m;
  f.n_classes = k;
  return f;
}

inline FittedEnsemble fit_boc(const ScoreTensor& val_scores, const LabelVector& val_labels,
                              CombineScale scale) {
  auto post = boc_fit(val_scores, val_labels);
  FittedEnsemble f;
  f.method = Method::Boc;
  f.combine_scale = scale;
  f.weights = WeightVector(post.posterior_weights, Constraint::simplex());
  f.n_learners = val_scores.n_learners();
  f.n_classes = val_scores.n_classes();
  return f;
}

inline FittedEnsemble fit_discrete_sl(const ScoreTensor& val_scores, const LabelVector& val_labels,
                                      Loss loss) {
  FittedEnsemble f;
  f.method = Method::DiscreteSl;
  f.loss = loss;
  f.selected_learner = discrete_sl_select(val_scores, val_labels, loss);
  f.n_learners = val_scores.n_learners();
  f.n_classes = val_scores.n_classes();
  return f;
}

}  // namespace ensemblex
