#pragma once

#include <ensemblex/combiners.hpp>
#include <ensemblex/core.hpp>
#include <ensemblex/superlearner.hpp>

namespace ensemblex {

/// Combined class probabilities of any fitted ensemble. Majority vote has
/// no probability model, so its rows are one-hot at the voted class.
inline ProbTensor predict_proba(const FittedEnsemble& model, const ScoreTensor& s) {
  ENSEMBLEX_REQUIRE(model.n_learners == 0 || model.n_learners == s.n_learners(),
                    ErrorKind::DimensionMismatch, "model and scores disagree on the learner count");
  ENSEMBLEX_REQUIRE(model.n_classes == 0 || model.n_classes == s.n_classes(),
                    ErrorKind::DimensionMismatch, "model and scores disagree on the class count");
  switch (model.method) {
    case Method::AvgBeforeSoftmax: return avg_before_softmax(s);
    case Method::AvgAfterSoftmax: return avg_after_softmax(s);
    case Method::MajorityVote: {
      auto votes = majority_vote(s);
      std::vector<double> rows(s.n_units() * s.n_classes(), 0.0);
      for (std::size_t i = 0; i < s.n_units(); ++i) rows[i * s.n_classes() + votes[i]] = 1.0;
      return collapse_rows(s.n_units(), s.n_classes(), std::move(rows));
    }
    case Method::Boc:
      ENSEMBLEX_REQUIRE(model.weights.has_value(), ErrorKind::InvalidInput, "BOC model without weights");
      return weighted_combine(model.weights->weights(), s, model.combine_scale);
    case Method::DiscreteSl:
      ENSEMBLEX_REQUIRE(model.selected_learner.has_value(), ErrorKind::InvalidInput,
                        "discrete Super Learner model without a selected learner");
      return softmax_tensor(learner_slice(s, *model.selected_learner));
    case Method::SuperLearner: return sl_predict(model, s);
  }
  throw Error(ErrorKind::InvalidInput, "unknown ensemble method");
}

/// Hard predictions; majority vote bypasses the probability path.
inline LabelVector predict_labels(const FittedEnsemble& model, const ScoreTensor& s) {
  if (model.method == Method::MajorityVote) return majority_vote(s);
  return predicted_labels(predict_proba(model, s));
}

}  // namespace ensemblex
