#pragma once

#include <ensemblex/core.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace ensemblex {

struct EvalReport {
  double accuracy = 0.0;
  std::optional<double> mean_cross_entropy;  // nats; absent for hard predictions
  std::vector<double> per_class_accuracy;    // NaN for classes with no units
  std::vector<std::vector<std::uint64_t>> confusion;  // [true][predicted]
  std::size_t n = 0;
};

namespace detail {

inline EvalReport tally(std::span<const std::size_t> preds, const LabelVector& labels) {
  const std::size_t k = labels.n_classes();
  EvalReport r;
  r.n = labels.size();
  r.confusion.assign(k, std::vector<std::uint64_t>(k, 0));
  std::uint64_t correct = 0;
  for (std::size_t i = 0; i < r.n; ++i) {
    ++r.confusion[labels[i]][preds[i]];
    if (preds[i] == labels[i]) ++correct;
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n);
  r.per_class_accuracy.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    std::uint64_t row = 0;
    for (auto v : r.confusion[c]) row += v;
    r.per_class_accuracy[c] = row == 0 ? std::numeric_limits<double>::quiet_NaN()
                                       : static_cast<double>(r.confusion[c][c]) / static_cast<double>(row);
  }
  return r;
}

}  // namespace detail

inline EvalReport evaluate(const ProbTensor& probs, const LabelVector& labels) {
  ENSEMBLEX_REQUIRE(probs.n_learners() == 1, ErrorKind::DimensionMismatch,
                    "evaluate expects combined (M = 1) probabilities");
  ENSEMBLEX_REQUIRE(probs.n_units() == labels.size(), ErrorKind::DimensionMismatch,
                    "prediction and label counts differ");
  ENSEMBLEX_REQUIRE(probs.n_classes() == labels.n_classes(), ErrorKind::DimensionMismatch,
                    "prediction and label class counts differ");
  std::vector<std::size_t> preds(probs.n_units());
  double ce = 0.0;
  for (std::size_t i = 0; i < probs.n_units(); ++i) {
    auto row = probs.row(i, 0);
    preds[i] = argmax_class(row);
    ce -= clipped_log(row[labels[i]]);
  }
  auto r = detail::tally(preds, labels);
  r.mean_cross_entropy = ce / static_cast<double>(probs.n_units());
  return r;
}

inline EvalReport evaluate_hard(const LabelVector& preds, const LabelVector& labels) {
  ENSEMBLEX_REQUIRE(!labels.empty(), ErrorKind::InvalidInput, "cannot evaluate an empty label set");
  ENSEMBLEX_REQUIRE(preds.size() == labels.size(), ErrorKind::DimensionMismatch,
                    "prediction and label counts differ");
  ENSEMBLEX_REQUIRE(preds.n_classes() == labels.n_classes(), ErrorKind::DimensionMismatch,
                    "prediction and label class counts differ");
  return detail::tally(preds.labels(), labels);
}

}  // namespace ensemblex
