#pragma once

// Domain types and numeric kernels shared by every ensemble component.
//
// Tensors are stored unit-major: value(i, j, k) lives at ((i * M) + j) * K + k,
// so one unit's M x K score matrix is a contiguous block and a single
// learner's K-vector for a unit is a contiguous row.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ensemblex {

/// Probabilities are floored here before any logarithm.
inline constexpr double kProbFloor = 1e-12;

/// Tolerance used when validating normalization of probability rows and
/// simplex weights.
inline constexpr double kNormTol = 1e-9;

enum class ErrorKind {
  InvalidInput,
  DimensionMismatch,
  UnsupportedScale,
  MissingFile,
  RaggedRows,
  ClassMismatch,
  NonFinite,
  Normalization,
  UnknownVersion,
  ParseError,
  NameMismatch,
  IoError,
};

inline std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::UnsupportedScale: return "unsupported-scale";
    case ErrorKind::MissingFile: return "missing-file";
    case ErrorKind::RaggedRows: return "ragged-rows";
    case ErrorKind::ClassMismatch: return "class-mismatch";
    case ErrorKind::NonFinite: return "non-finite";
    case ErrorKind::Normalization: return "normalization-error";
    case ErrorKind::UnknownVersion: return "unknown-version";
    case ErrorKind::ParseError: return "parse-error";
    case ErrorKind::NameMismatch: return "name-mismatch";
    case ErrorKind::IoError: return "io-error";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define ENSEMBLEX_REQUIRE(cond, kind, msg)          \
  do {                                              \
    if (!(cond)) throw ::ensemblex::Error((kind), (msg)); \
  } while (0)

namespace detail {

// Dense N x M x K storage shared by the score and probability tensors.
class Tensor3 {
 public:
  Tensor3() = default;

  Tensor3(std::size_t n_units, std::size_t n_learners, std::size_t n_classes,
          std::vector<double> values)
      : n_(n_units), m_(n_learners), k_(n_classes), values_(std::move(values)) {
    ENSEMBLEX_REQUIRE(n_ >= 1, ErrorKind::InvalidInput, "tensor needs at least one unit");
    ENSEMBLEX_REQUIRE(m_ >= 1, ErrorKind::InvalidInput, "tensor needs at least one learner");
    ENSEMBLEX_REQUIRE(k_ >= 2, ErrorKind::InvalidInput, "tensor needs at least two classes");
    ENSEMBLEX_REQUIRE(values_.size() == n_ * m_ * k_, ErrorKind::DimensionMismatch,
                      "tensor value store has " + std::to_string(values_.size()) +
                          " entries, expected " + std::to_string(n_ * m_ * k_));
  }

  std::size_t n_units() const noexcept { return n_; }
  std::size_t n_learners() const noexcept { return m_; }
  std::size_t n_classes() const noexcept { return k_; }

  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return values_[(i * m_ + j) * k_ + k];
  }

  /// K-vector of learner j on unit i.
  std::span<const double> row(std::size_t i, std::size_t j) const {
    return {values_.data() + (i * m_ + j) * k_, k_};
  }

  /// M x K block of unit i, learner-major.
  std::span<const double> unit(std::size_t i) const {
    return {values_.data() + i * m_ * k_, m_ * k_};
  }

  std::span<const double> values() const noexcept { return values_; }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t m_ = 0;
  std::size_t k_ = 0;
  std::vector<double> values_;
};

}  // namespace detail

/// Raw pre-softmax base-learner outputs. All entries finite.
class ScoreTensor : public detail::Tensor3 {
 public:
  ScoreTensor() = default;

  ScoreTensor(std::size_t n_units, std::size_t n_learners, std::size_t n_classes,
              std::vector<double> values)
      : Tensor3(n_units, n_learners, n_classes, std::move(values)) {
    for (double v : this->values()) {
      ENSEMBLEX_REQUIRE(std::isfinite(v), ErrorKind::NonFinite, "score tensor holds a non-finite value");
    }
  }

  friend bool operator==(const ScoreTensor&, const ScoreTensor&) = default;
};

/// Per-(unit, learner) class probabilities; every row sums to one.
class ProbTensor : public detail::Tensor3 {
 public:
  ProbTensor() = default;

  ProbTensor(std::size_t n_units, std::size_t n_learners, std::size_t n_classes,
             std::vector<double> values)
      : Tensor3(n_units, n_learners, n_classes, std::move(values)) {
    for (std::size_t i = 0; i < this->n_units(); ++i) {
      for (std::size_t j = 0; j < this->n_learners(); ++j) {
        double sum = 0.0;
        for (double p : row(i, j)) {
          ENSEMBLEX_REQUIRE(std::isfinite(p) && p >= 0.0 && p <= 1.0, ErrorKind::InvalidInput,
                            "probability outside [0, 1]");
          sum += p;
        }
        ENSEMBLEX_REQUIRE(std::abs(sum - 1.0) <= kNormTol, ErrorKind::Normalization,
                          "probability row does not sum to one");
      }
    }
  }

  friend bool operator==(const ProbTensor&, const ProbTensor&) = default;
};

/// Ground-truth (or predicted) class indices.
class LabelVector {
 public:
  LabelVector() = default;

  LabelVector(std::vector<std::size_t> labels, std::size_t n_classes)
      : labels_(std::move(labels)), k_(n_classes) {
    ENSEMBLEX_REQUIRE(k_ >= 2, ErrorKind::InvalidInput, "label vector needs at least two classes");
    for (auto y : labels_) {
      ENSEMBLEX_REQUIRE(y < k_, ErrorKind::InvalidInput,
                        "label " + std::to_string(y) + " out of range for " +
                            std::to_string(k_) + " classes");
    }
  }

  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }
  std::size_t n_classes() const noexcept { return k_; }
  std::size_t operator[](std::size_t i) const { return labels_[i]; }
  std::span<const std::size_t> labels() const noexcept { return labels_; }

  friend bool operator==(const LabelVector&, const LabelVector&) = default;

 private:
  std::vector<std::size_t> labels_;
  std::size_t k_ = 0;
};

struct Constraint {
  enum class Kind { Simplex, L1Bounded, Unconstrained };

  Kind kind = Kind::Simplex;
  double bound = 0.0;  // only meaningful for L1Bounded

  static Constraint simplex() { return {Kind::Simplex, 0.0}; }
  static Constraint l1(double bound) {
    ENSEMBLEX_REQUIRE(std::isfinite(bound) && bound > 0.0, ErrorKind::InvalidInput,
                      "L1 bound must be positive");
    return {Kind::L1Bounded, bound};
  }
  static Constraint unconstrained() { return {Kind::Unconstrained, 0.0}; }

  friend bool operator==(const Constraint&, const Constraint&) = default;
};

/// Default L1 radius when the L1 constraint is selected without a bound.
inline constexpr double kDefaultL1Bound = 5.0;

/// Combination coefficients together with the feasible set they live in.
class WeightVector {
 public:
  WeightVector() = default;

  WeightVector(std::vector<double> weights, Constraint constraint)
      : weights_(std::move(weights)), constraint_(constraint) {
    ENSEMBLEX_REQUIRE(!weights_.empty(), ErrorKind::InvalidInput, "weight vector is empty");
    for (double w : weights_) {
      ENSEMBLEX_REQUIRE(std::isfinite(w), ErrorKind::NonFinite, "weight is not finite");
    }
    switch (constraint_.kind) {
      case Constraint::Kind::Simplex: {
        double sum = 0.0;
        for (double w : weights_) {
          ENSEMBLEX_REQUIRE(w >= 0.0, ErrorKind::InvalidInput, "simplex weight is negative");
          sum += w;
        }
        ENSEMBLEX_REQUIRE(std::abs(sum - 1.0) <= kNormTol, ErrorKind::Normalization,
                          "simplex weights do not sum to one");
        break;
      }
      case Constraint::Kind::L1Bounded: {
        double l1 = 0.0;
        for (double w : weights_) l1 += std::abs(w);
        ENSEMBLEX_REQUIRE(l1 <= constraint_.bound + kNormTol, ErrorKind::InvalidInput,
                          "weights exceed the L1 bound");
        break;
      }
      case Constraint::Kind::Unconstrained:
        break;
    }
  }

  static WeightVector uniform(std::size_t m, Constraint constraint) {
    std::vector<double> w(m, 1.0 / static_cast<double>(m));
    return WeightVector(std::move(w), constraint);
  }

  static WeightVector one_hot(std::size_t m, std::size_t j, Constraint constraint) {
    std::vector<double> w(m, 0.0);
    w.at(j) = 1.0;
    return WeightVector(std::move(w), constraint);
  }

  std::size_t size() const noexcept { return weights_.size(); }
  double operator[](std::size_t j) const { return weights_[j]; }
  std::span<const double> weights() const noexcept { return weights_; }
  const Constraint& constraint() const noexcept { return constraint_; }

  friend bool operator==(const WeightVector&, const WeightVector&) = default;

 private:
  std::vector<double> weights_;
  Constraint constraint_;
};

enum class Method { AvgBeforeSoftmax, AvgAfterSoftmax, MajorityVote, Boc, DiscreteSl, SuperLearner };

/// Loss used by selectors and cross-validated risks.
enum class Loss { Nll, Error };

/// Scale on which BOC weights combine learner outputs.
enum class CombineScale { BeforeSoftmax, AfterSoftmax };

/// Scale on which the Super Learner stacks learners.
enum class StackingScale { Score, Logit };

struct FitInfo {
  std::vector<double> loss_trace;
  std::size_t iterations = 0;
  bool converged = true;

  friend bool operator==(const FitInfo&, const FitInfo&) = default;
};

struct FittedEnsemble {
  Method method = Method::AvgAfterSoftmax;
  std::optional<WeightVector> weights;
  std::optional<std::size_t> selected_learner;
  Loss loss = Loss::Nll;                                  // DiscreteSl
  CombineScale combine_scale = CombineScale::AfterSoftmax; // Boc
  StackingScale stacking_scale = StackingScale::Score;    // SuperLearner
  std::size_t n_learners = 0;
  std::size_t n_classes = 0;
  FitInfo fit_info;

  friend bool operator==(const FittedEnsemble&, const FittedEnsemble&) = default;
};

// ---------------------------------------------------------------------------
// Numeric kernels
// ---------------------------------------------------------------------------

/// log(sum(exp(xs))) with max-subtraction.
inline double log_sum_exp(std::span<const double> xs) {
  ENSEMBLEX_REQUIRE(!xs.empty(), ErrorKind::InvalidInput, "log_sum_exp of an empty array");
  const double mx = *std::max_element(xs.begin(), xs.end());
  ENSEMBLEX_REQUIRE(std::isfinite(mx), ErrorKind::InvalidInput, "log_sum_exp of non-finite input");
  double sum = 0.0;
  for (double x : xs) {
    ENSEMBLEX_REQUIRE(std::isfinite(x), ErrorKind::InvalidInput, "log_sum_exp of non-finite input");
    sum += std::exp(x - mx);
  }
  return mx + std::log(sum);
}

/// Writes softmax(scores) into out; both of length K.
inline void softmax_into(std::span<const double> scores, std::span<double> out) {
  const double mx = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < scores.size(); ++k) {
    out[k] = std::exp(scores[k] - mx);
    sum += out[k];
  }
  for (auto& p : out) p /= sum;
}

inline std::vector<double> softmax_unit(std::span<const double> scores) {
  ENSEMBLEX_REQUIRE(!scores.empty(), ErrorKind::InvalidInput, "softmax of an empty array");
  for (double s : scores) {
    ENSEMBLEX_REQUIRE(std::isfinite(s), ErrorKind::InvalidInput, "softmax of non-finite input");
  }
  std::vector<double> out(scores.size());
  softmax_into(scores, out);
  return out;
}

inline std::vector<double> log_softmax_unit(std::span<const double> scores) {
  const double lse = log_sum_exp(scores);
  std::vector<double> out(scores.size());
  for (std::size_t k = 0; k < scores.size(); ++k) out[k] = scores[k] - lse;
  return out;
}

inline ProbTensor softmax_tensor(const ScoreTensor& s) {
  const auto n = s.n_units(), m = s.n_learners(), k = s.n_classes();
  std::vector<double> out(n * m * k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      softmax_into(s.row(i, j), std::span<double>(out.data() + (i * m + j) * k, k));
    }
  }
  return ProbTensor(n, m, k, std::move(out));
}

/// Index of the maximum; ties resolve to the lowest index.
inline std::size_t argmax_class(std::span<const double> values) {
  ENSEMBLEX_REQUIRE(!values.empty(), ErrorKind::InvalidInput, "argmax of an empty array");
  std::size_t best = 0;
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k] > values[best]) best = k;
  }
  return best;
}

inline double clipped_log(double p) { return std::log(std::max(p, kProbFloor)); }

/// -log softmax(scores)[y], computed without forming probabilities. The
/// probability is floored at kProbFloor, so the result never exceeds
/// -log(kProbFloor).
inline double nll_from_scores(std::span<const double> scores, std::size_t y) {
  const double mx = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - mx);
  const double log_p = scores[y] - mx - std::log(sum);
  return -std::max(log_p, std::log(kProbFloor));
}

/// Prediction tensor with a single combined "learner", built from per-unit rows.
inline ProbTensor collapse_rows(std::size_t n, std::size_t k, std::vector<double> rows) {
  return ProbTensor(n, 1, k, std::move(rows));
}

/// Argmax prediction per unit of a single-learner probability tensor.
inline LabelVector predicted_labels(const ProbTensor& p) {
  ENSEMBLEX_REQUIRE(p.n_learners() == 1, ErrorKind::DimensionMismatch,
                    "predicted_labels expects a combined (M = 1) tensor");
  std::vector<std::size_t> out(p.n_units());
  for (std::size_t i = 0; i < p.n_units(); ++i) out[i] = argmax_class(p.row(i, 0));
  return LabelVector(std::move(out), p.n_classes());
}

/// Scores of a single learner as an M = 1 tensor.
inline ScoreTensor learner_slice(const ScoreTensor& s, std::size_t j) {
  ENSEMBLEX_REQUIRE(j < s.n_learners(), ErrorKind::InvalidInput, "learner index out of range");
  const auto n = s.n_units(), k = s.n_classes();
  std::vector<double> out;
  out.reserve(n * k);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = s.row(i, j);
    out.insert(out.end(), r.begin(), r.end());
  }
  return ScoreTensor(n, 1, k, std::move(out));
}

/// Units [begin, end) of a tensor.
inline ScoreTensor unit_slice(const ScoreTensor& s, std::size_t begin, std::size_t end) {
  ENSEMBLEX_REQUIRE(begin < end && end <= s.n_units(), ErrorKind::InvalidInput, "bad unit range");
  const auto block = s.n_learners() * s.n_classes();
  std::vector<double> out(s.values().begin() + static_cast<std::ptrdiff_t>(begin * block),
                          s.values().begin() + static_cast<std::ptrdiff_t>(end * block));
  return ScoreTensor(end - begin, s.n_learners(), s.n_classes(), std::move(out));
}

inline LabelVector label_slice(const LabelVector& y, std::size_t begin, std::size_t end) {
  ENSEMBLEX_REQUIRE(begin < end && end <= y.size(), ErrorKind::InvalidInput, "bad unit range");
  std::vector<std::size_t> out(y.labels().begin() + static_cast<std::ptrdiff_t>(begin),
                               y.labels().begin() + static_cast<std::ptrdiff_t>(end));
  return LabelVector(std::move(out), y.n_classes());
}

/// Selected units (in the given order) of a tensor.
inline ScoreTensor unit_subset(const ScoreTensor& s, std::span<const std::size_t> units) {
  ENSEMBLEX_REQUIRE(!units.empty(), ErrorKind::InvalidInput, "empty unit subset");
  const auto block = s.unit(0).size();
  std::vector<double> out;
  out.reserve(units.size() * block);
  for (auto i : units) {
    ENSEMBLEX_REQUIRE(i < s.n_units(), ErrorKind::InvalidInput, "unit index out of range");
    auto u = s.unit(i);
    out.insert(out.end(), u.begin(), u.end());
  }
  return ScoreTensor(units.size(), s.n_learners(), s.n_classes(), std::move(out));
}

inline LabelVector label_subset(const LabelVector& y, std::span<const std::size_t> units) {
  std::vector<std::size_t> out;
  out.reserve(units.size());
  for (auto i : units) {
    ENSEMBLEX_REQUIRE(i < y.size(), ErrorKind::InvalidInput, "unit index out of range");
    out.push_back(y[i]);
  }
  return LabelVector(std::move(out), y.n_classes());
}

/// Reorders the learner axis: learner j of the result is learner order[j] of s.
inline ScoreTensor permute_learners(const ScoreTensor& s, std::span<const std::size_t> order) {
  ENSEMBLEX_REQUIRE(order.size() == s.n_learners(), ErrorKind::DimensionMismatch,
                    "permutation length differs from learner count");
  const auto n = s.n_units(), k = s.n_classes();
  std::vector<double> out;
  out.reserve(s.values().size());
  for (std::size_t i = 0; i < n; ++i) {
    for (auto j : order) {
      auto r = s.row(i, j);
      out.insert(out.end(), r.begin(), r.end());
    }
  }
  return ScoreTensor(n, order.size(), k, std::move(out));
}

/// Concatenates tensors along the learner axis (same N and K).
inline ScoreTensor stack_learners(std::span<const ScoreTensor> parts) {
  ENSEMBLEX_REQUIRE(!parts.empty(), ErrorKind::InvalidInput, "nothing to stack");
  const auto n = parts[0].n_units(), k = parts[0].n_classes();
  std::size_t m = 0;
  for (const auto& p : parts) {
    ENSEMBLEX_REQUIRE(p.n_units() == n && p.n_classes() == k, ErrorKind::DimensionMismatch,
                      "stacked tensors disagree in units or classes");
    m += p.n_learners();
  }
  std::vector<double> out;
  out.reserve(n * m * k);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& p : parts) {
      auto u = p.unit(i);
      out.insert(out.end(), u.begin(), u.end());
    }
  }
  return ScoreTensor(n, m, k, std::move(out));
}

}  // namespace ensemblex
