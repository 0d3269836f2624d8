#pragma once

// Synthetic base-learner score tensors with an exact Bayes-optimal reference.
//
// Units come from a class-conditional Gaussian mixture with identity
// covariance and uniform class priors, so the true log class-posterior is
// affine in the features: mu_k . x - |mu_k|^2 / 2 (up to a per-unit shift).
// Every learner's scores are derived from that Bayes score vector.

#include <ensemblex/core.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace ensemblex {

struct LearnerSpec {
  enum class Kind { BayesOracle, Noisy, OverConfident, Weak, CorrelatedWith };

  Kind kind = Kind::BayesOracle;
  double noise_sd = 0.0;       // Noisy; OverConfident (noise added before sharpening)
  double temperature = 1.0;    // OverConfident, in (0, 1)
  double signal_shrink = 0.0;  // Weak, in [0, 1]
  std::size_t base = 0;        // CorrelatedWith, must precede this learner
  double mix = 0.0;            // CorrelatedWith, in [0, 1]

  static LearnerSpec bayes_oracle() { return {}; }
  static LearnerSpec noisy(double sd) { return {Kind::Noisy, sd}; }
  static LearnerSpec over_confident(double t, double sd = 0.0) {
    LearnerSpec s{Kind::OverConfident, sd};
    s.temperature = t;
    return s;
  }
  static LearnerSpec weak(double shrink) {
    LearnerSpec s{Kind::Weak};
    s.signal_shrink = shrink;
    return s;
  }
  static LearnerSpec correlated_with(std::size_t base, double mix) {
    LearnerSpec s{Kind::CorrelatedWith};
    s.base = base;
    s.mix = mix;
    return s;
  }
};

struct GenSpec {
  enum class Labels { Posterior, BayesArgmax };

  std::size_t n_units = 1000;
  std::size_t n_classes = 10;
  std::size_t n_features = 0;  // 0: same as n_classes
  double separation = 1.2;     // sd of randomly drawn class-mean coordinates
  std::vector<std::vector<double>> class_means;  // optional explicit K x d means
  double weak_noise_sd = 1.0;
  double correlated_noise_sd = 1.0;
  Labels labels = Labels::Posterior;
  std::vector<LearnerSpec> learners;
  std::uint64_t seed = 0;

  std::size_t feature_dim() const {
    if (!class_means.empty()) return class_means[0].size();
    return n_features == 0 ? n_classes : n_features;
  }

  void validate() const {
    ENSEMBLEX_REQUIRE(n_units >= 1, ErrorKind::InvalidInput, "n_units must be positive");
    ENSEMBLEX_REQUIRE(n_classes >= 2, ErrorKind::InvalidInput, "need at least two classes");
    ENSEMBLEX_REQUIRE(!learners.empty(), ErrorKind::InvalidInput, "need at least one learner");
    ENSEMBLEX_REQUIRE(separation >= 0.0 && std::isfinite(separation), ErrorKind::InvalidInput,
                      "separation must be non-negative");
    ENSEMBLEX_REQUIRE(weak_noise_sd >= 0.0 && correlated_noise_sd >= 0.0, ErrorKind::InvalidInput,
                      "noise levels must be non-negative");
    if (!class_means.empty()) {
      ENSEMBLEX_REQUIRE(class_means.size() == n_classes, ErrorKind::DimensionMismatch,
                        "class_means must have one row per class");
      for (const auto& mu : class_means) {
        ENSEMBLEX_REQUIRE(!mu.empty() && mu.size() == class_means[0].size(), ErrorKind::DimensionMismatch,
                          "class_means rows must share a positive dimension");
      }
    }
    for (std::size_t j = 0; j < learners.size(); ++j) {
      const auto& l = learners[j];
      switch (l.kind) {
        case LearnerSpec::Kind::BayesOracle: break;
        case LearnerSpec::Kind::Noisy:
          ENSEMBLEX_REQUIRE(l.noise_sd >= 0.0, ErrorKind::InvalidInput, "noise_sd must be >= 0");
          break;
        case LearnerSpec::Kind::OverConfident:
          ENSEMBLEX_REQUIRE(l.temperature > 0.0 && l.temperature < 1.0, ErrorKind::InvalidInput,
                            "temperature must lie in (0, 1)");
          ENSEMBLEX_REQUIRE(l.noise_sd >= 0.0, ErrorKind::InvalidInput, "noise_sd must be >= 0");
          break;
        case LearnerSpec::Kind::Weak:
          ENSEMBLEX_REQUIRE(l.signal_shrink >= 0.0 && l.signal_shrink <= 1.0, ErrorKind::InvalidInput,
                            "signal_shrink must lie in [0, 1]");
          break;
        case LearnerSpec::Kind::CorrelatedWith:
          ENSEMBLEX_REQUIRE(l.base < j, ErrorKind::InvalidInput,
                            "CorrelatedWith must reference an earlier learner");
          ENSEMBLEX_REQUIRE(l.mix >= 0.0 && l.mix <= 1.0, ErrorKind::InvalidInput, "mix must lie in [0, 1]");
          break;
      }
    }
  }
};

struct Synthetic {
  ScoreTensor scores;
  LabelVector labels;
  ScoreTensor bayes_scores;  // M = 1
  std::vector<std::vector<double>> class_means;
};

namespace detail {

// Independent stream per purpose so adding a learner leaves every other
// learner's draws unchanged.
inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id), static_cast<std::uint32_t>(id >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace detail

inline Synthetic generate(const GenSpec& spec) {
  spec.validate();
  const auto n = spec.n_units, k = spec.n_classes, m = spec.learners.size();
  const auto d = spec.feature_dim();

  auto means = spec.class_means;
  if (means.empty()) {
    auto rng = detail::stream(spec.seed, 0);
    std::normal_distribution<double> coord(0.0, spec.separation);
    means.assign(k, std::vector<double>(d));
    for (auto& mu : means) {
      for (auto& v : mu) v = coord(rng);
    }
  }
  std::vector<double> half_sq(k, 0.0);
  for (std::size_t c = 0; c < k; ++c) {
    for (double v : means[c]) half_sq[c] += 0.5 * v * v;
  }

  std::vector<double> bayes(n * k);
  std::vector<std::size_t> labels(n);
  {
    auto rng = detail::stream(spec.seed, 1);
    std::normal_distribution<double> unit_normal(0.0, 1.0);
    std::vector<double> x(d);
    for (std::size_t i = 0; i < n; ++i) {
      const auto y = static_cast<std::size_t>(
          (static_cast<unsigned __int128>(rng()) * k) >> 64);
      for (std::size_t f = 0; f < d; ++f) x[f] = means[y][f] + unit_normal(rng);
      for (std::size_t c = 0; c < k; ++c) {
        double s = -half_sq[c];
        for (std::size_t f = 0; f < d; ++f) s += means[c][f] * x[f];
        bayes[i * k + c] = s;
      }
      labels[i] = y;
    }
  }
  if (spec.labels == GenSpec::Labels::BayesArgmax) {
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = argmax_class(std::span<const double>(bayes.data() + i * k, k));
    }
  }

  // Learner-major scratch, interleaved into unit-major order at the end.
  std::vector<std::vector<double>> learner_scores(m, std::vector<double>(n * k));
  for (std::size_t j = 0; j < m; ++j) {
    const auto& l = spec.learners[j];
    auto rng = detail::stream(spec.seed, 2 + j);
    auto& out = learner_scores[j];
    auto noise = [&](double sd) {
      if (sd == 0.0) return 0.0;
      return std::normal_distribution<double>(0.0, sd)(rng);
    };
    for (std::size_t e = 0; e < n * k; ++e) {
      const double b = bayes[e];
      switch (l.kind) {
        case LearnerSpec::Kind::BayesOracle: out[e] = b; break;
        case LearnerSpec::Kind::Noisy: out[e] = b + noise(l.noise_sd); break;
        case LearnerSpec::Kind::OverConfident: out[e] = (b + noise(l.noise_sd)) / l.temperature; break;
        case LearnerSpec::Kind::Weak:
          out[e] = (1.0 - l.signal_shrink) * b + noise(spec.weak_noise_sd);
          break;
        case LearnerSpec::Kind::CorrelatedWith: {
          const double fresh = b + noise(spec.correlated_noise_sd);
          out[e] = l.mix == 1.0 ? learner_scores[l.base][e]
                                : l.mix * learner_scores[l.base][e] + (1.0 - l.mix) * fresh;
          break;
        }
      }
    }
  }

  std::vector<double> values(n * m * k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      std::copy_n(learner_scores[j].begin() + static_cast<std::ptrdiff_t>(i * k), k,
                  values.begin() + static_cast<std::ptrdiff_t>((i * m + j) * k));
    }
  }

  return {ScoreTensor(n, m, k, std::move(values)), LabelVector(std::move(labels), k),
          ScoreTensor(n, 1, k, std::move(bayes)), std::move(means)};
}

/// Accuracy of the Bayes decision rule on the sample.
inline double empirical_bayes_rate(const ScoreTensor& bayes_scores, const LabelVector& labels) {
  ENSEMBLEX_REQUIRE(bayes_scores.n_learners() == 1, ErrorKind::DimensionMismatch,
                    "Bayes scores must be a single-learner tensor");
  ENSEMBLEX_REQUIRE(bayes_scores.n_units() == labels.size(), ErrorKind::DimensionMismatch,
                    "Bayes score and label counts differ");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (argmax_class(bayes_scores.row(i, 0)) == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

}  // namespace ensemblex
