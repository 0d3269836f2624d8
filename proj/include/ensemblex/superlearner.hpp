#pragma once

// Weighted Super Learner: mean held-out NLL of a linear combination of
// learner scores (or, for binary problems, learner logits), minimized over
// the simplex or an L1 ball by projected gradient descent.

#include <ensemblex/combiners.hpp>
#include <ensemblex/core.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

namespace ensemblex {

/// Logits are clamped to this magnitude, matching the probability floor
/// (logit(1e-12) ~ -27.63).
inline constexpr double kLogitClip = 27.6;

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double expit(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double clipped_logit_from_scores(std::span<const double> scores) {
  return std::clamp(scores[1] - scores[0], -kLogitClip, kLogitClip);
}

// Euclidean projection of v onto {w >= 0, sum w = radius}. Sort-threshold
// algorithm; the result is renormalized so the sum is exact to rounding.
inline std::vector<double> project_simplex_radius(std::span<const double> v, double radius) {
  const std::size_t m = v.size();
  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    cumsum += sorted[r];
    const double t = (cumsum - radius) / static_cast<double>(r + 1);
    if (sorted[r] - t > 0.0) theta = t;
  }
  std::vector<double> w(m);
  double sum = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    w[j] = std::max(v[j] - theta, 0.0);
    sum += w[j];
  }
  if (sum > 0.0) {
    for (double& x : w) x *= radius / sum;
  } else {
    std::fill(w.begin(), w.end(), radius / static_cast<double>(m));
  }
  return w;
}

inline double feasibility_slack(std::size_t m) {
  return 4.0 * static_cast<double>(m) * std::numeric_limits<double>::epsilon();
}

}  // namespace detail

/// Projection onto the probability simplex. Points that are already feasible
/// (to rounding) are returned unchanged, which makes the map idempotent.
inline std::vector<double> project_simplex(std::span<const double> v) {
  ENSEMBLEX_REQUIRE(!v.empty(), ErrorKind::InvalidInput, "cannot project an empty vector");
  double sum = 0.0;
  bool nonneg = true;
  for (double x : v) {
    ENSEMBLEX_REQUIRE(std::isfinite(x), ErrorKind::InvalidInput, "projection of non-finite input");
    nonneg = nonneg && x >= 0.0;
    sum += x;
  }
  if (nonneg && std::abs(sum - 1.0) <= detail::feasibility_slack(v.size())) {
    return {v.begin(), v.end()};
  }
  return detail::project_simplex_radius(v, 1.0);
}

/// Projection onto {w : sum |w| <= bound}.
inline std::vector<double> project_l1_ball(std::span<const double> v, double bound) {
  ENSEMBLEX_REQUIRE(std::isfinite(bound) && bound > 0.0, ErrorKind::InvalidInput,
                    "L1 bound must be positive");
  ENSEMBLEX_REQUIRE(!v.empty(), ErrorKind::InvalidInput, "cannot project an empty vector");
  double l1 = 0.0;
  for (double x : v) {
    ENSEMBLEX_REQUIRE(std::isfinite(x), ErrorKind::InvalidInput, "projection of non-finite input");
    l1 += std::abs(x);
  }
  if (l1 <= bound * (1.0 + detail::feasibility_slack(v.size()))) return {v.begin(), v.end()};
  std::vector<double> mag(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) mag[j] = std::abs(v[j]);
  auto w = detail::project_simplex_radius(mag, bound);
  for (std::size_t j = 0; j < v.size(); ++j) w[j] = std::copysign(w[j], v[j]);
  return w;
}

inline std::vector<double> project(std::span<const double> v, const Constraint& c) {
  switch (c.kind) {
    case Constraint::Kind::Simplex: return project_simplex(v);
    case Constraint::Kind::L1Bounded: return project_l1_ball(v, c.bound);
    case Constraint::Kind::Unconstrained: break;
  }
  return {v.begin(), v.end()};
}

/// Held-out scores and labels together with the feasible set and stacking
/// scale; evaluates the mean stacked NLL and its gradient.
class SlObjective {
 public:
  SlObjective(ScoreTensor scores, LabelVector labels, Constraint constraint = Constraint::simplex(),
              StackingScale scale = StackingScale::Score)
      : scores_(std::move(scores)), labels_(std::move(labels)), constraint_(constraint), scale_(scale) {
    require_matching(scores_, labels_);
    ENSEMBLEX_REQUIRE(!labels_.empty(), ErrorKind::InvalidInput, "empty objective");
    if (scale_ == StackingScale::Logit) {
      ENSEMBLEX_REQUIRE(scores_.n_classes() == 2, ErrorKind::UnsupportedScale,
                        "logit-scale stacking requires exactly two classes");
      const auto n = scores_.n_units(), m = scores_.n_learners();
      logits_.resize(n * m);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
          logits_[i * m + j] = detail::clipped_logit_from_scores(scores_.row(i, j));
        }
      }
    }
  }

  const ScoreTensor& scores() const noexcept { return scores_; }
  const LabelVector& labels() const noexcept { return labels_; }
  const Constraint& constraint() const noexcept { return constraint_; }
  StackingScale scale() const noexcept { return scale_; }
  std::size_t n_learners() const noexcept { return scores_.n_learners(); }

  double risk(std::span<const double> a) const {
    check_weights(a);
    return scale_ == StackingScale::Score ? score_risk(a, nullptr) : logit_risk(a, nullptr);
  }

  std::vector<double> gradient(std::span<const double> a) const {
    check_weights(a);
    std::vector<double> g(a.size(), 0.0);
    if (scale_ == StackingScale::Score) {
      score_risk(a, &g);
    } else {
      logit_risk(a, &g);
    }
    return g;
  }

 private:
  void check_weights(std::span<const double> a) const {
    ENSEMBLEX_REQUIRE(a.size() == scores_.n_learners(), ErrorKind::DimensionMismatch,
                      "weight count differs from learner count");
  }

  // Mean over units of logsumexp(z_i) - z_i[y_i] with z_i = sum_j a_j s_ij.
  double score_risk(std::span<const double> a, std::vector<double>* grad) const {
    const auto n = scores_.n_units(), m = scores_.n_learners(), k = scores_.n_classes();
    std::vector<double> z(k), q(k);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::fill(z.begin(), z.end(), 0.0);
      for (std::size_t j = 0; j < m; ++j) {
        auto r = scores_.row(i, j);
        for (std::size_t c = 0; c < k; ++c) z[c] += a[j] * r[c];
      }
      const double mx = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        q[c] = std::exp(z[c] - mx);
        sum += q[c];
      }
      const std::size_t y = labels_[i];
      total += mx + std::log(sum) - z[y];
      if (grad) {
        for (auto& v : q) v /= sum;
        for (std::size_t j = 0; j < m; ++j) {
          auto r = scores_.row(i, j);
          double expected = 0.0;
          for (std::size_t c = 0; c < k; ++c) expected += q[c] * r[c];
          (*grad)[j] += expected - r[y];
        }
      }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    if (grad) {
      for (auto& v : *grad) v *= inv_n;
    }
    return total * inv_n;
  }

  // Mean Bernoulli NLL of expit(sum_j a_j logit_ij) against y_i == 1.
  double logit_risk(std::span<const double> a, std::vector<double>* grad) const {
    const auto n = scores_.n_units(), m = scores_.n_learners();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* l = logits_.data() + i * m;
      double z = 0.0;
      for (std::size_t j = 0; j < m; ++j) z += a[j] * l[j];
      const bool positive = labels_[i] == 1;
      total += positive ? detail::softplus(-z) : detail::softplus(z);
      if (grad) {
        const double resid = detail::expit(z) - (positive ? 1.0 : 0.0);
        for (std::size_t j = 0; j < m; ++j) (*grad)[j] += resid * l[j];
      }
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    if (grad) {
      for (auto& v : *grad) v *= inv_n;
    }
    return total * inv_n;
  }

  ScoreTensor scores_;
  LabelVector labels_;
  Constraint constraint_;
  StackingScale scale_;
  std::vector<double> logits_;  // N x M, Logit scale only
};

inline double sl_risk(const SlObjective& obj, const WeightVector& a) {
  ENSEMBLEX_REQUIRE(obj.scale() == StackingScale::Score, ErrorKind::UnsupportedScale,
                    "sl_risk expects a score-scale objective");
  return obj.risk(a.weights());
}

inline double sl_risk_binary_logit(const SlObjective& obj, const WeightVector& a) {
  ENSEMBLEX_REQUIRE(obj.scale() == StackingScale::Logit, ErrorKind::UnsupportedScale,
                    "sl_risk_binary_logit expects a logit-scale objective");
  return obj.risk(a.weights());
}

inline std::vector<double> sl_gradient(const SlObjective& obj, const WeightVector& a) {
  return obj.gradient(a.weights());
}

struct SolverConfig {
  std::size_t max_iters = 10000;
  double rel_tol = 1e-10;
  std::optional<WeightVector> warm_start;
  double initial_step = 1.0;
  double shrink = 0.5;
  double sufficient_decrease = 1e-4;

  void validate() const {
    ENSEMBLEX_REQUIRE(max_iters > 0, ErrorKind::InvalidInput, "max_iters must be positive");
    ENSEMBLEX_REQUIRE(rel_tol >= 0.0, ErrorKind::InvalidInput, "rel_tol must be non-negative");
    ENSEMBLEX_REQUIRE(initial_step > 0.0, ErrorKind::InvalidInput, "initial step must be positive");
    ENSEMBLEX_REQUIRE(shrink > 0.0 && shrink < 1.0, ErrorKind::InvalidInput, "shrink must lie in (0, 1)");
    ENSEMBLEX_REQUIRE(sufficient_decrease > 0.0 && sufficient_decrease < 1.0, ErrorKind::InvalidInput,
                      "sufficient-decrease constant must lie in (0, 1)");
  }
};

/// Norm of the projected-gradient step P(a - g) - a; zero exactly at a
/// constrained minimizer.
inline double projected_gradient_norm(const SlObjective& obj, std::span<const double> a) {
  auto g = obj.gradient(a);
  std::vector<double> v(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) v[j] = a[j] - g[j];
  auto p = project(v, obj.constraint());
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += (p[j] - a[j]) * (p[j] - a[j]);
  return std::sqrt(s);
}

/// Projected gradient descent with Armijo backtracking along the projection
/// arc. The first trial step of each iteration is the Barzilai-Borwein step
/// from the previous iteration (the configured initial step on the first
/// iteration); backtracking keeps every accepted step a descent step.
inline FittedEnsemble sl_fit(const SlObjective& obj, const SolverConfig& cfg = {}) {
  cfg.validate();
  const std::size_t m = obj.n_learners();
  const Constraint& c = obj.constraint();

  std::vector<double> a;
  if (cfg.warm_start) {
    ENSEMBLEX_REQUIRE(cfg.warm_start->size() == m, ErrorKind::DimensionMismatch,
                      "warm start has the wrong length");
    a = project(cfg.warm_start->weights(), c);
  } else {
    a.assign(m, 1.0 / static_cast<double>(m));
  }

  FitInfo info;
  double f = obj.risk(a);
  info.loss_trace.push_back(f);
  auto g = obj.gradient(a);
  double step = cfg.initial_step;
  info.converged = false;

  std::vector<double> trial(m), cand, d(m);
  for (std::size_t iter = 0; iter < cfg.max_iters; ++iter) {
    double t = step;
    double fc = 0.0;
    bool accepted = false;
    bool stationary = false;
    while (true) {
      for (std::size_t j = 0; j < m; ++j) trial[j] = a[j] - t * g[j];
      cand = project(trial, c);
      double dnorm = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        d[j] = cand[j] - a[j];
        dnorm = std::max(dnorm, std::abs(d[j]));
      }
      if (dnorm == 0.0) {
        stationary = true;
        break;
      }
      fc = obj.risk(cand);
      if (fc <= f + cfg.sufficient_decrease * detail::dot(g, d)) {
        accepted = true;
        break;
      }
      t *= cfg.shrink;
      if (t < 1e-20) {
        stationary = true;
        break;
      }
    }
    if (stationary || !accepted) {
      info.converged = true;
      break;
    }

    const double rel = (f - fc) / std::max(std::abs(f), std::numeric_limits<double>::min());
    auto g_new = obj.gradient(cand);
    double ss = 0.0, sy = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double yj = g_new[j] - g[j];
      ss += d[j] * d[j];
      sy += d[j] * yj;
    }
    step = sy > 0.0 ? std::clamp(ss / sy, 1e-10, 1e10) : cfg.initial_step;

    a = cand;
    f = fc;
    g = std::move(g_new);
    info.loss_trace.push_back(f);
    info.iterations = iter + 1;
    if (rel < cfg.rel_tol) {
      info.converged = true;
      break;
    }
  }

  FittedEnsemble out;
  out.method = Method::SuperLearner;
  out.stacking_scale = obj.scale();
  out.weights = WeightVector(std::move(a), c);
  out.n_learners = m;
  out.n_classes = obj.scores().n_classes();
  out.fit_info = std::move(info);
  return out;
}

/// Applies fitted Super Learner weights to new scores.
inline ProbTensor sl_predict(const FittedEnsemble& model, const ScoreTensor& s) {
  ENSEMBLEX_REQUIRE(model.method == Method::SuperLearner && model.weights, ErrorKind::InvalidInput,
                    "sl_predict needs a fitted Super Learner");
  const auto& w = model.weights->weights();
  ENSEMBLEX_REQUIRE(w.size() == s.n_learners(), ErrorKind::DimensionMismatch,
                    "model weight count differs from learner count");
  if (model.stacking_scale == StackingScale::Score) {
    return weighted_combine(w, s, CombineScale::BeforeSoftmax);
  }
  ENSEMBLEX_REQUIRE(s.n_classes() == 2, ErrorKind::UnsupportedScale,
                    "logit-scale model applied to a non-binary score tensor");
  const auto n = s.n_units(), m = s.n_learners();
  std::vector<double> out(n * 2);
  for (std::size_t i = 0; i < n; ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < m; ++j) z += w[j] * detail::clipped_logit_from_scores(s.row(i, j));
    const double p1 = detail::expit(z);
    out[2 * i] = 1.0 - p1;
    out[2 * i + 1] = p1;
  }
  return collapse_rows(n, 2, std::move(out));
}

}  // namespace ensemblex
