// SPDX-License-Identifier: Apache-2.0
#include "chexpo/dpo.hpp"

#include <algorithm>
#include <cmath>

#include "chexpo/error.hpp"
#include "chexpo/numeric.hpp"

namespace chexpo::dpo {

namespace {

double log_sum_exp(const std::vector<double>& row) {
  const double m = *std::max_element(row.begin(), row.end());
  CompensatedSum s;
  for (double z : row) s += std::exp(z - m);
  return m + std::log(s.value());
}

void check_params(double beta, LossType type, double eps) {
  if (!std::isfinite(beta) || beta <= 0.0) throw_config("invalid-beta", "beta must be positive");
  if (type == LossType::Robust && !(eps >= 0.0 && eps < 0.5)) {
    throw_config("invalid-epsilon", "robust epsilon must lie in [0, 0.5)");
  }
}

void check_shape(const ToyPolicy& theta, const ToyPolicy& ref) {
  if (!theta.same_shape(ref)) throw_config("shape-mismatch", "policy and reference differ in shape");
}

/// Bounds only; callers check the shapes once per batch.
void check_bounds(const ToyPolicy& theta, const PreferenceItem& item) {
  if (item.context >= theta.contexts() || item.chosen >= theta.responses(item.context) ||
      item.rejected >= theta.responses(item.context)) {
    throw_config("unknown-id", "preference item outside policy shape");
  }
  if (item.chosen == item.rejected) throw_config("chosen-equals-rejected");
}

}  // namespace

ToyPolicy::ToyPolicy(Logits logits) : logits_(std::move(logits)) {
  for (const auto& row : logits_) {
    if (row.size() < 2) throw_config("invalid-shape", "each context needs at least 2 responses");
  }
}

ToyPolicy ToyPolicy::uniform(const std::vector<std::size_t>& responses_per_context) {
  Logits l;
  l.reserve(responses_per_context.size());
  for (std::size_t n : responses_per_context) l.emplace_back(n, 0.0);
  return ToyPolicy(std::move(l));
}

double ToyPolicy::log_prob(std::size_t context, std::size_t response) const {
  const auto& row = logits_.at(context);
  return row.at(response) - log_sum_exp(row);
}

std::vector<double> ToyPolicy::probs(std::size_t context) const {
  const auto& row = logits_.at(context);
  const double lse = log_sum_exp(row);
  std::vector<double> p(row.size());
  for (std::size_t i = 0; i < row.size(); ++i) p[i] = std::exp(row[i] - lse);
  return p;
}

bool ToyPolicy::same_shape(const ToyPolicy& other) const {
  if (logits_.size() != other.logits_.size()) return false;
  for (std::size_t c = 0; c < logits_.size(); ++c) {
    if (logits_[c].size() != other.logits_[c].size()) return false;
  }
  return true;
}

namespace {

double margin_unchecked(const ToyPolicy& theta, const ToyPolicy& ref, const PreferenceItem& item) {
  check_bounds(theta, item);
  const double chosen = theta.log_prob(item.context, item.chosen) - ref.log_prob(item.context, item.chosen);
  const double rejected =
      theta.log_prob(item.context, item.rejected) - ref.log_prob(item.context, item.rejected);
  return chosen - rejected;
}

}  // namespace

double log_ratio_margin(const ToyPolicy& theta, const ToyPolicy& ref, const PreferenceItem& item) {
  check_shape(theta, ref);
  return margin_unchecked(theta, ref, item);
}

double implicit_reward_margin(const ToyPolicy& theta, const ToyPolicy& ref,
                              const PreferenceItem& item, double beta) {
  return beta * log_ratio_margin(theta, ref, item);
}

double dpo_loss(double h, double beta, LossType type, double eps) {
  check_params(beta, type, eps);
  const double x = beta * h;
  switch (type) {
    case LossType::Sigmoid: return softplus(-x);
    case LossType::Ipo: {
      const double d = h - 1.0 / (2.0 * beta);
      return d * d;
    }
    case LossType::Hinge: return std::max(0.0, 1.0 - x);
    case LossType::Robust:
      return ((1.0 - eps) * softplus(-x) - eps * softplus(x)) / (1.0 - 2.0 * eps);
  }
  return 0.0;
}

double dpo_loss_slope(double h, double beta, LossType type, double eps) {
  check_params(beta, type, eps);
  const double x = beta * h;
  switch (type) {
    case LossType::Sigmoid: return -beta * logistic(-x);
    case LossType::Ipo: return 2.0 * (h - 1.0 / (2.0 * beta));
    case LossType::Hinge: return x <= 1.0 ? -beta : 0.0;
    case LossType::Robust:
      return (-(1.0 - eps) * beta * logistic(-x) - eps * beta * logistic(x)) / (1.0 - 2.0 * eps);
  }
  return 0.0;
}

double batch_loss(const ToyPolicy& theta, const ToyPolicy& ref, const PreferenceBatch& batch,
                  double beta, LossType type, double eps) {
  check_params(beta, type, eps);
  check_shape(theta, ref);
  if (batch.empty()) return 0.0;
  CompensatedSum total;
  for (const auto& item : batch) total += dpo_loss(margin_unchecked(theta, ref, item), beta, type, eps);
  return total.value() / static_cast<double>(batch.size());
}

Logits dpo_grad(const ToyPolicy& theta, const ToyPolicy& ref, const PreferenceBatch& batch,
                double beta, LossType type, double eps) {
  check_params(beta, type, eps);
  check_shape(theta, ref);

  std::vector<std::vector<CompensatedSum>> acc;
  acc.reserve(theta.contexts());
  for (const auto& row : theta.logits()) acc.emplace_back(row.size());

  for (const auto& item : batch) {
    const double slope = dpo_loss_slope(margin_unchecked(theta, ref, item), beta, type, eps);
    // d log pi(r|c) / d z_j = [j == r] - pi_j; the margin takes the
    // chosen-minus-rejected difference of these rows.
    const auto p = theta.probs(item.context);
    auto& row = acc[item.context];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double d_chosen = (j == item.chosen ? 1.0 : 0.0) - p[j];
      const double d_rejected = (j == item.rejected ? 1.0 : 0.0) - p[j];
      row[j] += slope * (d_chosen - d_rejected);
    }
  }

  const double scale = batch.empty() ? 0.0 : 1.0 / static_cast<double>(batch.size());
  Logits grad;
  grad.reserve(acc.size());
  for (const auto& row : acc) {
    std::vector<double> g(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) g[j] = row[j].value() * scale;
    grad.push_back(std::move(g));
  }
  return grad;
}

TrainResult train_toy(ToyPolicy theta0, const ToyPolicy& ref, const PreferenceBatch& batch,
                      const TrainOptions& o) {
  if (!(o.lr >= 0.0) || !std::isfinite(o.lr)) throw_config("invalid-lr", "learning rate must be non-negative");
  if (o.steps < 1) throw_config("invalid-steps", "at least one step required");
  check_params(o.beta, o.loss_type, o.robust_epsilon);
  check_shape(theta0, ref);

  TrainResult result{std::move(theta0), {}};
  result.history.reserve(o.steps);
  for (std::size_t step = 0; step < o.steps; ++step) {
    const double loss = batch_loss(result.theta, ref, batch, o.beta, o.loss_type, o.robust_epsilon);
    if (!std::isfinite(loss)) {
      throw_data("divergence-detected", "non-finite loss at step " + std::to_string(step));
    }
    CompensatedSum margin;
    for (const auto& item : batch) margin += margin_unchecked(result.theta, ref, item);
    const double mean_margin = batch.empty() ? 0.0 : margin.value() / double(batch.size());
    result.history.push_back({step, loss, mean_margin});

    const auto grad = dpo_grad(result.theta, ref, batch, o.beta, o.loss_type, o.robust_epsilon);
    auto& logits = result.theta.logits();
    for (std::size_t c = 0; c < logits.size(); ++c) {
      for (std::size_t j = 0; j < logits[c].size(); ++j) logits[c][j] -= o.lr * grad[c][j];
    }
  }
  return result;
}

}  // namespace chexpo::dpo
