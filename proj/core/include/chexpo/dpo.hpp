// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "chexpo/types.hpp"

namespace chexpo::dpo {

/// Per-context logit rows; rows may differ in length.
using Logits = std::vector<std::vector<double>>;

/// Tabular softmax policy over a fixed response set per context.
class ToyPolicy {
 public:
  ToyPolicy() = default;
  /// Throws Error(Config, "invalid-shape") if any row has fewer than 2 responses.
  explicit ToyPolicy(Logits logits);

  /// All-zero logits (uniform policy).
  static ToyPolicy uniform(const std::vector<std::size_t>& responses_per_context);

  std::size_t contexts() const noexcept { return logits_.size(); }
  std::size_t responses(std::size_t context) const { return logits_.at(context).size(); }
  const Logits& logits() const noexcept { return logits_; }
  Logits& logits() noexcept { return logits_; }

  double log_prob(std::size_t context, std::size_t response) const;
  std::vector<double> probs(std::size_t context) const;

  bool same_shape(const ToyPolicy& other) const;

 private:
  Logits logits_;
};

struct PreferenceItem {
  std::size_t context;
  std::size_t chosen;
  std::size_t rejected;
};
using PreferenceBatch = std::vector<PreferenceItem>;

/// [log pi(w) - log ref(w)] - [log pi(l) - log ref(l)].
/// Throws Error(Config, "shape-mismatch" | "unknown-id").
double log_ratio_margin(const ToyPolicy& theta, const ToyPolicy& ref, const PreferenceItem& item);

/// beta * margin.
double implicit_reward_margin(const ToyPolicy& theta, const ToyPolicy& ref,
                              const PreferenceItem& item, double beta);

/// Loss of one pair as a function of its margin h.
///   Sigmoid: -log sigmoid(beta h)
///   Ipo:     (h - 1/(2 beta))^2
///   Hinge:   max(0, 1 - beta h)
///   Robust:  [(1-eps)(-log sigmoid(beta h)) - eps(-log sigmoid(-beta h))] / (1 - 2 eps)
/// Throws Error(Config, "invalid-beta" | "invalid-epsilon").
double dpo_loss(double h, double beta, LossType type, double robust_epsilon = 0.1);

/// d loss / d h. At the hinge kink the left derivative (-beta) is used.
double dpo_loss_slope(double h, double beta, LossType type, double robust_epsilon = 0.1);

/// Batch-mean loss.
double batch_loss(const ToyPolicy& theta, const ToyPolicy& ref, const PreferenceBatch& batch,
                  double beta, LossType type, double robust_epsilon = 0.1);

/// Gradient of batch_loss with respect to theta's logits (same shape).
Logits dpo_grad(const ToyPolicy& theta, const ToyPolicy& ref, const PreferenceBatch& batch,
                double beta, LossType type, double robust_epsilon = 0.1);

struct TrainStep {
  std::size_t step;
  double loss;         ///< batch loss before the update
  double mean_margin;  ///< mean h before the update
};

struct TrainResult {
  ToyPolicy theta;
  std::vector<TrainStep> history;
};

struct TrainOptions {
  double lr = 0.1;
  std::size_t steps = 500;
  double beta = 0.1;
  LossType loss_type = LossType::Sigmoid;
  double robust_epsilon = 0.1;
};

/// Full-batch gradient descent. Throws Error(Data, "divergence-detected")
/// naming the step whose loss went non-finite.
TrainResult train_toy(ToyPolicy theta0, const ToyPolicy& ref, const PreferenceBatch& batch,
                      const TrainOptions& options);

}  // namespace chexpo::dpo
