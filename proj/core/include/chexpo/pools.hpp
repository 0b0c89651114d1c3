// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace chexpo {

enum class PoolKind { Anatomy, Abnormality, Severity };
std::string_view to_string(PoolKind k) noexcept;

/// A set of mutually counterfactual terms ("left lung", "right lung").
/// `terms` keeps the spelling from the pool file; `normalized` is the
/// comparison form of each term, index-aligned.
struct PoolGroup {
  std::vector<std::string> terms;
  std::vector<std::string> normalized;
};

/// Curated groups of confusable terms plus involutive opposite maps.
class RejectionPools {
 public:
  using Opposites = std::map<std::string, std::string>;  // normalized -> normalized

  RejectionPools() = default;
  /// Validates and normalizes. Throws Error(Data, ...) with
  /// "group-too-small", "duplicate-term" or "non-involutive-opposites".
  RejectionPools(std::vector<std::vector<std::string>> anatomy,
                 std::vector<std::vector<std::string>> abnormality,
                 std::vector<std::vector<std::string>> severity,
                 Opposites gender, Opposites plane);

  const std::vector<PoolGroup>& groups(PoolKind kind) const;
  const Opposites& gender() const noexcept { return gender_; }
  const Opposites& plane() const noexcept { return plane_; }

  /// Index of the first group holding `normalized_term` exactly.
  std::optional<std::size_t> group_of(PoolKind kind, std::string_view normalized_term) const;

 private:
  std::vector<PoolGroup> anatomy_;
  std::vector<PoolGroup> abnormality_;
  std::vector<PoolGroup> severity_;
  Opposites gender_;
  Opposites plane_;
};

/// Pools shipped with the library; identical to data/pools.json.
const RejectionPools& default_pools();

}  // namespace chexpo
