// SPDX-License-Identifier: Apache-2.0
#include "chexpo/pools.hpp"

#include <set>

#include "chexpo/error.hpp"
#include "chexpo/text.hpp"

namespace chexpo {

std::string_view to_string(PoolKind k) noexcept {
  switch (k) {
    case PoolKind::Anatomy: return "anatomy";
    case PoolKind::Abnormality: return "abnormality";
    case PoolKind::Severity: return "severity";
  }
  return "?";
}

namespace {

std::vector<PoolGroup> build_groups(PoolKind kind, std::vector<std::vector<std::string>> raw) {
  std::vector<PoolGroup> groups;
  groups.reserve(raw.size());
  for (std::size_t g = 0; g < raw.size(); ++g) {
    const std::string where = std::string(to_string(kind)) + "[" + std::to_string(g) + "]";
    if (raw[g].size() < 2) throw_data("group-too-small", where);
    PoolGroup group;
    std::set<std::string> seen;
    for (auto& term : raw[g]) {
      std::string norm = normalize_text(term);
      if (norm.empty()) throw_data("empty-term", where);
      if (!seen.insert(norm).second) throw_data("duplicate-term", where + ": " + norm);
      group.normalized.push_back(std::move(norm));
      group.terms.push_back(std::move(term));
    }
    groups.push_back(std::move(group));
  }
  return groups;
}

RejectionPools::Opposites build_opposites(const char* name, const RejectionPools::Opposites& raw) {
  RejectionPools::Opposites map;
  for (const auto& [k, v] : raw) map[normalize_text(k)] = normalize_text(v);
  for (const auto& [k, v] : map) {
    const auto back = map.find(v);
    if (k == v || back == map.end() || back->second != k) {
      throw_data("non-involutive-opposites", std::string(name) + ": " + k + " -> " + v);
    }
  }
  return map;
}

}  // namespace

RejectionPools::RejectionPools(std::vector<std::vector<std::string>> anatomy,
                               std::vector<std::vector<std::string>> abnormality,
                               std::vector<std::vector<std::string>> severity,
                               Opposites gender, Opposites plane)
    : anatomy_(build_groups(PoolKind::Anatomy, std::move(anatomy))),
      abnormality_(build_groups(PoolKind::Abnormality, std::move(abnormality))),
      severity_(build_groups(PoolKind::Severity, std::move(severity))),
      gender_(build_opposites("gender", gender)),
      plane_(build_opposites("plane", plane)) {}

const std::vector<PoolGroup>& RejectionPools::groups(PoolKind kind) const {
  switch (kind) {
    case PoolKind::Anatomy: return anatomy_;
    case PoolKind::Abnormality: return abnormality_;
    case PoolKind::Severity: return severity_;
  }
  return anatomy_;
}

std::optional<std::size_t> RejectionPools::group_of(PoolKind kind,
                                                    std::string_view normalized_term) const {
  const auto& gs = groups(kind);
  for (std::size_t g = 0; g < gs.size(); ++g) {
    for (const auto& n : gs[g].normalized) {
      if (n == normalized_term) return g;
    }
  }
  return std::nullopt;
}

}  // namespace chexpo
