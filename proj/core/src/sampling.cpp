// SPDX-License-Identifier: Apache-2.0
#include "chexpo/sampling.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <map>
#include <numeric>

#include <spdlog/spdlog.h>

#include "chexpo/error.hpp"
#include "chexpo/numeric.hpp"
#include "chexpo/rng.hpp"

namespace chexpo {

std::vector<Stratum> stratify(const SampleSet& samples) {
  std::map<StratumKey, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    groups[{samples[i].question_type, samples[i].answer_type}].push_back(i);
  }
  std::vector<Stratum> out;
  out.reserve(groups.size());
  for (auto& [key, members] : groups) out.push_back({key, std::move(members)});
  return out;
}

std::vector<std::size_t> apportion(const std::vector<std::size_t>& sizes, double gamma) {
  const std::size_t n = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  const auto total = static_cast<std::size_t>(std::llround(gamma * static_cast<double>(n)));

  std::vector<std::size_t> quota(sizes.size());
  std::vector<double> remainder(sizes.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const double exact = gamma * static_cast<double>(sizes[i]);
    quota[i] = std::min(static_cast<std::size_t>(std::floor(exact)), sizes[i]);
    remainder[i] = exact - std::floor(exact);
    assigned += quota[i];
  }

  std::vector<std::size_t> order(sizes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });

  std::size_t seats = total > assigned ? total - assigned : 0;
  for (std::size_t k = 0; seats > 0 && k < order.size(); ++k) {
    const std::size_t i = order[k];
    if (quota[i] < sizes[i]) {
      ++quota[i];
      --seats;
    }
  }
  assert(seats == 0 && "quota-exceeds-stratum");
  return quota;
}

SampleSelection stratified_selection(const SampleSet& samples, double gamma, std::uint64_t seed) {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw_config("invalid-gamma", "gamma must lie in (0, 1]");
  }
  auto strata = stratify(samples);
  std::vector<std::size_t> sizes;
  sizes.reserve(strata.size());
  for (const auto& s : strata) sizes.push_back(s.members.size());
  const auto quotas = apportion(sizes, gamma);

  SampleSelection sel;
  for (std::size_t i = 0; i < strata.size(); ++i) {
    auto& members = strata[i].members;
    if (quotas[i] > members.size()) throw_data("quota-exceeds-stratum");
    if (quotas[i] == 0) {
      sel.unsampled.push_back(strata[i].key);
      continue;
    }
    const std::string tag = std::string(to_string(strata[i].key.question_type)) + "/" +
                            std::string(to_string(strata[i].key.answer_type));
    Rng rng(derive_seed(seed, tag));
    rng.partial_shuffle(std::span<std::size_t>(members), quotas[i]);
    sel.indices.insert(sel.indices.end(), members.begin(), members.begin() + quotas[i]);
  }
  std::sort(sel.indices.begin(), sel.indices.end());
  return sel;
}

SampleSet stratified_sample(const SampleSet& samples, double gamma, std::uint64_t seed) {
  auto sel = stratified_selection(samples, gamma, seed);
  for (const auto& key : sel.unsampled) {
    spdlog::warn("stratum {}/{} received no samples at gamma={}", to_string(key.question_type),
                 to_string(key.answer_type), gamma);
  }
  return samples.subset(sel.indices);
}

}  // namespace chexpo
