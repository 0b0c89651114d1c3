// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "chexpo/confidence.hpp"
#include "chexpo/embedder.hpp"
#include "chexpo/interchange.hpp"
#include "chexpo/pools.hpp"
#include "chexpo/provider.hpp"
#include "chexpo/types.hpp"

namespace chexpo {

struct PipelineReport {
  std::size_t train_samples = 0;
  std::size_t sampled = 0;
  std::size_t forwards_initial = 0;
  std::size_t fails = 0;
  std::size_t low_conf = 0;
  std::size_t confident = 0;
  std::size_t hard_seeds = 0;
  std::size_t neighbors_retrieved = 0;  ///< before cross-query dedupe
  std::size_t neighbors_unique = 0;     ///< forwarded in the second wave
  std::size_t neighbor_fails = 0;
  std::size_t neighbor_low_conf = 0;
  std::size_t neighbor_confident = 0;
  std::size_t pairs_sft_fail = 0;
  std::size_t pairs_counterfactual = 0;
  std::size_t pairs_total = 0;
  std::size_t skipped = 0;       ///< hard samples that produced no pair
  std::size_t deduplicated = 0;  ///< pairs dropped by dedupe_pairs
  std::size_t rest_final = 0;    ///< rest-set size used for counterfactual lookup
  std::map<std::string, double> stage_ms;

  std::string to_json() const;
};

/// In-memory inputs for one run.
struct PipelineInputs {
  const SampleSet* samples = nullptr;  ///< whole dataset; only the train split is mined
  const io::EmbeddingBundle* embeddings = nullptr;
  const RejectionPools* pools = nullptr;
};

struct PipelineResult {
  PipelineReport report;
  std::vector<PreferencePair> pairs;
};

/// Sample, forward, triage, mine neighbors, forward them, triage again,
/// build pairs. Pure with respect to the filesystem.
PipelineResult run_pipeline(const PipelineConfig& config, const PipelineInputs& inputs,
                            ForwardProvider& provider, TextEmbedder& embedder);

/// Loads every configured input, runs, then writes `<out_dir>/pairs.jsonl`
/// and `<out_dir>/report.json`. A failing run leaves no pairs file.
PipelineResult run_pipeline(const PipelineConfig& config, ForwardProvider& provider);

/// At most one pair per sample id: pairs are ordered by (stage, sample id)
/// and the first occurrence is kept.
std::vector<PreferencePair> dedupe_pairs(std::vector<PreferencePair> pairs);

}  // namespace chexpo
