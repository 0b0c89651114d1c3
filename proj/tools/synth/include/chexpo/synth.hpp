// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "chexpo/interchange.hpp"
#include "chexpo/types.hpp"

namespace chexpo::synth {

struct Options {
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
  std::size_t dim = 64;
  std::uint64_t embedder_seed = 0;
  double valid_fraction = 0.0;
  double test_fraction = 0.0;
  double low_conf_rate = 0.12;  ///< share of correct predictions scored below -0.3
  double image_noise = 0.6;
};

/// A chest-X-ray-shaped VQA set with scripted model output. Failures are
/// concentrated in Abnormality, Anatomy and Severity questions.
struct Dataset {
  SampleSet samples;
  io::EmbeddingBundle embeddings;
  std::vector<PredictionRecord> predictions;
};

Dataset generate(const Options& options);

/// Writes samples.jsonl, predictions.jsonl, embeddings/ and a config.json
/// pointing at them.
void write_dataset(const Dataset& data, const std::filesystem::path& dir, const Options& options,
                   const PipelineConfig& config_template = {});

/// Per-type probability that the scripted model answers wrong.
double failure_rate(QuestionType q) noexcept;

}  // namespace chexpo::synth
