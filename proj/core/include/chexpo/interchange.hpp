// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "chexpo/embedding.hpp"
#include "chexpo/pools.hpp"
#include "chexpo/types.hpp"

namespace chexpo::io {

namespace fs = std::filesystem;

// Binary embedding layout:
//   "CXEB" | version u8 = 1 | rows u32 LE | dim u32 LE | rows*dim f32 LE
inline constexpr char kEmbeddingMagic[4] = {'C', 'X', 'E', 'B'};
inline constexpr std::uint8_t kEmbeddingVersion = 1;
inline constexpr std::size_t kEmbeddingHeaderBytes = 13;

// ---- samples --------------------------------------------------------------

/// One JSON object per line; blank lines are skipped. Errors:
/// io-error, malformed-json(line), invalid-sample(line, codes),
/// duplicate ids report as invalid-sample(line, ["duplicate-id"]).
SampleSet read_samples(const fs::path& path);
void write_samples(const SampleSet& samples, const fs::path& path);

/// Canonical single-line JSON for one sample (fixed key order).
std::string sample_to_json(const Sample& sample);
/// Parses one JSON object into a record without validating it.
SampleRecord record_from_json(std::string_view line);

// ---- embeddings -----------------------------------------------------------

EmbeddingSet read_embeddings(const fs::path& bin_path, const fs::path& ids_path,
                             Modality modality);
void write_embeddings(const EmbeddingSet& set, const fs::path& bin_path,
                      const fs::path& ids_path);

/// Loads `<dir>/{q,t,v}.bin` with matching `.ids`.
struct EmbeddingBundle {
  EmbeddingSet question;
  EmbeddingSet rationale;
  EmbeddingSet image;
};
EmbeddingBundle read_embedding_dir(const fs::path& dir);
void write_embedding_dir(const EmbeddingBundle& bundle, const fs::path& dir);

// ---- predictions ----------------------------------------------------------

std::vector<PredictionRecord> read_predictions(const fs::path& path);
/// Parses one prediction line; `line_no` is used in error reports.
PredictionRecord parse_prediction(std::string_view line, std::size_t line_no);
std::string prediction_to_json(const PredictionRecord& record);
void write_predictions(const std::vector<PredictionRecord>& records, const fs::path& path);

// ---- preference pairs -----------------------------------------------------

/// Keys in order: sample_id, image_ids, question, chosen, rejected, source, meta.
/// Throws invariant-violation(index) before touching the file.
void write_pairs(const std::vector<PreferencePair>& pairs, const fs::path& path);
std::vector<PreferencePair> read_pairs(const fs::path& path);
std::string pair_to_json(const PreferencePair& pair);

// ---- pools and config -----------------------------------------------------

RejectionPools read_pools(const fs::path& path);
RejectionPools parse_pools(std::string_view json_text);
std::string pools_to_json(const RejectionPools& pools);

/// Unknown keys are a config error. Relative paths resolve against the
/// config file's directory.
PipelineConfig read_config(const fs::path& path);
PipelineConfig parse_config(std::string_view json_text, const fs::path& base_dir = {});
std::string config_to_json(const PipelineConfig& config);

}  // namespace chexpo::io
