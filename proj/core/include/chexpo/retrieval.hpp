// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "chexpo/embedding.hpp"
#include "chexpo/types.hpp"

namespace chexpo {

/// Cosine similarity, clamped to [-1, 1]. Dot products and norms are
/// accumulated in double with compensation.
/// Throws Error(Data, "dim-mismatch") or Error(Data, "zero-vector").
double cosine(std::span<const float> a, std::span<const float> b);

/// Cosine with precomputed norms; same arithmetic as cosine().
double cosine_normed(std::span<const float> a, double norm_a, std::span<const float> b,
                     double norm_b);

/// The three vectors of one sample.
struct EmbeddingTriple {
  std::span<const float> question;
  std::span<const float> rationale;
  std::span<const float> image;
};

/// Unweighted sum of per-modality cosines over the enabled modalities.
double combined_similarity(const EmbeddingTriple& a, const EmbeddingTriple& b,
                           ModalityMask mask = {});

/// Joins the three embedding sets by sample id.
class TripleIndex {
 public:
  TripleIndex(const EmbeddingSet& question, const EmbeddingSet& rationale,
              const EmbeddingSet& image);

  /// Row of `id` in each modality. Throws Error(Data, "missing-embedding").
  struct Rows {
    std::size_t question, rationale, image;
  };
  Rows rows(std::string_view id) const;
  EmbeddingTriple triple(std::string_view id) const;

  /// Combined similarity between two ids using cached norms.
  double similarity(const Rows& a, const Rows& b, ModalityMask mask) const;

  const EmbeddingSet& question() const noexcept { return *question_; }
  const EmbeddingSet& rationale() const noexcept { return *rationale_; }
  const EmbeddingSet& image() const noexcept { return *image_; }

 private:
  const EmbeddingSet* question_;
  const EmbeddingSet* rationale_;
  const EmbeddingSet* image_;
};

struct Neighbor {
  std::string id;
  double score;
  bool operator==(const Neighbor&) const = default;
};

/// Ranked neighbors of one query: score descending, then id ascending.
struct NeighborSet {
  std::string query_id;
  std::vector<Neighbor> neighbors;
  bool operator==(const NeighborSet&) const = default;
};

struct TopKOptions {
  ModalityMask mask;
  /// Upper bound on query x gallery cells scored per block.
  std::size_t cell_budget = std::size_t{1} << 24;
  /// When nonzero, overrides the budget and splits the gallery into
  /// this many contiguous blocks.
  std::size_t block_count = 0;
  std::size_t workers = 1;
};

/// Top-K gallery entries per hard query by combined similarity. The gallery
/// is streamed in blocks with a bounded heap per query; results do not
/// depend on block count or worker count.
/// Throws Error(Data, ...) "invalid-k", "empty-gallery", "overlap".
std::vector<NeighborSet> topk_neighbors(const TripleIndex& index,
                                        const std::vector<std::string>& hard_ids,
                                        const std::vector<std::string>& rest_ids,
                                        std::size_t k, const TopKOptions& options = {});

struct TopMatch {
  std::string id;
  std::size_t row;
  double score;
};

/// Best-scoring gallery row by cosine, ties to the smaller id.
/// Throws Error(Data, "empty-after-exclusion").
TopMatch top1_by_text(std::span<const float> query, const EmbeddingSet& gallery,
                      const std::unordered_set<std::string>& exclude);

/// Restricted to the given candidate rows.
TopMatch top1_by_text(std::span<const float> query, const EmbeddingSet& gallery,
                      std::span<const std::size_t> candidate_rows,
                      std::string_view exclude_id = {});

/// JSONL: {"query_id": ..., "neighbors": [[id, score], ...]}
void write_neighbors(const std::vector<NeighborSet>& sets, const std::filesystem::path& path);
std::vector<NeighborSet> read_neighbors(const std::filesystem::path& path);

}  // namespace chexpo
