// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace chexpo {

enum class Modality { Question, Rationale, Image };
std::string_view to_string(Modality m) noexcept;
/// File stem used inside an embeddings directory: "q", "t" or "v".
std::string_view file_stem(Modality m) noexcept;

/// Id-indexed dense float32 matrix for one modality. Immutable once built;
/// row L2 norms are computed at construction.
class EmbeddingSet {
 public:
  EmbeddingSet() = default;

  /// Throws Error(Data, ...) with "count-mismatch", "duplicate-id",
  /// "zero-dim" or "zero-vector-row".
  EmbeddingSet(std::vector<std::string> ids, std::size_t dim, std::vector<float> data,
               Modality modality);

  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  std::size_t dim() const noexcept { return dim_; }
  Modality modality() const noexcept { return modality_; }

  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const std::string& id(std::size_t row) const { return ids_[row]; }
  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  double norm(std::size_t i) const { return norms_[i]; }
  std::span<const float> data() const noexcept { return data_; }

  std::optional<std::size_t> find(std::string_view id) const;

 private:
  std::vector<std::string> ids_;
  std::size_t dim_ = 0;
  std::vector<float> data_;
  std::vector<double> norms_;
  Modality modality_ = Modality::Question;
  std::unordered_map<std::string, std::size_t> index_;
};

/// L2 norm accumulated in double with compensation.
double l2_norm(std::span<const float> v);

}  // namespace chexpo
