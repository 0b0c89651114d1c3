// SPDX-License-Identifier: Apache-2.0
#include "chexpo/embedding.hpp"

#include "chexpo/error.hpp"
#include "chexpo/numeric.hpp"

namespace chexpo {

std::string_view to_string(Modality m) noexcept {
  switch (m) {
    case Modality::Question: return "question";
    case Modality::Rationale: return "rationale";
    case Modality::Image: return "image";
  }
  return "?";
}

std::string_view file_stem(Modality m) noexcept {
  switch (m) {
    case Modality::Question: return "q";
    case Modality::Rationale: return "t";
    case Modality::Image: return "v";
  }
  return "?";
}

double l2_norm(std::span<const float> v) {
  CompensatedSum s;
  for (float x : v) s += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(s.value());
}

EmbeddingSet::EmbeddingSet(std::vector<std::string> ids, std::size_t dim,
                           std::vector<float> data, Modality modality)
    : ids_(std::move(ids)), dim_(dim), data_(std::move(data)), modality_(modality) {
  if (dim_ == 0) throw_data("zero-dim");
  if (data_.size() != ids_.size() * dim_) {
    throw_data("count-mismatch", std::to_string(ids_.size()) + " ids for " +
                                     std::to_string(data_.size()) + " values at dim " +
                                     std::to_string(dim_));
  }
  index_.reserve(ids_.size());
  norms_.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    if (!index_.emplace(ids_[i], i).second) throw_data("duplicate-id", ids_[i]);
    const double n = l2_norm(row(i));
    if (n == 0.0) throw_data("zero-vector-row", "row " + std::to_string(i) + " (" + ids_[i] + ")");
    norms_.push_back(n);
  }
}

std::optional<std::size_t> EmbeddingSet::find(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

}  // namespace chexpo
