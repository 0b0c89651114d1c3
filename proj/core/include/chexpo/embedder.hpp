// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace chexpo {

/// Maps free text to a vector in the rationale embedding space.
class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<float> embed(std::string_view text) = 0;
};

/// Deterministic bag-of-tokens projection. Each whitespace token of the
/// normalized text contributes a +/-1 pattern drawn from
/// splitmix64(fnv1a64(token) ^ seed) streams; coordinates are integer sums.
/// An all-zero result is replaced by a unit vector at fnv1a64(text) % dim.
class HashProjectionEmbedder final : public TextEmbedder {
 public:
  explicit HashProjectionEmbedder(std::size_t dim, std::uint64_t seed = 0);
  std::size_t dim() const override { return dim_; }
  std::vector<float> embed(std::string_view text) override;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

/// Talks to a long-running child process: one {"text": ...} JSON line in,
/// one {"vector": [...]} JSON line out.
class CommandEmbedder final : public TextEmbedder {
 public:
  CommandEmbedder(std::vector<std::string> argv, std::size_t dim,
                  std::chrono::seconds timeout = std::chrono::minutes(10));
  ~CommandEmbedder() override;
  CommandEmbedder(const CommandEmbedder&) = delete;
  CommandEmbedder& operator=(const CommandEmbedder&) = delete;

  std::size_t dim() const override { return dim_; }
  std::vector<float> embed(std::string_view text) override;

 private:
  struct Process;
  std::unique_ptr<Process> process_;
  std::size_t dim_;
  std::chrono::seconds timeout_;
};

/// "hash" -> HashProjectionEmbedder(dim, seed); "cmd:<argv>" -> CommandEmbedder.
std::unique_ptr<TextEmbedder> make_embedder(std::string_view spec, std::size_t dim,
                                            std::uint64_t seed);

}  // namespace chexpo
