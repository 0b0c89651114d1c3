// SPDX-License-Identifier: Apache-2.0
#include "chexpo/embedder.hpp"

#include <nlohmann/json.hpp>

#include "chexpo/error.hpp"
#include "chexpo/numeric.hpp"
#include "chexpo/text.hpp"
#include "subprocess.hpp"

namespace chexpo {

HashProjectionEmbedder::HashProjectionEmbedder(std::size_t dim, std::uint64_t seed)
    : dim_(dim), seed_(seed) {
  if (dim_ == 0) throw_config("zero-dim", "embedder dimension must be positive");
}

std::vector<float> HashProjectionEmbedder::embed(std::string_view text) {
  const std::string norm = normalize_text(text);
  std::vector<std::int64_t> acc(dim_, 0);
  for (const auto& token : split_whitespace(norm)) {
    std::uint64_t state = fnv1a64(token) ^ seed_;
    for (std::size_t j = 0; j < dim_; j += 64) {
      state = splitmix64(state);
      const std::size_t width = std::min<std::size_t>(64, dim_ - j);
      for (std::size_t b = 0; b < width; ++b) {
        acc[j + b] += ((state >> b) & 1U) ? 1 : -1;
      }
    }
  }
  std::vector<float> out(dim_);
  bool all_zero = true;
  for (std::size_t j = 0; j < dim_; ++j) {
    out[j] = static_cast<float>(acc[j]);
    all_zero = all_zero && acc[j] == 0;
  }
  if (all_zero) out[fnv1a64(norm) % dim_] = 1.0f;
  return out;
}

struct CommandEmbedder::Process {
  explicit Process(const std::vector<std::string>& argv) : child(argv) {}
  detail::Subprocess child;
};

CommandEmbedder::CommandEmbedder(std::vector<std::string> argv, std::size_t dim,
                                 std::chrono::seconds timeout)
    : process_(std::make_unique<Process>(argv)), dim_(dim), timeout_(timeout) {}

CommandEmbedder::~CommandEmbedder() = default;

std::vector<float> CommandEmbedder::embed(std::string_view text) {
  nlohmann::json request{{"text", std::string(text)}};
  try {
    process_->child.write_all(request.dump() + "\n", timeout_);
  } catch (const Error& e) {
    if (e.code() == "provider-closed") throw_provider("embedder-closed", "embedder exited early");
    throw;
  }
  const auto line = process_->child.read_line(timeout_);
  if (!line) throw_provider("embedder-closed", "embedder exited early");
  std::vector<float> v;
  try {
    v = nlohmann::json::parse(*line).at("vector").get<std::vector<float>>();
  } catch (const nlohmann::json::exception& e) {
    throw_provider("embedder-contract", e.what());
  }
  if (v.size() != dim_) {
    throw_provider("embedder-contract", "expected dim " + std::to_string(dim_) + ", got " +
                                            std::to_string(v.size()));
  }
  return v;
}

std::unique_ptr<TextEmbedder> make_embedder(std::string_view spec, std::size_t dim,
                                            std::uint64_t seed) {
  if (spec == "hash") return std::make_unique<HashProjectionEmbedder>(dim, seed);
  if (spec.starts_with("cmd:")) {
    auto argv = detail::split_command(spec.substr(4));
    if (argv.empty()) throw_config("invalid-embedder", "empty command");
    return std::make_unique<CommandEmbedder>(std::move(argv), dim);
  }
  throw_config("invalid-embedder", std::string(spec));
}

}  // namespace chexpo
