// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "chexpo/types.hpp"

namespace chexpo {

/// Source of model predictions for a batch of samples.
class ForwardProvider {
 public:
  virtual ~ForwardProvider() = default;
  virtual std::vector<PredictionRecord> predict(const SampleSet& samples) = 0;
};

/// Serves records from a predictions JSONL keyed by sample id.
class FileBackedProvider final : public ForwardProvider {
 public:
  explicit FileBackedProvider(const std::filesystem::path& path);
  explicit FileBackedProvider(std::vector<PredictionRecord> records);
  std::vector<PredictionRecord> predict(const SampleSet& samples) override;

 private:
  std::unordered_map<std::string, PredictionRecord> records_;
};

/// Spawns `argv` per batch, writes one sample id per line to its stdin and
/// reads prediction JSONL from its stdout. Aborts after `timeout` without
/// any output.
class ExternalCommandProvider final : public ForwardProvider {
 public:
  explicit ExternalCommandProvider(std::vector<std::string> argv,
                                   std::chrono::seconds timeout = std::chrono::minutes(10));
  std::vector<PredictionRecord> predict(const SampleSet& samples) override;

 private:
  std::vector<std::string> argv_;
  std::chrono::seconds timeout_;
};

/// Calls the provider and enforces exactly one record per requested sample,
/// returned in request order. Throws Error(Provider, ...) with
/// "provider-extra-record", "provider-duplicate-record" or
/// "provider-missing-record".
std::vector<PredictionRecord> checked_predict(ForwardProvider& provider, const SampleSet& samples);

/// "file:<path>" or "cmd:<argv>" (argv split with shell quoting rules).
std::unique_ptr<ForwardProvider> make_provider(std::string_view spec);

}  // namespace chexpo
