// SPDX-License-Identifier: Apache-2.0
#include "chexpo/provider.hpp"

#include <sstream>
#include <unordered_set>

#include "chexpo/error.hpp"
#include "chexpo/interchange.hpp"
#include "subprocess.hpp"

namespace chexpo {

FileBackedProvider::FileBackedProvider(const std::filesystem::path& path)
    : FileBackedProvider(io::read_predictions(path)) {}

FileBackedProvider::FileBackedProvider(std::vector<PredictionRecord> records) {
  for (auto& r : records) {
    const std::string id = r.sample_id;
    if (!records_.emplace(id, std::move(r)).second) {
      throw_data("duplicate-prediction", id);
    }
  }
}

std::vector<PredictionRecord> FileBackedProvider::predict(const SampleSet& samples) {
  std::vector<PredictionRecord> out;
  out.reserve(samples.size());
  for (const auto& s : samples) {
    const auto it = records_.find(s.id);
    if (it == records_.end()) throw_provider("provider-missing-record", s.id);
    out.push_back(it->second);
  }
  return out;
}

ExternalCommandProvider::ExternalCommandProvider(std::vector<std::string> argv,
                                                 std::chrono::seconds timeout)
    : argv_(std::move(argv)), timeout_(timeout) {
  if (argv_.empty()) throw_config("invalid-provider", "empty command");
}

std::vector<PredictionRecord> ExternalCommandProvider::predict(const SampleSet& samples) {
  std::string input;
  for (const auto& s : samples) input += s.id + "\n";

  detail::Subprocess child(argv_);
  const std::string output = child.communicate(input, timeout_);
  const int status = child.wait();
  if (status != 0) {
    throw_provider("provider-exit-status", argv_.front() + " exited with " + std::to_string(status));
  }

  std::vector<PredictionRecord> out;
  std::istringstream lines(output);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(io::parse_prediction(line, line_no));
    } catch (const Error& e) {
      throw_provider("provider-malformed-record", e.what());
    }
  }
  return out;
}

std::vector<PredictionRecord> checked_predict(ForwardProvider& provider, const SampleSet& samples) {
  if (samples.empty()) return {};
  auto records = provider.predict(samples);

  std::vector<std::optional<PredictionRecord>> slots(samples.size());
  for (auto& r : records) {
    const auto i = samples.index_of(r.sample_id);
    if (!i) throw_provider("provider-extra-record", r.sample_id);
    if (slots[*i]) throw_provider("provider-duplicate-record", r.sample_id);
    slots[*i] = std::move(r);
  }
  std::vector<PredictionRecord> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i]) throw_provider("provider-missing-record", samples[i].id);
    out.push_back(std::move(*slots[i]));
  }
  return out;
}

std::unique_ptr<ForwardProvider> make_provider(std::string_view spec) {
  if (spec.starts_with("file:")) {
    return std::make_unique<FileBackedProvider>(std::filesystem::path(std::string(spec.substr(5))));
  }
  if (spec.starts_with("cmd:")) {
    return std::make_unique<ExternalCommandProvider>(detail::split_command(spec.substr(4)));
  }
  throw_config("invalid-provider", "expected file:<path> or cmd:<argv>, got '" + std::string(spec) + "'");
}

}  // namespace chexpo
