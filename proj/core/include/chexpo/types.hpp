// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace chexpo {

// ---------------------------------------------------------------------------
// Enumerations
// ---------------------------------------------------------------------------

/// The ten clinical question categories. Declaration order is the stratum
/// ordering used by the sampler and the column order of evaluation tables.
enum class QuestionType {
  Presence,
  Abnormality,
  Anatomy,
  Severity,
  Plane,
  Type,
  Difference,
  Attribute,
  Size,
  Gender,
};

inline constexpr std::array<QuestionType, 10> kQuestionTypes = {
    QuestionType::Presence, QuestionType::Abnormality, QuestionType::Anatomy,
    QuestionType::Severity, QuestionType::Plane,       QuestionType::Type,
    QuestionType::Difference, QuestionType::Attribute, QuestionType::Size,
    QuestionType::Gender,
};

enum class AnswerType { Open, Closed };
enum class Split { Train, Valid, Test };

/// Display name ("Presence", ...).
std::string_view to_string(QuestionType q) noexcept;
/// Serialized name ("open" / "closed").
std::string_view to_string(AnswerType a) noexcept;
std::string_view to_string(Split s) noexcept;

/// Accepts exactly the ten canonical names, case-insensitively.
std::optional<QuestionType> parse_question_type(std::string_view name);
/// Maps dataset-native labels onto the merged categories
/// (View -> Plane, Location -> Anatomy, Level -> Severity); other names
/// pass through unchanged.
std::string_view canonical_question_label(std::string_view name);
std::optional<AnswerType> parse_answer_type(std::string_view name);
std::optional<Split> parse_split(std::string_view name);

// ---------------------------------------------------------------------------
// Samples
// ---------------------------------------------------------------------------

/// One dataset record with enumerations still in string form, as read
/// from disk. `validate_sample` reports every violated invariant.
struct SampleRecord {
  std::string id;
  std::vector<std::string> image_ids;
  std::string question;
  std::vector<std::string> answer;
  std::string explanation;
  std::string question_type;
  std::string answer_type;
  std::string split;
};

/// Violation codes, in a fixed check order. Empty iff the record is valid.
std::vector<std::string> validate_sample(const SampleRecord& record);

struct Sample {
  std::string id;
  std::vector<std::string> image_ids;
  std::string question;
  std::vector<std::string> answer;
  std::string explanation;
  QuestionType question_type = QuestionType::Presence;
  AnswerType answer_type = AnswerType::Open;
  Split split = Split::Train;

  /// Multi-valued answers joined with " and ".
  std::string answer_text() const;
  /// The gold rationale: short answer then explanation.
  std::string rationale() const;
};

/// Throws Error(Data, "invalid-sample") listing the violation codes.
Sample make_sample(const SampleRecord& record);
SampleRecord to_record(const Sample& sample);

/// Ordered sample collection with unique ids.
class SampleSet {
 public:
  SampleSet() = default;
  /// Throws Error(Data, "duplicate-id") on a repeated id.
  explicit SampleSet(std::vector<Sample> samples);

  /// Throws Error(Data, "duplicate-id") on a repeated id.
  void add(Sample sample);

  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  const Sample* find(std::string_view id) const;
  std::optional<std::size_t> index_of(std::string_view id) const;
  bool contains(std::string_view id) const { return index_of(id).has_value(); }

  auto begin() const noexcept { return samples_.begin(); }
  auto end() const noexcept { return samples_.end(); }
  const std::vector<Sample>& samples() const noexcept { return samples_; }

  /// Subset in the given index order.
  SampleSet subset(const std::vector<std::size_t>& indices) const;
  /// Samples of one split, in order.
  SampleSet filter(Split split) const;

 private:
  std::vector<Sample> samples_;
  std::unordered_map<std::string, std::size_t> index_;
};

// ---------------------------------------------------------------------------
// Predictions and pairs
// ---------------------------------------------------------------------------

/// One model response for a sample: its short answer, its explanation and
/// the log-probabilities of the short-answer tokens only.
struct PredictionRecord {
  std::string sample_id;
  std::string predicted_answer;
  std::string explanation;
  std::vector<double> answer_token_logprobs;
  std::string model_id;

  std::string response() const;
};

enum class PairSource { SftFail, Counterfactual };
std::string_view to_string(PairSource s) noexcept;
std::optional<PairSource> parse_pair_source(std::string_view name);

/// Provenance attached to each emitted pair. Absent fields are omitted on disk.
struct PairMeta {
  int stage = 0;  ///< pipeline stage that triaged the sample (3 or 6)
  std::optional<std::string> seed_id;      ///< hard query that retrieved this sample
  std::optional<double> seed_score;        ///< combined similarity to that query
  std::optional<double> logprob;           ///< length-normalized answer log-prob
  std::optional<std::string> strategy;     ///< substitution strategy name
  std::optional<std::string> substituted_answer;
  std::optional<std::string> retrieved_id;  ///< source of the counterfactual rationale
  std::optional<double> retrieval_score;

  bool operator==(const PairMeta&) const = default;
};

struct PreferencePair {
  std::string sample_id;
  std::vector<std::string> image_ids;
  std::string question;
  std::string chosen;
  std::string rejected;
  PairSource source = PairSource::SftFail;
  PairMeta meta;

  bool operator==(const PreferencePair&) const = default;
};

/// Invariant codes violated by a pair (empty iff valid).
std::vector<std::string> validate_pair(const PreferencePair& pair);

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

enum class LossType { Sigmoid, Ipo, Hinge, Robust };
std::string_view to_string(LossType t) noexcept;
std::optional<LossType> parse_loss_type(std::string_view name);

/// How closed and Presence answers are corrupted.
enum class PresencePolicy {
  Auto,      ///< closed answers flip yes/no; open Presence uses the abnormality pool
  Pool,      ///< always follow the per-type table
};
std::string_view to_string(PresencePolicy p) noexcept;
std::optional<PresencePolicy> parse_presence_policy(std::string_view name);

/// Bit set over the three retrieval modalities.
struct ModalityMask {
  bool question = true;
  bool rationale = true;
  bool image = true;

  bool any() const noexcept { return question || rationale || image; }
  bool operator==(const ModalityMask&) const = default;
};

struct PipelineConfig {
  double gamma = 0.027;
  double sigma = -0.3;
  std::size_t top_k = 10;
  double beta = 0.1;
  LossType loss_type = LossType::Sigmoid;
  double robust_epsilon = 0.1;
  std::uint64_t seed = 0;

  std::string samples_path;
  std::string embeddings_dir;  ///< holds q/t/v .bin + .ids
  std::string predictions_path;
  std::string pools_path;      ///< empty: built-in pools
  std::string out_dir = "out";

  ModalityMask modalities;
  PresencePolicy presence_policy = PresencePolicy::Auto;
  std::string embedder = "hash";     ///< "hash" or "cmd:<argv>"
  std::uint64_t embedder_seed = 0;
  std::size_t cell_budget = std::size_t{1} << 24;
  std::size_t workers = 0;           ///< 0: hardware concurrency

  /// Throws Error(Config, ...) for out-of-domain values.
  void validate() const;
  /// Soft findings (e.g. gamma above the 5% guidance).
  std::vector<std::string> warnings() const;
};

}  // namespace chexpo
