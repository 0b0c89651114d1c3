// SPDX-License-Identifier: Apache-2.0
#include "chexpo/types.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "chexpo/error.hpp"
#include "chexpo/text.hpp"

namespace chexpo {

namespace {

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

}  // namespace

std::string_view to_string(QuestionType q) noexcept {
  switch (q) {
    case QuestionType::Presence: return "Presence";
    case QuestionType::Abnormality: return "Abnormality";
    case QuestionType::Anatomy: return "Anatomy";
    case QuestionType::Severity: return "Severity";
    case QuestionType::Plane: return "Plane";
    case QuestionType::Type: return "Type";
    case QuestionType::Difference: return "Difference";
    case QuestionType::Attribute: return "Attribute";
    case QuestionType::Size: return "Size";
    case QuestionType::Gender: return "Gender";
  }
  return "?";
}

std::string_view to_string(AnswerType a) noexcept {
  return a == AnswerType::Open ? "open" : "closed";
}

std::string_view to_string(Split s) noexcept {
  switch (s) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "?";
}

std::optional<QuestionType> parse_question_type(std::string_view name) {
  for (QuestionType q : kQuestionTypes) {
    if (iequals(name, to_string(q))) return q;
  }
  return std::nullopt;
}

std::string_view canonical_question_label(std::string_view name) {
  if (iequals(name, "view")) return "Plane";
  if (iequals(name, "location")) return "Anatomy";
  if (iequals(name, "level")) return "Severity";
  return name;
}

std::optional<AnswerType> parse_answer_type(std::string_view name) {
  if (iequals(name, "open")) return AnswerType::Open;
  if (iequals(name, "closed")) return AnswerType::Closed;
  return std::nullopt;
}

std::optional<Split> parse_split(std::string_view name) {
  if (iequals(name, "train")) return Split::Train;
  if (iequals(name, "valid")) return Split::Valid;
  if (iequals(name, "test")) return Split::Test;
  return std::nullopt;
}

std::vector<std::string> validate_sample(const SampleRecord& r) {
  std::vector<std::string> v;
  if (blank(r.id)) v.emplace_back("empty-id");
  if (r.image_ids.empty()) v.emplace_back("no-image-ids");
  if (std::any_of(r.image_ids.begin(), r.image_ids.end(),
                  [](const std::string& s) { return blank(s); })) {
    v.emplace_back("empty-image-id");
  }
  if (blank(r.question)) v.emplace_back("empty-question");
  if (r.answer.empty()) v.emplace_back("empty-answer");
  if (std::any_of(r.answer.begin(), r.answer.end(),
                  [](const std::string& s) { return blank(s); })) {
    v.emplace_back("empty-answer-element");
  }
  if (!parse_question_type(r.question_type)) v.emplace_back("unknown-question-type");
  const auto answer_type = parse_answer_type(r.answer_type);
  if (!answer_type) {
    v.emplace_back("unknown-answer-type");
  } else if (*answer_type == AnswerType::Closed && !r.answer.empty()) {
    const bool yes_no = r.answer.size() == 1 && [&] {
      const std::string a = normalize_text(r.answer.front());
      return a == "yes" || a == "no";
    }();
    if (!yes_no) v.emplace_back("closed-answer-not-yes-no");
  }
  if (!parse_split(r.split)) v.emplace_back("unknown-split");
  return v;
}

std::string Sample::answer_text() const { return join(answer, " and "); }

std::string Sample::rationale() const { return compose_response(answer_text(), explanation); }

Sample make_sample(const SampleRecord& r) {
  const auto violations = validate_sample(r);
  if (!violations.empty()) throw_data("invalid-sample", join(violations, ","));
  Sample s;
  s.id = r.id;
  s.image_ids = r.image_ids;
  s.question = r.question;
  s.answer = r.answer;
  s.explanation = r.explanation;
  s.question_type = *parse_question_type(r.question_type);
  s.answer_type = *parse_answer_type(r.answer_type);
  s.split = *parse_split(r.split);
  return s;
}

SampleRecord to_record(const Sample& s) {
  return SampleRecord{s.id,
                      s.image_ids,
                      s.question,
                      s.answer,
                      s.explanation,
                      std::string(to_string(s.question_type)),
                      std::string(to_string(s.answer_type)),
                      std::string(to_string(s.split))};
}

SampleSet::SampleSet(std::vector<Sample> samples) {
  samples_.reserve(samples.size());
  for (auto& s : samples) add(std::move(s));
}

void SampleSet::add(Sample sample) {
  if (index_.count(sample.id)) throw_data("duplicate-id", sample.id);
  index_.emplace(sample.id, samples_.size());
  samples_.push_back(std::move(sample));
}

const Sample* SampleSet::find(std::string_view id) const {
  const auto i = index_of(id);
  return i ? &samples_[*i] : nullptr;
}

std::optional<std::size_t> SampleSet::index_of(std::string_view id) const {
  const auto it = index_.find(std::string(id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

SampleSet SampleSet::subset(const std::vector<std::size_t>& indices) const {
  SampleSet out;
  out.samples_.reserve(indices.size());
  for (std::size_t i : indices) out.add(samples_.at(i));
  return out;
}

SampleSet SampleSet::filter(Split split) const {
  SampleSet out;
  for (const auto& s : samples_) {
    if (s.split == split) out.add(s);
  }
  return out;
}

std::string PredictionRecord::response() const {
  return compose_response(predicted_answer, explanation);
}

std::string_view to_string(PairSource s) noexcept {
  return s == PairSource::SftFail ? "sft_fail" : "counterfactual";
}

std::optional<PairSource> parse_pair_source(std::string_view name) {
  if (name == "sft_fail") return PairSource::SftFail;
  if (name == "counterfactual") return PairSource::Counterfactual;
  return std::nullopt;
}

std::vector<std::string> validate_pair(const PreferencePair& p) {
  std::vector<std::string> v;
  if (blank(p.sample_id)) v.emplace_back("empty-sample-id");
  if (blank(p.chosen)) v.emplace_back("empty-chosen");
  if (blank(p.rejected)) v.emplace_back("empty-rejected");
  if (normalize_text(p.chosen) == normalize_text(p.rejected)) {
    v.emplace_back("chosen-equals-rejected");
  }
  if (p.source == PairSource::Counterfactual && !p.meta.retrieved_id) {
    v.emplace_back("missing-retrieved-id");
  }
  return v;
}

std::string_view to_string(LossType t) noexcept {
  switch (t) {
    case LossType::Sigmoid: return "sigmoid";
    case LossType::Ipo: return "ipo";
    case LossType::Hinge: return "hinge";
    case LossType::Robust: return "robust";
  }
  return "?";
}

std::optional<LossType> parse_loss_type(std::string_view name) {
  for (LossType t : {LossType::Sigmoid, LossType::Ipo, LossType::Hinge, LossType::Robust}) {
    if (iequals(name, to_string(t))) return t;
  }
  return std::nullopt;
}

std::string_view to_string(PresencePolicy p) noexcept {
  return p == PresencePolicy::Auto ? "auto" : "pool";
}

std::optional<PresencePolicy> parse_presence_policy(std::string_view name) {
  if (iequals(name, "auto")) return PresencePolicy::Auto;
  if (iequals(name, "pool")) return PresencePolicy::Pool;
  return std::nullopt;
}

void PipelineConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw_config("invalid-gamma", "gamma must lie in (0, 1], got " + std::to_string(gamma));
  }
  if (!std::isfinite(sigma) || sigma >= 0.0) {
    throw_config("invalid-sigma", "sigma must be a negative log-probability");
  }
  if (top_k < 1) throw_config("invalid-k", "top_k must be at least 1");
  if (!std::isfinite(beta) || beta <= 0.0) throw_config("invalid-beta", "beta must be positive");
  if (!(robust_epsilon >= 0.0 && robust_epsilon < 0.5)) {
    throw_config("invalid-epsilon", "robust_epsilon must lie in [0, 0.5)");
  }
  if (!modalities.any()) throw_config("invalid-modalities", "at least one modality required");
  if (cell_budget < 1) throw_config("invalid-cell-budget");
}

std::vector<std::string> PipelineConfig::warnings() const {
  std::vector<std::string> w;
  if (gamma > 0.05) {
    w.push_back("gamma " + std::to_string(gamma) +
                " exceeds the 5% sampling guidance; continuing");
  }
  return w;
}

}  // namespace chexpo
