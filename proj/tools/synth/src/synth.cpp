// SPDX-License-Identifier: Apache-2.0
#include "chexpo/synth.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <string_view>

#include "chexpo/embedder.hpp"
#include "chexpo/error.hpp"
#include "chexpo/numeric.hpp"
#include "chexpo/pools.hpp"
#include "chexpo/rng.hpp"
#include "chexpo/text.hpp"

namespace chexpo::synth {

namespace {

constexpr std::array<double, 10> kTypeWeights = {
    0.20,  // Presence
    0.25,  // Abnormality
    0.15,  // Anatomy
    0.10,  // Severity
    0.06,  // Plane
    0.06,  // Type
    0.05,  // Difference
    0.05,  // Attribute
    0.05,  // Size
    0.03,  // Gender
};

const std::vector<std::string> kTypes = {"interstitial", "alveolar", "lobar", "segmental", "patchy"};
const std::vector<std::string> kAttributes = {"round", "irregular", "spiculated", "well-defined",
                                              "calcified"};
const std::vector<std::string> kSizes = {"small", "large", "3 cm", "5 mm", "1 cm"};
const std::vector<std::string> kChanges = {"new", "resolved", "increased", "decreased"};

std::vector<std::string> flatten(const std::vector<PoolGroup>& groups) {
  std::vector<std::string> out;
  for (const auto& g : groups) out.insert(out.end(), g.terms.begin(), g.terms.end());
  return out;
}

std::vector<std::string> keys_of(const RejectionPools::Opposites& o) {
  std::vector<std::string> out;
  for (const auto& [k, v] : o) {
    if (k.find(' ') != std::string::npos) out.push_back(k);
  }
  if (out.empty()) {
    for (const auto& [k, v] : o) out.push_back(k);
  }
  return out;
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& items) {
  return items[rng.uniform_index(items.size())];
}

QuestionType pick_type(Rng& rng) {
  double u = rng.uniform01();
  for (std::size_t i = 0; i < kTypeWeights.size(); ++i) {
    if (u < kTypeWeights[i]) return kQuestionTypes[i];
    u -= kTypeWeights[i];
  }
  return kQuestionTypes.back();
}

/// Another term from the same pool group, or another vocabulary entry.
std::string confuse(Rng& rng, const std::string& answer, const std::vector<PoolGroup>& groups,
                    const std::vector<std::string>& fallback) {
  const std::string norm = normalize_text(answer);
  for (const auto& g : groups) {
    for (std::size_t i = 0; i < g.normalized.size(); ++i) {
      if (g.normalized[i] != norm) continue;
      std::size_t j = rng.uniform_index(g.terms.size() - 1);
      if (j >= i) ++j;
      return g.terms[j];
    }
  }
  std::string other = answer;
  while (normalize_text(other) == norm) other = pick(rng, fallback);
  return other;
}

struct Draft {
  Sample sample;
  std::string finding;  ///< drives the image cluster
  std::vector<std::string> vocabulary;
  const std::vector<PoolGroup>* groups = nullptr;
};

Draft draft_sample(Rng& rng, std::size_t i, const RejectionPools& pools) {
  static const auto anatomy = flatten(pools.groups(PoolKind::Anatomy));
  static const auto findings = flatten(pools.groups(PoolKind::Abnormality));
  static const auto severities = flatten(pools.groups(PoolKind::Severity));
  static const auto views = keys_of(pools.plane());
  static const auto genders = keys_of(pools.gender());
  static const std::vector<PoolGroup> kNoGroups;

  char id[32];
  std::snprintf(id, sizeof id, "s%06zu", i);

  Draft d;
  Sample& s = d.sample;
  s.id = id;
  s.image_ids = {std::string("img-") + id};
  s.question_type = pick_type(rng);
  s.answer_type = AnswerType::Open;
  d.groups = &kNoGroups;

  const std::string finding = pick(rng, findings);
  const std::string site = pick(rng, anatomy);
  d.finding = finding;
  const bool closed = rng.uniform01() < (s.question_type == QuestionType::Presence ? 0.8 : 0.1);
  const bool yes = rng.uniform01() < 0.5;

  switch (s.question_type) {
    case QuestionType::Presence:
      if (closed) {
        s.question = "Is there evidence of " + finding + "?";
        s.answer = {yes ? "yes" : "no"};
        s.explanation = yes ? "There is " + finding + " visible in the " + site + "."
                            : "No radiographic sign of " + finding + " is seen.";
      } else {
        s.question = "What finding is present in the " + site + "?";
        s.answer = {finding};
        s.explanation = "The " + site + " shows " + finding + ".";
        d.vocabulary = findings;
        d.groups = &pools.groups(PoolKind::Abnormality);
      }
      break;
    case QuestionType::Abnormality:
      if (closed) {
        s.question = "Is the abnormality in the " + site + " " + finding + "?";
        s.answer = {yes ? "yes" : "no"};
        s.explanation = yes ? "The " + site + " demonstrates " + finding + "."
                            : "The " + site + " abnormality is not " + finding + ".";
      } else if (rng.uniform01() < 0.15) {
        std::string second = finding;
        while (second == finding) second = pick(rng, findings);
        s.question = "What abnormalities are seen in the " + site + "?";
        s.answer = {finding, second};
        s.explanation = "The " + site + " shows " + finding + " with associated " + second + ".";
      } else {
        s.question = "What abnormality is seen in the " + site + "?";
        s.answer = {finding};
        s.explanation = "The " + site + " demonstrates " + finding + ".";
        d.vocabulary = findings;
        d.groups = &pools.groups(PoolKind::Abnormality);
      }
      break;
    case QuestionType::Anatomy:
      if (closed) {
        s.question = "Is the " + finding + " located in the " + site + "?";
        s.answer = {yes ? "yes" : "no"};
        s.explanation = yes ? "The " + finding + " projects over the " + site + "."
                            : "The " + finding + " does not involve the " + site + ".";
      } else {
        s.question = "Where is the " + finding + " located?";
        s.answer = {site};
        s.explanation = "The " + finding + " projects over the " + site + ".";
        d.vocabulary = anatomy;
        d.groups = &pools.groups(PoolKind::Anatomy);
      }
      break;
    case QuestionType::Severity: {
      const std::string grade = pick(rng, severities);
      s.question = "How severe is the " + finding + " in the " + site + "?";
      s.answer = {grade};
      s.explanation = "The " + finding + " in the " + site + " appears " + grade + ".";
      d.vocabulary = severities;
      d.groups = &pools.groups(PoolKind::Severity);
      break;
    }
    case QuestionType::Plane: {
      const std::string view = pick(rng, views);
      s.question = "Which projection was used for this radiograph?";
      s.answer = {view};
      s.explanation = "The radiograph is acquired as a " + view + ".";
      d.vocabulary = views;
      break;
    }
    case QuestionType::Gender: {
      const std::string g = pick(rng, genders);
      s.question = "What is the gender of the patient?";
      s.answer = {g};
      s.explanation = "The soft tissue contour suggests a " + g + " patient.";
      d.vocabulary = genders;
      break;
    }
    case QuestionType::Type: {
      const std::string t = pick(rng, kTypes);
      s.question = "What type of " + finding + " is present?";
      s.answer = {t};
      s.explanation = "The " + finding + " has a " + t + " pattern.";
      d.vocabulary = kTypes;
      break;
    }
    case QuestionType::Difference: {
      const std::string change = pick(rng, kChanges) + " " + finding;
      s.image_ids.push_back(std::string("img-") + id + "-prior");
      s.question = "What has changed compared to the prior study?";
      s.answer = {change};
      s.explanation = "Compared with the prior image there is " + change + " in the " + site + ".";
      for (const auto& c : kChanges) d.vocabulary.push_back(c + " " + finding);
      break;
    }
    case QuestionType::Attribute: {
      const std::string a = pick(rng, kAttributes);
      s.question = "What is the shape of the " + finding + "?";
      s.answer = {a};
      s.explanation = "The " + finding + " in the " + site + " has a " + a + " margin.";
      d.vocabulary = kAttributes;
      break;
    }
    case QuestionType::Size: {
      const std::string z = pick(rng, kSizes);
      s.question = "What is the size of the " + finding + "?";
      s.answer = {z};
      s.explanation = "The " + finding + " in the " + site + " measures " + z + ".";
      d.vocabulary = kSizes;
      break;
    }
  }
  if (closed && s.answer.size() == 1 && (s.answer[0] == "yes" || s.answer[0] == "no")) {
    s.answer_type = AnswerType::Closed;
  }
  static const std::vector<std::string> kIncidental = {
      "No pneumothorax is seen.",         "The osseous structures are intact.",
      "Support devices are absent.",      "The costophrenic angles are sharp.",
      "Mediastinal contours are stable.", "Lung volumes are low.",
      "Degenerative change of the spine.", "The trachea is midline.",
      "Overlying artifact limits detail.", "No free subdiaphragmatic air.",
      "Heart size is within normal limits.", "Aortic knob calcification is noted."};
  s.explanation += " " + pick(rng, kIncidental);
  return d;
}

std::vector<double> token_logprobs(Rng& rng, std::size_t tokens, double lo, double hi) {
  std::vector<double> out(std::max<std::size_t>(tokens, 1));
  for (auto& v : out) v = -(lo + (hi - lo) * rng.uniform01());
  return out;
}

PredictionRecord script_prediction(Rng& rng, const Draft& d, double low_conf_rate) {
  const Sample& s = d.sample;
  PredictionRecord p;
  p.sample_id = s.id;
  p.model_id = "synthetic-sft";
  const bool fail = rng.uniform01() < failure_rate(s.question_type);

  if (!fail) {
    p.predicted_answer = s.answer_text();
    p.explanation = s.explanation;
    const auto n = split_whitespace(p.predicted_answer).size();
    p.answer_token_logprobs = rng.uniform01() < low_conf_rate ? token_logprobs(rng, n, 0.4, 1.2)
                                                              : token_logprobs(rng, n, 0.0, 0.2);
    return p;
  }

  std::string wrong;
  if (s.answer_type == AnswerType::Closed) {
    wrong = s.answer[0] == "yes" ? "no" : "yes";
  } else if (s.answer.size() > 1) {
    wrong = s.answer[0];
  } else if (!d.vocabulary.empty()) {
    wrong = confuse(rng, s.answer[0], *d.groups, d.vocabulary);
  } else {
    wrong = s.answer[0] + " " + s.answer[0];
  }
  p.predicted_answer = wrong;
  p.explanation = "The findings are consistent with " + wrong + ".";
  p.answer_token_logprobs = token_logprobs(rng, split_whitespace(wrong).size(), 0.0, 1.5);
  return p;
}

std::vector<float> image_vector(std::uint64_t seed, const std::string& finding,
                                const std::string& image_id, std::size_t dim, double noise) {
  Rng centre(derive_seed(seed, "centroid/" + finding));
  Rng jitter(derive_seed(seed, "image/" + image_id));
  std::vector<float> v(dim);
  for (auto& x : v) x = static_cast<float>(centre.normal() + noise * jitter.normal());
  return v;
}

}  // namespace

double failure_rate(QuestionType q) noexcept {
  switch (q) {
    case QuestionType::Abnormality: return 0.30;
    case QuestionType::Anatomy: return 0.28;
    case QuestionType::Severity: return 0.30;
    case QuestionType::Presence: return 0.06;
    default: return 0.08;
  }
}

Dataset generate(const Options& options) {
  if (options.dim == 0) throw_config("invalid-dim", "synthetic embedding dim must be positive");
  const RejectionPools& pools = default_pools();
  Rng rng(derive_seed(options.seed, "synth/samples"));
  Rng model(derive_seed(options.seed, "synth/model"));
  HashProjectionEmbedder text(options.dim, options.embedder_seed);
  HashProjectionEmbedder question(options.dim, options.embedder_seed ^ 0x51ULL);

  Dataset out;
  std::vector<std::string> ids;
  std::vector<float> q, t, v;
  for (std::size_t i = 0; i < options.samples; ++i) {
    Draft d = draft_sample(rng, i, pools);
    const double u = rng.uniform01();
    d.sample.split = u < options.test_fraction                            ? Split::Test
                     : u < options.test_fraction + options.valid_fraction ? Split::Valid
                                                                          : Split::Train;
    out.predictions.push_back(script_prediction(model, d, options.low_conf_rate));

    const auto qv = question.embed(d.sample.question);
    const auto tv = text.embed(d.sample.rationale());
    const auto iv = image_vector(options.seed, d.finding, d.sample.image_ids.front(), options.dim,
                                 options.image_noise);
    q.insert(q.end(), qv.begin(), qv.end());
    t.insert(t.end(), tv.begin(), tv.end());
    v.insert(v.end(), iv.begin(), iv.end());
    ids.push_back(d.sample.id);
    out.samples.add(std::move(d.sample));
  }
  out.embeddings.question = EmbeddingSet(ids, options.dim, std::move(q), Modality::Question);
  out.embeddings.rationale = EmbeddingSet(ids, options.dim, std::move(t), Modality::Rationale);
  out.embeddings.image = EmbeddingSet(ids, options.dim, std::move(v), Modality::Image);
  return out;
}

void write_dataset(const Dataset& data, const std::filesystem::path& dir, const Options& options,
                   const PipelineConfig& config_template) {
  std::filesystem::create_directories(dir);
  io::write_samples(data.samples, dir / "samples.jsonl");
  io::write_predictions(data.predictions, dir / "predictions.jsonl");
  io::write_embedding_dir(data.embeddings, dir / "embeddings");

  PipelineConfig config = config_template;
  config.samples_path = "samples.jsonl";
  config.embeddings_dir = "embeddings";
  config.predictions_path = "predictions.jsonl";
  config.out_dir = "out";
  config.embedder = "hash";
  config.embedder_seed = options.embedder_seed;
  std::ofstream out(dir / "config.json", std::ios::trunc);
  out << io::config_to_json(config) << '\n';
  if (!out) throw_data("io-error", "cannot write " + (dir / "config.json").string());
}

}  // namespace chexpo::synth
