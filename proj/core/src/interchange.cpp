// SPDX-License-Identifier: Apache-2.0
#include "chexpo/interchange.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "chexpo/error.hpp"
#include "chexpo/text.hpp"

namespace chexpo::io {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw_data("io-error", "cannot open " + path.string() + " for reading");
  return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw_data("io-error", "cannot open " + path.string() + " for writing");
  return out;
}

bool is_blank(const std::string& line) {
  return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

/// Calls fn(line_text, line_no) for every non-blank line.
template <typename Fn>
void for_each_line(const fs::path& path, Fn&& fn) {
  auto in = open_in(path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    fn(line, line_no);
  }
  if (in.bad()) throw_data("io-error", "read failed on " + path.string());
}

json parse_object(std::string_view text, std::size_t line_no) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw_data("malformed-json", e.what(), line_no);
  }
  if (!j.is_object()) throw_data("malformed-json", "expected a JSON object", line_no);
  return j;
}

std::string get_string(const json& j, const char* key, std::size_t line_no, bool required = true) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    if (required) throw_data("malformed-json", std::string("missing field '") + key + "'", line_no);
    return {};
  }
  if (!it->is_string()) {
    throw_data("malformed-json", std::string("field '") + key + "' must be a string", line_no);
  }
  return it->get<std::string>();
}

std::vector<std::string> get_string_list(const json& j, const char* key, std::size_t line_no) {
  const auto it = j.find(key);
  if (it == j.end()) throw_data("malformed-json", std::string("missing field '") + key + "'", line_no);
  if (it->is_string()) return {it->get<std::string>()};
  if (!it->is_array()) {
    throw_data("malformed-json", std::string("field '") + key + "' must be a list of strings", line_no);
  }
  std::vector<std::string> out;
  for (const auto& e : *it) {
    if (!e.is_string()) {
      throw_data("malformed-json", std::string("field '") + key + "' must be a list of strings",
                 line_no);
    }
    out.push_back(e.get<std::string>());
  }
  return out;
}

/// Drops a leading short answer from a dataset rationale ("Yes. The ...").
std::string strip_answer_prefix(const std::string& rationale, const std::string& answer) {
  if (answer.empty() || rationale.size() < answer.size()) return rationale;
  if (normalize_text(rationale.substr(0, answer.size())) != normalize_text(answer)) return rationale;
  std::size_t i = answer.size();
  while (i < rationale.size() && (rationale[i] == '.' || rationale[i] == ',' || rationale[i] == ':')) ++i;
  while (i < rationale.size() && rationale[i] == ' ') ++i;
  return rationale.substr(i);
}

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

}  // namespace

// ---- samples --------------------------------------------------------------

SampleRecord record_from_json(std::string_view line) {
  const json j = parse_object(line, 0);
  SampleRecord r;
  r.id = get_string(j, "id", 0);
  r.image_ids = get_string_list(j, "image_ids", 0);
  r.question = get_string(j, "question", 0);
  r.answer = get_string_list(j, "answer", 0);
  if (j.contains("explanation")) {
    r.explanation = get_string(j, "explanation", 0);
  } else if (j.contains("rationale")) {
    r.explanation = strip_answer_prefix(get_string(j, "rationale", 0), join(r.answer, " and "));
  }
  r.question_type = get_string(j, "question_type", 0);
  r.answer_type = get_string(j, "answer_type", 0);
  r.split = get_string(j, "split", 0);
  return r;
}

SampleSet read_samples(const fs::path& path) {
  SampleSet set;
  for_each_line(path, [&](const std::string& line, std::size_t line_no) {
    SampleRecord r;
    try {
      r = record_from_json(line);
    } catch (const Error& e) {
      throw_data(e.code(), e.detail(), line_no);
    }
    r.question_type = std::string(canonical_question_label(r.question_type));
    auto violations = validate_sample(r);
    if (violations.empty() && set.contains(r.id)) violations.emplace_back("duplicate-id");
    if (!violations.empty()) throw_data("invalid-sample", join(violations, ","), line_no);
    set.add(make_sample(r));
  });
  return set;
}

std::string sample_to_json(const Sample& s) {
  ordered_json j;
  j["id"] = s.id;
  j["image_ids"] = s.image_ids;
  j["question"] = s.question;
  j["answer"] = s.answer;
  j["explanation"] = s.explanation;
  j["question_type"] = std::string(to_string(s.question_type));
  j["answer_type"] = std::string(to_string(s.answer_type));
  j["split"] = std::string(to_string(s.split));
  return j.dump();
}

void write_samples(const SampleSet& samples, const fs::path& path) {
  auto out = open_out(path);
  for (const auto& s : samples) out << sample_to_json(s) << '\n';
  if (!out) throw_data("io-error", "write failed on " + path.string());
}

// ---- embeddings -----------------------------------------------------------

EmbeddingSet read_embeddings(const fs::path& bin_path, const fs::path& ids_path,
                             Modality modality) {
  std::string bytes;
  {
    auto in = open_in(bin_path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    bytes = ss.str();
  }
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kEmbeddingMagic, 4) != 0) {
    throw_data("bad-magic", bin_path.string());
  }
  if (bytes.size() < kEmbeddingHeaderBytes) throw_data("truncated-payload", "short header");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (p[4] != kEmbeddingVersion) {
    throw_data("version-mismatch", "found version " + std::to_string(p[4]));
  }
  const std::uint32_t rows = get_u32(p + 5);
  const std::uint32_t dim = get_u32(p + 9);
  if (dim == 0) throw_data("zero-dim", bin_path.string());

  std::vector<std::string> ids;
  for_each_line(ids_path, [&](const std::string& line, std::size_t) { ids.push_back(line); });
  if (ids.size() != rows) {
    throw_data("count-mismatch", "header has " + std::to_string(rows) + " rows, ids file has " +
                                     std::to_string(ids.size()));
  }

  const std::size_t values = std::size_t(rows) * dim;
  const std::size_t expected = kEmbeddingHeaderBytes + values * 4;
  if (bytes.size() < expected) {
    throw_data("truncated-payload", "expected " + std::to_string(expected) + " bytes, found " +
                                        std::to_string(bytes.size()));
  }
  if (bytes.size() > expected) throw_data("trailing-payload", bin_path.string());

  std::vector<float> data(values);
  const unsigned char* payload = p + kEmbeddingHeaderBytes;
  for (std::size_t i = 0; i < values; ++i) {
    data[i] = std::bit_cast<float>(get_u32(payload + 4 * i));
  }
  return EmbeddingSet(std::move(ids), dim, std::move(data), modality);
}

void write_embeddings(const EmbeddingSet& set, const fs::path& bin_path,
                      const fs::path& ids_path) {
  std::string buf(kEmbeddingMagic, 4);
  buf.push_back(static_cast<char>(kEmbeddingVersion));
  put_u32(buf, static_cast<std::uint32_t>(set.size()));
  put_u32(buf, static_cast<std::uint32_t>(set.dim()));
  buf.reserve(buf.size() + set.data().size() * 4);
  for (float x : set.data()) put_u32(buf, std::bit_cast<std::uint32_t>(x));
  {
    auto out = open_out(bin_path, std::ios::binary);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw_data("io-error", "write failed on " + bin_path.string());
  }
  auto ids = open_out(ids_path);
  for (const auto& id : set.ids()) ids << id << '\n';
  if (!ids) throw_data("io-error", "write failed on " + ids_path.string());
}

EmbeddingBundle read_embedding_dir(const fs::path& dir) {
  auto load = [&](Modality m) {
    const std::string stem(file_stem(m));
    return read_embeddings(dir / (stem + ".bin"), dir / (stem + ".ids"), m);
  };
  return EmbeddingBundle{load(Modality::Question), load(Modality::Rationale), load(Modality::Image)};
}

void write_embedding_dir(const EmbeddingBundle& bundle, const fs::path& dir) {
  for (const EmbeddingSet* set : {&bundle.question, &bundle.rationale, &bundle.image}) {
    const std::string stem(file_stem(set->modality()));
    write_embeddings(*set, dir / (stem + ".bin"), dir / (stem + ".ids"));
  }
}

// ---- predictions ----------------------------------------------------------

PredictionRecord parse_prediction(std::string_view line, std::size_t line_no) {
  const json j = parse_object(line, line_no);
  PredictionRecord r;
  r.sample_id = get_string(j, "sample_id", line_no);
  r.predicted_answer = get_string(j, "predicted_answer", line_no);
  r.explanation = get_string(j, "explanation", line_no, false);
  r.model_id = get_string(j, "model_id", line_no, false);
  const auto it = j.find("answer_token_logprobs");
  if (it == j.end() || !it->is_array()) {
    throw_data("malformed-json", "answer_token_logprobs must be a list of numbers", line_no);
  }
  for (const auto& v : *it) {
    if (!v.is_number()) throw_data("malformed-json", "non-numeric log-prob", line_no);
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw_data("non-finite-logprob", {}, line_no);
    if (x > 0.0) throw_data("positive-logprob", std::to_string(x), line_no);
    r.answer_token_logprobs.push_back(x);
  }
  if (r.answer_token_logprobs.empty()) throw_data("empty-token-list", r.sample_id, line_no);
  return r;
}

std::vector<PredictionRecord> read_predictions(const fs::path& path) {
  std::vector<PredictionRecord> out;
  for_each_line(path, [&](const std::string& line, std::size_t line_no) {
    out.push_back(parse_prediction(line, line_no));
  });
  return out;
}

std::string prediction_to_json(const PredictionRecord& r) {
  ordered_json j;
  j["sample_id"] = r.sample_id;
  j["predicted_answer"] = r.predicted_answer;
  j["explanation"] = r.explanation;
  j["answer_token_logprobs"] = r.answer_token_logprobs;
  j["model_id"] = r.model_id;
  return j.dump();
}

void write_predictions(const std::vector<PredictionRecord>& records, const fs::path& path) {
  auto out = open_out(path);
  for (const auto& r : records) out << prediction_to_json(r) << '\n';
  if (!out) throw_data("io-error", "write failed on " + path.string());
}

// ---- preference pairs -----------------------------------------------------

std::string pair_to_json(const PreferencePair& p) {
  ordered_json meta = ordered_json::object();
  meta["stage"] = p.meta.stage;
  if (p.meta.seed_id) meta["seed_id"] = *p.meta.seed_id;
  if (p.meta.seed_score) meta["seed_score"] = *p.meta.seed_score;
  if (p.meta.logprob) meta["logprob"] = *p.meta.logprob;
  if (p.meta.strategy) meta["strategy"] = *p.meta.strategy;
  if (p.meta.substituted_answer) meta["substituted_answer"] = *p.meta.substituted_answer;
  if (p.meta.retrieved_id) meta["retrieved_id"] = *p.meta.retrieved_id;
  if (p.meta.retrieval_score) meta["retrieval_score"] = *p.meta.retrieval_score;

  ordered_json j;
  j["sample_id"] = p.sample_id;
  j["image_ids"] = p.image_ids;
  j["question"] = p.question;
  j["chosen"] = p.chosen;
  j["rejected"] = p.rejected;
  j["source"] = std::string(to_string(p.source));
  j["meta"] = std::move(meta);
  return j.dump();
}

void write_pairs(const std::vector<PreferencePair>& pairs, const fs::path& path) {
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto violations = validate_pair(pairs[i]);
    if (!violations.empty()) {
      throw_data("invariant-violation", "pair " + std::to_string(i) + ": " + join(violations, ","));
    }
  }
  auto out = open_out(path);
  for (const auto& p : pairs) out << pair_to_json(p) << '\n';
  if (!out) throw_data("io-error", "write failed on " + path.string());
}

std::vector<PreferencePair> read_pairs(const fs::path& path) {
  static const std::set<std::string> kMetaKeys = {"stage",      "seed_id",  "seed_score",
                                                  "logprob",    "strategy", "substituted_answer",
                                                  "retrieved_id", "retrieval_score"};
  std::vector<PreferencePair> out;
  for_each_line(path, [&](const std::string& line, std::size_t line_no) {
    const json j = parse_object(line, line_no);
    PreferencePair p;
    p.sample_id = get_string(j, "sample_id", line_no);
    p.image_ids = get_string_list(j, "image_ids", line_no);
    p.question = get_string(j, "question", line_no);
    p.chosen = get_string(j, "chosen", line_no);
    p.rejected = get_string(j, "rejected", line_no);
    const auto source = parse_pair_source(get_string(j, "source", line_no));
    if (!source) throw_data("malformed-json", "unknown pair source", line_no);
    p.source = *source;
    if (const auto m = j.find("meta"); m != j.end()) {
      if (!m->is_object()) throw_data("malformed-json", "meta must be an object", line_no);
      for (const auto& [key, value] : m->items()) {
        if (!kMetaKeys.count(key)) throw_data("malformed-json", "unknown meta key " + key, line_no);
      }
      try {
        p.meta.stage = m->value("stage", 0);
        if (m->contains("seed_id")) p.meta.seed_id = m->at("seed_id").get<std::string>();
        if (m->contains("seed_score")) p.meta.seed_score = m->at("seed_score").get<double>();
        if (m->contains("logprob")) p.meta.logprob = m->at("logprob").get<double>();
        if (m->contains("strategy")) p.meta.strategy = m->at("strategy").get<std::string>();
        if (m->contains("substituted_answer")) {
          p.meta.substituted_answer = m->at("substituted_answer").get<std::string>();
        }
        if (m->contains("retrieved_id")) p.meta.retrieved_id = m->at("retrieved_id").get<std::string>();
        if (m->contains("retrieval_score")) {
          p.meta.retrieval_score = m->at("retrieval_score").get<double>();
        }
      } catch (const json::exception& e) {
        throw_data("malformed-json", e.what(), line_no);
      }
    }
    out.push_back(std::move(p));
  });
  return out;
}

// ---- pools ----------------------------------------------------------------

RejectionPools parse_pools(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw_data("malformed", e.what());
  }
  if (!j.is_object()) throw_data("malformed", "pools must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key != "anatomy" && key != "abnormality" && key != "severity" && key != "opposites") {
      throw_data("malformed", "unknown key " + key);
    }
  }
  auto groups = [&](const char* key) {
    std::vector<std::vector<std::string>> out;
    if (!j.contains(key)) return out;
    try {
      out = j.at(key).get<std::vector<std::vector<std::string>>>();
    } catch (const json::exception&) {
      throw_data("malformed", std::string(key) + " must be a list of string lists");
    }
    return out;
  };
  RejectionPools::Opposites gender, plane;
  if (j.contains("opposites")) {
    const json& o = j.at("opposites");
    if (!o.is_object()) throw_data("malformed", "opposites must be an object");
    for (const auto& [key, value] : o.items()) {
      if (key != "gender" && key != "plane") throw_data("malformed", "unknown opposites key " + key);
      RejectionPools::Opposites map;
      try {
        for (const auto& [a, b] : value.items()) map[a] = b.get<std::string>();
      } catch (const json::exception&) {
        throw_data("malformed", "opposites." + key + " must map strings to strings");
      }
      (key == "gender" ? gender : plane) = std::move(map);
    }
  }
  return RejectionPools(groups("anatomy"), groups("abnormality"), groups("severity"),
                        std::move(gender), std::move(plane));
}

RejectionPools read_pools(const fs::path& path) {
  auto in = open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_pools(ss.str());
}

std::string pools_to_json(const RejectionPools& pools) {
  ordered_json j;
  for (PoolKind k : {PoolKind::Anatomy, PoolKind::Abnormality, PoolKind::Severity}) {
    ordered_json list = ordered_json::array();
    for (const auto& g : pools.groups(k)) list.push_back(g.terms);
    j[std::string(to_string(k))] = std::move(list);
  }
  j["opposites"]["gender"] = pools.gender();
  j["opposites"]["plane"] = pools.plane();
  return j.dump(2);
}

// ---- config ---------------------------------------------------------------

PipelineConfig parse_config(std::string_view text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw_config("malformed-config", e.what());
  }
  if (!j.is_object()) throw_config("malformed-config", "config must be a JSON object");

  auto resolve = [&](const std::string& p) {
    if (p.empty() || base_dir.empty() || fs::path(p).is_absolute()) return p;
    return (base_dir / p).lexically_normal().string();
  };

  PipelineConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "gamma") c.gamma = value.get<double>();
      else if (key == "sigma") c.sigma = value.get<double>();
      else if (key == "top_k") c.top_k = value.get<std::size_t>();
      else if (key == "beta") c.beta = value.get<double>();
      else if (key == "robust_epsilon") c.robust_epsilon = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "samples") c.samples_path = resolve(value.get<std::string>());
      else if (key == "embeddings") c.embeddings_dir = resolve(value.get<std::string>());
      else if (key == "predictions") c.predictions_path = resolve(value.get<std::string>());
      else if (key == "pools") c.pools_path = resolve(value.get<std::string>());
      else if (key == "out_dir") c.out_dir = resolve(value.get<std::string>());
      else if (key == "embedder") c.embedder = value.get<std::string>();
      else if (key == "embedder_seed") c.embedder_seed = value.get<std::uint64_t>();
      else if (key == "cell_budget") c.cell_budget = value.get<std::size_t>();
      else if (key == "workers") c.workers = value.get<std::size_t>();
      else if (key == "loss_type") {
        const auto t = parse_loss_type(value.get<std::string>());
        if (!t) throw_config("invalid-config", "unknown loss_type " + value.dump());
        c.loss_type = *t;
      } else if (key == "presence_policy") {
        const auto p = parse_presence_policy(value.get<std::string>());
        if (!p) throw_config("invalid-config", "unknown presence_policy " + value.dump());
        c.presence_policy = *p;
      } else if (key == "modalities") {
        c.modalities = ModalityMask{false, false, false};
        for (const auto& m : value) {
          const auto name = m.get<std::string>();
          if (name == "question") c.modalities.question = true;
          else if (name == "rationale") c.modalities.rationale = true;
          else if (name == "image") c.modalities.image = true;
          else throw_config("invalid-config", "unknown modality " + name);
        }
      } else {
        throw_config("unknown-key", key);
      }
    } catch (const json::exception& e) {
      throw_config("invalid-config", key + ": " + e.what());
    }
  }
  c.validate();
  return c;
}

PipelineConfig read_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw_config("io-error", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

std::string config_to_json(const PipelineConfig& c) {
  ordered_json j;
  j["gamma"] = c.gamma;
  j["sigma"] = c.sigma;
  j["top_k"] = c.top_k;
  j["beta"] = c.beta;
  j["loss_type"] = std::string(to_string(c.loss_type));
  j["robust_epsilon"] = c.robust_epsilon;
  j["seed"] = c.seed;
  j["samples"] = c.samples_path;
  j["embeddings"] = c.embeddings_dir;
  j["predictions"] = c.predictions_path;
  j["pools"] = c.pools_path;
  j["out_dir"] = c.out_dir;
  ordered_json mods = ordered_json::array();
  if (c.modalities.question) mods.push_back("question");
  if (c.modalities.rationale) mods.push_back("rationale");
  if (c.modalities.image) mods.push_back("image");
  j["modalities"] = std::move(mods);
  j["presence_policy"] = std::string(to_string(c.presence_policy));
  j["embedder"] = c.embedder;
  j["embedder_seed"] = c.embedder_seed;
  j["cell_budget"] = c.cell_budget;
  j["workers"] = c.workers;
  return j.dump(2);
}

}  // namespace chexpo::io
