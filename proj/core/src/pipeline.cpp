// SPDX-License-Identifier: Apache-2.0
#include "chexpo/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "chexpo/counterfactual.hpp"
#include "chexpo/error.hpp"
#include "chexpo/numeric.hpp"
#include "chexpo/retrieval.hpp"
#include "chexpo/sampling.hpp"

namespace chexpo {

namespace {

using Clock = std::chrono::steady_clock;

class StageTimer {
 public:
  StageTimer(PipelineReport& report, std::string name)
      : report_(report), name_(std::move(name)), start_(Clock::now()) {}
  ~StageTimer() {
    report_.stage_ms[name_] =
        std::chrono::duration<double, std::milli>(Clock::now() - start_).count();
  }

 private:
  PipelineReport& report_;
  std::string name_;
  Clock::time_point start_;
};

/// Runs `fn`, re-throwing failures tagged with the stage they came from.
template <typename Fn>
auto in_stage(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.detail().starts_with("[stage ")) throw;
    throw Error(e.kind(), e.code(), "[stage " + std::string(stage) + "] " + e.detail(), e.line());
  }
}

struct Hard {
  std::size_t index;  // into the train set
  PredictionRecord prediction;
  TriageResult triage;
  int stage;
  std::optional<std::string> seed_id;
  std::optional<double> seed_score;
};

bool is_skippable(const Error& e) {
  static const std::set<std::string> kCodes = {"term-not-in-pool", "not-in-opposites",
                                               "vocab-too-small", "empty-after-exclusion"};
  return e.kind() == ErrorKind::Data && kCodes.count(e.code()) > 0;
}

}  // namespace

std::string PipelineReport::to_json() const {
  nlohmann::ordered_json j;
  j["train_samples"] = train_samples;
  j["sampled"] = sampled;
  j["forwards_initial"] = forwards_initial;
  j["fails"] = fails;
  j["low_conf"] = low_conf;
  j["confident"] = confident;
  j["hard_seeds"] = hard_seeds;
  j["neighbors_retrieved"] = neighbors_retrieved;
  j["neighbors_unique"] = neighbors_unique;
  j["neighbor_fails"] = neighbor_fails;
  j["neighbor_low_conf"] = neighbor_low_conf;
  j["neighbor_confident"] = neighbor_confident;
  j["pairs_sft_fail"] = pairs_sft_fail;
  j["pairs_counterfactual"] = pairs_counterfactual;
  j["pairs_total"] = pairs_total;
  j["skipped"] = skipped;
  j["deduplicated"] = deduplicated;
  j["rest_final"] = rest_final;
  j["stage_ms"] = stage_ms;
  return j.dump(2);
}

std::vector<PreferencePair> dedupe_pairs(std::vector<PreferencePair> pairs) {
  std::stable_sort(pairs.begin(), pairs.end(), [](const PreferencePair& a, const PreferencePair& b) {
    if (a.meta.stage != b.meta.stage) return a.meta.stage < b.meta.stage;
    return a.sample_id < b.sample_id;
  });
  std::unordered_set<std::string> seen;
  std::vector<PreferencePair> out;
  out.reserve(pairs.size());
  for (auto& p : pairs) {
    if (seen.insert(p.sample_id).second) out.push_back(std::move(p));
  }
  return out;
}

PipelineResult run_pipeline(const PipelineConfig& config, const PipelineInputs& inputs,
                            ForwardProvider& provider, TextEmbedder& embedder) {
  config.validate();
  for (const auto& w : config.warnings()) spdlog::warn("{}", w);

  PipelineResult result;
  PipelineReport& report = result.report;
  const SampleSet train = inputs.samples->filter(Split::Train);
  if (train.empty()) throw_data("empty-train-split", "no train samples to mine");
  report.train_samples = train.size();

  // (1) stratified sample
  SampleSelection selection;
  {
    StageTimer t(report, "sample");
    selection = in_stage("sample", [&] { return stratified_selection(train, config.gamma, config.seed); });
    for (const auto& key : selection.unsampled) {
      spdlog::warn("stratum {}/{} received no samples", to_string(key.question_type),
                   to_string(key.answer_type));
    }
  }
  const SampleSet sampled = train.subset(selection.indices);
  report.sampled = sampled.size();

  // (2) forward the sample
  std::vector<PredictionRecord> first_wave;
  {
    StageTimer t(report, "forward");
    first_wave = in_stage("forward", [&] { return checked_predict(provider, sampled); });
    report.forwards_initial = first_wave.size();
  }

  // (3) triage
  std::vector<Hard> hard;
  {
    StageTimer t(report, "triage");
    in_stage("triage", [&] {
      for (std::size_t i = 0; i < sampled.size(); ++i) {
        const auto tr = triage(sampled[i], first_wave[i], config.sigma);
        switch (tr.triage_class) {
          case TriageClass::Fail: ++report.fails; break;
          case TriageClass::LowConfCorrect: ++report.low_conf; break;
          case TriageClass::ConfidentCorrect: ++report.confident; continue;
        }
        hard.push_back({selection.indices[i], first_wave[i], tr, 3, {}, {}});
      }
    });
    report.hard_seeds = hard.size();
  }

  std::vector<bool> in_rest(train.size(), true);
  for (std::size_t i : selection.indices) in_rest[i] = false;

  const TripleIndex index(inputs.embeddings->question, inputs.embeddings->rationale,
                          inputs.embeddings->image);

  // (4) mine neighbors of the hard seeds in the untouched remainder
  std::vector<NeighborSet> neighbors;
  {
    StageTimer t(report, "mine");
    std::vector<std::string> hard_ids, rest_ids;
    for (const auto& h : hard) hard_ids.push_back(train[h.index].id);
    for (std::size_t i = 0; i < train.size(); ++i) {
      if (in_rest[i]) rest_ids.push_back(train[i].id);
    }
    if (!hard_ids.empty() && !rest_ids.empty()) {
      TopKOptions options;
      options.mask = config.modalities;
      options.cell_budget = config.cell_budget;
      options.workers = config.workers ? config.workers
                                       : std::max(1u, std::thread::hardware_concurrency());
      neighbors = in_stage("mine", [&] {
        return topk_neighbors(index, hard_ids, rest_ids, config.top_k, options);
      });
    }
  }

  // (5) first-query-wins dedupe, then forward the retrieved samples
  std::vector<std::size_t> retrieved;
  std::unordered_map<std::size_t, std::pair<std::string, double>> origin;
  for (const auto& set : neighbors) {
    for (const auto& n : set.neighbors) {
      ++report.neighbors_retrieved;
      const std::size_t i = *train.index_of(n.id);
      if (origin.emplace(i, std::pair{set.query_id, n.score}).second) retrieved.push_back(i);
    }
  }
  report.neighbors_unique = retrieved.size();
  for (std::size_t i : retrieved) in_rest[i] = false;

  const SampleSet second = train.subset(retrieved);
  std::vector<PredictionRecord> second_wave;
  {
    StageTimer t(report, "forward_neighbors");
    second_wave = in_stage("forward_neighbors", [&] { return checked_predict(provider, second); });
  }

  // (6) triage the retrieved samples
  {
    StageTimer t(report, "triage_neighbors");
    in_stage("triage_neighbors", [&] {
      for (std::size_t i = 0; i < second.size(); ++i) {
        const auto tr = triage(second[i], second_wave[i], config.sigma);
        switch (tr.triage_class) {
          case TriageClass::Fail: ++report.neighbor_fails; break;
          case TriageClass::LowConfCorrect: ++report.neighbor_low_conf; break;
          case TriageClass::ConfidentCorrect: ++report.neighbor_confident; continue;
        }
        const auto& [seed_id, score] = origin.at(retrieved[i]);
        hard.push_back({retrieved[i], second_wave[i], tr, 6, seed_id, score});
      }
    });
  }

  // (7) build pairs against the final remainder
  std::vector<PreferencePair> pairs;
  {
    StageTimer t(report, "pairs");
    const AnswerVocabulary vocab(train);
    std::vector<std::size_t> gallery_rows;
    const EmbeddingSet& rationale = inputs.embeddings->rationale;
    for (std::size_t i = 0; i < train.size(); ++i) {
      if (!in_rest[i]) continue;
      const auto row = rationale.find(train[i].id);
      if (!row) throw_data("missing-embedding", "[stage pairs] " + train[i].id);
      gallery_rows.push_back(*row);
    }
    report.rest_final = gallery_rows.size();

    CounterfactualContext ctx;
    ctx.samples = &train;
    ctx.pools = inputs.pools;
    ctx.vocab = &vocab;
    ctx.rationale_embeddings = &rationale;
    ctx.gallery_rows = gallery_rows;
    ctx.embedder = &embedder;
    ctx.presence_policy = config.presence_policy;

    in_stage("pairs", [&] {
      for (const auto& h : hard) {
        const Sample& sample = train[h.index];
        const std::uint64_t seed = derive_seed(config.seed, "pair/" + sample.id);
        RejectionBuilder builder = [&](const Sample& s, const PredictionRecord& p) {
          return build_counterfactual_rejection(p, s, ctx, seed);
        };
        std::optional<PreferencePair> pair;
        try {
          pair = assemble_pair(sample, h.prediction, h.triage, builder, h.stage);
        } catch (const Error& e) {
          if (!is_skippable(e)) throw;
          spdlog::warn("no counterfactual for {}: {}", sample.id, e.what());
        }
        if (!pair) {
          ++report.skipped;
          continue;
        }
        pair->meta.seed_id = h.seed_id;
        pair->meta.seed_score = h.seed_score;
        pairs.push_back(std::move(*pair));
      }
    });
  }

  const std::size_t before = pairs.size();
  result.pairs = dedupe_pairs(std::move(pairs));
  report.deduplicated = before - result.pairs.size();
  for (const auto& p : result.pairs) {
    if (p.source == PairSource::SftFail) ++report.pairs_sft_fail;
    else ++report.pairs_counterfactual;
  }
  report.pairs_total = result.pairs.size();
  return result;
}

PipelineResult run_pipeline(const PipelineConfig& config, ForwardProvider& provider) {
  config.validate();
  const std::filesystem::path out_dir = config.out_dir;
  const auto pairs_path = out_dir / "pairs.jsonl";
  const auto tmp_path = out_dir / "pairs.jsonl.partial";
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  std::filesystem::remove(pairs_path, ec);

  try {
    if (config.samples_path.empty()) throw_config("missing-path", "samples");
    if (config.embeddings_dir.empty()) throw_config("missing-path", "embeddings");
    const SampleSet samples = in_stage("load", [&] { return io::read_samples(config.samples_path); });
    const auto embeddings =
        in_stage("load", [&] { return io::read_embedding_dir(config.embeddings_dir); });
    const RejectionPools pools = config.pools_path.empty()
                                     ? default_pools()
                                     : in_stage("load", [&] { return io::read_pools(config.pools_path); });
    auto embedder = make_embedder(config.embedder, embeddings.rationale.dim(), config.embedder_seed);

    PipelineInputs inputs{&samples, &embeddings, &pools};
    PipelineResult result = run_pipeline(config, inputs, provider, *embedder);

    const auto start = Clock::now();
    in_stage("write", [&] {
      io::write_pairs(result.pairs, tmp_path);
      std::filesystem::rename(tmp_path, pairs_path);
    });
    result.report.stage_ms["write"] =
        std::chrono::duration<double, std::milli>(Clock::now() - start).count();

    std::ofstream report_out(out_dir / "report.json", std::ios::trunc);
    report_out << result.report.to_json() << '\n';
    if (!report_out) throw_data("io-error", "cannot write report.json");
    return result;
  } catch (...) {
    std::filesystem::remove(tmp_path, ec);
    std::filesystem::remove(pairs_path, ec);
    throw;
  }
}

}  // namespace chexpo
