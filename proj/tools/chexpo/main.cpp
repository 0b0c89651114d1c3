// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <thread>
#include <unordered_set>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "chexpo/confidence.hpp"
#include "chexpo/counterfactual.hpp"
#include "chexpo/dpo.hpp"
#include "chexpo/embedder.hpp"
#include "chexpo/error.hpp"
#include "chexpo/interchange.hpp"
#include "chexpo/metrics.hpp"
#include "chexpo/numeric.hpp"
#include "chexpo/pipeline.hpp"
#include "chexpo/provider.hpp"
#include "chexpo/retrieval.hpp"
#include "chexpo/rng.hpp"
#include "chexpo/sampling.hpp"

namespace fs = std::filesystem;
using namespace chexpo;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool quiet = false;
};

PipelineConfig load_config(const Globals& g) {
  PipelineConfig c = g.config_path.empty() ? PipelineConfig{} : io::read_config(g.config_path);
  if (g.seed) c.seed = *g.seed;
  if (!g.out_dir.empty()) c.out_dir = g.out_dir;
  return c;
}

std::string require(const std::string& value, const char* flag) {
  if (value.empty()) throw_config("missing-path", std::string(flag) + " not given and not in config");
  return value;
}

fs::path prepare_out(const PipelineConfig& c) {
  fs::create_directories(c.out_dir);
  return c.out_dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw_data("io-error", "cannot write " + path.string());
}

struct TriageRow {
  std::string sample_id;
  QuestionType question_type;
  TriageClass triage_class;
  double logprob;
};

std::vector<TriageRow> read_triage(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw_data("io-error", "cannot open " + path.string());
  std::vector<TriageRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto cls = j.at("class").get<std::string>();
      TriageRow row{j.at("sample_id").get<std::string>(), QuestionType::Presence,
                    TriageClass::Fail, j.at("logprob").get<double>()};
      const auto q = parse_question_type(j.at("question_type").get<std::string>());
      if (!q) throw_data("invalid-triage", "unknown question type", line_no);
      row.question_type = *q;
      if (cls == "low_conf_correct") row.triage_class = TriageClass::LowConfCorrect;
      else if (cls == "confident_correct") row.triage_class = TriageClass::ConfidentCorrect;
      else if (cls != "fail") throw_data("invalid-triage", "unknown class " + cls, line_no);
      rows.push_back(std::move(row));
    } catch (const nlohmann::json::exception& e) {
      throw_data("invalid-triage", e.what(), line_no);
    }
  }
  return rows;
}

int run_sample(const Globals& g, std::string samples, std::optional<double> gamma) {
  auto c = load_config(g);
  if (!samples.empty()) c.samples_path = samples;
  if (gamma) c.gamma = *gamma;
  c.validate();
  const auto all = io::read_samples(require(c.samples_path, "--samples"));
  const auto train = all.filter(Split::Train);
  const auto picked = stratified_sample(train, c.gamma, c.seed);
  const auto out = prepare_out(c) / "sample.jsonl";
  io::write_samples(picked, out);
  std::cout << "sampled " << picked.size() << " of " << train.size() << " train samples -> "
            << out.string() << "\n";
  return 0;
}

int run_score(const Globals& g, std::string samples, std::string predictions,
              std::optional<double> sigma) {
  auto c = load_config(g);
  if (!samples.empty()) c.samples_path = samples;
  if (!predictions.empty()) c.predictions_path = predictions;
  if (sigma) c.sigma = *sigma;
  c.validate();
  const auto all = io::read_samples(require(c.samples_path, "--samples"));
  const auto preds = io::read_predictions(require(c.predictions_path, "--predictions"));

  std::vector<metrics::TriagedItem> items;
  std::string lines;
  for (const auto& p : preds) {
    const Sample* s = all.find(p.sample_id);
    if (!s) throw_data("unknown-sample", p.sample_id);
    const auto t = triage(*s, p, c.sigma);
    items.push_back({s->question_type, t.triage_class, t.logprob});
    nlohmann::ordered_json j;
    j["sample_id"] = p.sample_id;
    j["question_type"] = std::string(to_string(s->question_type));
    j["class"] = std::string(to_string(t.triage_class));
    j["logprob"] = t.logprob;
    lines += j.dump() + "\n";
  }
  const auto dir = prepare_out(c);
  write_text(dir / "triage.jsonl", lines);

  const auto dist = metrics::error_distribution(items);
  nlohmann::ordered_json report;
  report["total_fails"] = dist.total_fails;
  for (const auto& [q, st] : dist.by_type) {
    report["by_type"][std::string(to_string(q))] = {{"items", st.items},
                                                    {"fails", st.fails},
                                                    {"fail_share", st.fail_share},
                                                    {"mean_logprob", st.mean_logprob}};
  }
  report["abnormality_anatomy_severity_share"] = dist.combined_share(
      {QuestionType::Abnormality, QuestionType::Anatomy, QuestionType::Severity});
  write_text(dir / "errors.json", report.dump(2) + "\n");

  std::printf("%-12s %7s %7s %10s %10s\n", "type", "items", "fails", "share", "mean_lp");
  for (const auto& [q, st] : dist.by_type) {
    std::printf("%-12s %7zu %7zu %10.4f %10.4f\n", std::string(to_string(q)).c_str(), st.items,
                st.fails, st.fail_share, st.mean_logprob);
  }
  return 0;
}

int run_mine(const Globals& g, std::string samples, std::string embeddings, std::string triage_path,
             std::optional<std::size_t> top_k) {
  auto c = load_config(g);
  if (!samples.empty()) c.samples_path = samples;
  if (!embeddings.empty()) c.embeddings_dir = embeddings;
  if (top_k) c.top_k = *top_k;
  c.validate();
  const auto train = io::read_samples(require(c.samples_path, "--samples")).filter(Split::Train);
  const auto bundle = io::read_embedding_dir(require(c.embeddings_dir, "--embeddings"));
  const auto rows = read_triage(require(triage_path, "--triage"));

  std::unordered_set<std::string> scored;
  std::vector<std::string> hard, rest;
  for (const auto& r : rows) {
    scored.insert(r.sample_id);
    if (r.triage_class != TriageClass::ConfidentCorrect) hard.push_back(r.sample_id);
  }
  for (const auto& s : train) {
    if (!scored.count(s.id)) rest.push_back(s.id);
  }
  TopKOptions options;
  options.mask = c.modalities;
  options.cell_budget = c.cell_budget;
  options.workers = c.workers ? c.workers : std::max(1u, std::thread::hardware_concurrency());
  const TripleIndex index(bundle.question, bundle.rationale, bundle.image);
  std::vector<NeighborSet> sets;
  if (!hard.empty()) sets = topk_neighbors(index, hard, rest, c.top_k, options);
  const auto out = prepare_out(c) / "neighbors.jsonl";
  write_neighbors(sets, out);
  std::cout << "mined neighbors for " << sets.size() << " hard samples -> " << out.string() << "\n";
  return 0;
}

int run_pairs(const Globals& g, std::string samples, std::string predictions,
              std::string embeddings, std::string pools_path, std::optional<double> sigma) {
  auto c = load_config(g);
  if (!samples.empty()) c.samples_path = samples;
  if (!predictions.empty()) c.predictions_path = predictions;
  if (!embeddings.empty()) c.embeddings_dir = embeddings;
  if (!pools_path.empty()) c.pools_path = pools_path;
  if (sigma) c.sigma = *sigma;
  c.validate();
  const auto train = io::read_samples(require(c.samples_path, "--samples")).filter(Split::Train);
  const auto preds = io::read_predictions(require(c.predictions_path, "--predictions"));
  const auto bundle = io::read_embedding_dir(require(c.embeddings_dir, "--embeddings"));
  const RejectionPools pools = c.pools_path.empty() ? default_pools() : io::read_pools(c.pools_path);
  auto embedder = make_embedder(c.embedder, bundle.rationale.dim(), c.embedder_seed);

  std::unordered_set<std::string> predicted;
  for (const auto& p : preds) predicted.insert(p.sample_id);
  std::vector<std::size_t> gallery;
  for (const auto& s : train) {
    if (predicted.count(s.id)) continue;
    const auto row = bundle.rationale.find(s.id);
    if (!row) throw_data("missing-embedding", s.id);
    gallery.push_back(*row);
  }
  const AnswerVocabulary vocab(train);
  CounterfactualContext ctx;
  ctx.samples = &train;
  ctx.pools = &pools;
  ctx.vocab = &vocab;
  ctx.rationale_embeddings = &bundle.rationale;
  ctx.gallery_rows = gallery;
  ctx.embedder = embedder.get();
  ctx.presence_policy = c.presence_policy;

  std::vector<PreferencePair> pairs;
  std::size_t skipped = 0;
  for (const auto& p : preds) {
    const Sample* s = train.find(p.sample_id);
    if (!s) throw_data("unknown-sample", p.sample_id);
    const auto t = triage(*s, p, c.sigma);
    const std::uint64_t seed = derive_seed(c.seed, "pair/" + s->id);
    RejectionBuilder builder = [&](const Sample& sample, const PredictionRecord& pred) {
      return build_counterfactual_rejection(pred, sample, ctx, seed);
    };
    std::optional<PreferencePair> pair;
    try {
      pair = assemble_pair(*s, p, t, builder, 3);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Data) throw;
      spdlog::warn("no counterfactual for {}: {}", s->id, e.what());
      ++skipped;
      continue;
    }
    if (pair) pairs.push_back(std::move(*pair));
  }
  pairs = dedupe_pairs(std::move(pairs));
  const auto out = prepare_out(c) / "pairs.jsonl";
  io::write_pairs(pairs, out);
  std::cout << "wrote " << pairs.size() << " pairs (" << skipped << " skipped) -> " << out.string()
            << "\n";
  return 0;
}

struct DpoFlags {
  std::string pairs;
  std::optional<double> beta;
  std::optional<std::string> loss_type;
  double lr = 0.1;
  std::size_t steps = 500;
  std::optional<double> epsilon;
  double init_scale = 0.0;
};

int run_dpo(const Globals& g, const DpoFlags& f) {
  auto c = load_config(g);
  if (f.beta) c.beta = *f.beta;
  if (f.epsilon) c.robust_epsilon = *f.epsilon;
  if (f.loss_type) {
    const auto t = parse_loss_type(*f.loss_type);
    if (!t) throw_config("invalid-loss-type", *f.loss_type);
    c.loss_type = *t;
  }
  c.validate();
  const fs::path pairs_path = f.pairs.empty() ? fs::path(c.out_dir) / "pairs.jsonl" : fs::path(f.pairs);
  const auto pairs = io::read_pairs(pairs_path);
  if (pairs.empty()) throw_data("empty-pairs", pairs_path.string());

  std::map<std::string, std::size_t> context_of;
  std::vector<std::map<std::string, std::size_t>> arms;
  dpo::PreferenceBatch batch;
  auto arm = [&](std::size_t ctx, const std::string& text) {
    auto [it, inserted] = arms[ctx].emplace(text, arms[ctx].size());
    return it->second;
  };
  for (const auto& p : pairs) {
    auto [it, inserted] = context_of.emplace(p.question, arms.size());
    if (inserted) arms.emplace_back();
    const std::size_t ctx = it->second;
    const std::size_t chosen = arm(ctx, p.chosen);
    const std::size_t rejected = arm(ctx, p.rejected);
    batch.push_back({ctx, chosen, rejected});
  }
  dpo::Logits logits;
  Rng rng(derive_seed(c.seed, "dpo/init"));
  for (const auto& a : arms) {
    std::vector<double> row(a.size());
    for (auto& x : row) x = f.init_scale * rng.normal();
    logits.push_back(std::move(row));
  }
  const dpo::ToyPolicy ref(logits);
  dpo::TrainOptions opts;
  opts.lr = f.lr;
  opts.steps = f.steps;
  opts.beta = c.beta;
  opts.loss_type = c.loss_type;
  opts.robust_epsilon = c.robust_epsilon;
  const auto result = dpo::train_toy(ref, ref, batch, opts);

  std::string csv = "step,loss,mean_margin\n";
  char buf[96];
  for (const auto& s : result.history) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g\n", s.step, s.loss, s.mean_margin);
    csv += buf;
  }
  const auto out = prepare_out(c) / "dpo_history.csv";
  write_text(out, csv);
  std::size_t ordered = 0;
  for (const auto& item : batch) {
    if (result.theta.log_prob(item.context, item.chosen) >
        result.theta.log_prob(item.context, item.rejected)) {
      ++ordered;
    }
  }
  std::cout << context_of.size() << " contexts, " << batch.size() << " pairs; final loss "
            << (result.history.empty() ? 0.0 : result.history.back().loss) << "; chosen preferred on "
            << ordered << "/" << batch.size() << " -> " << out.string() << "\n";
  return 0;
}

int run_eval(const Globals& g, std::string samples, std::string predictions, std::string baseline,
             std::string split, bool no_bleu, std::string model_name) {
  auto c = load_config(g);
  if (!samples.empty()) c.samples_path = samples;
  if (!predictions.empty()) c.predictions_path = predictions;
  auto all = io::read_samples(require(c.samples_path, "--samples"));
  if (!split.empty()) {
    const auto s = parse_split(split);
    if (!s) throw_config("invalid-split", split);
    all = all.filter(*s);
  }
  const auto preds = io::read_predictions(require(c.predictions_path, "--predictions"));
  std::vector<PredictionRecord> base;
  if (!baseline.empty()) base = io::read_predictions(baseline);
  const auto report = metrics::evaluate(all, preds, !no_bleu, baseline.empty() ? nullptr : &base);
  const auto dir = prepare_out(c);
  write_text(dir / "eval.json", metrics::report_to_json(report) + "\n");
  std::cout << metrics::report_to_table(report, model_name);
  return 0;
}

int run_pipeline_cmd(const Globals& g, std::string provider_spec, std::string embedder,
                     std::optional<double> gamma, std::optional<std::size_t> top_k,
                     std::optional<double> sigma) {
  auto c = load_config(g);
  if (!embedder.empty()) c.embedder = embedder;
  if (gamma) c.gamma = *gamma;
  if (top_k) c.top_k = *top_k;
  if (sigma) c.sigma = *sigma;
  if (provider_spec.empty()) provider_spec = "file:" + require(c.predictions_path, "--provider");
  auto provider = make_provider(provider_spec);
  const auto result = run_pipeline(c, *provider);
  const auto& r = result.report;
  std::cout << "sampled " << r.sampled << ", hard " << r.hard_seeds << ", neighbors " << r.neighbors_unique
            << "; pairs " << r.pairs_total << " (sft_fail " << r.pairs_sft_fail << ", counterfactual "
            << r.pairs_counterfactual << ") -> " << (fs::path(c.out_dir) / "pairs.jsonl").string()
            << "\n";
  return 0;
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return 2;
    case ErrorKind::Data: return 3;
    case ErrorKind::Provider: return 4;
  }
  return 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"chexpo: confidence-aware preference data for chest X-ray VQA"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "Pipeline config JSON");
  app.add_option("--seed", g.seed, "Override the config seed");
  app.add_option("--out-dir", g.out_dir, "Override the output directory");
  app.add_flag("-q,--quiet", g.quiet, "Only log errors");

  std::string samples, predictions, embeddings, pools, triage_path, baseline, split, provider,
      embedder, model_name = "model";
  std::optional<double> gamma, sigma;
  std::optional<std::size_t> top_k;
  bool no_bleu = false;
  DpoFlags dpo_flags;

  auto* sample = app.add_subcommand("sample", "Stratified sample of the train split");
  sample->add_option("--samples", samples);
  sample->add_option("--gamma", gamma);

  auto* score = app.add_subcommand("score", "Triage predictions and report the error distribution");
  score->add_option("--samples", samples);
  score->add_option("--predictions", predictions);
  score->add_option("--sigma", sigma);

  auto* mine = app.add_subcommand("mine", "Top-K neighbors of hard samples among unscored ones");
  mine->add_option("--samples", samples);
  mine->add_option("--embeddings", embeddings);
  mine->add_option("--triage", triage_path, "triage.jsonl written by score")->required();
  mine->add_option("--top-k", top_k);

  auto* pairs = app.add_subcommand("pairs", "Build preference pairs from scored predictions");
  pairs->add_option("--samples", samples);
  pairs->add_option("--predictions", predictions);
  pairs->add_option("--embeddings", embeddings);
  pairs->add_option("--pools", pools);
  pairs->add_option("--sigma", sigma);

  auto* dpo_cmd = app.add_subcommand("dpo-train", "Train a toy policy on a pairs file");
  dpo_cmd->add_option("--pairs", dpo_flags.pairs);
  dpo_cmd->add_option("--beta", dpo_flags.beta);
  dpo_cmd->add_option("--loss-type", dpo_flags.loss_type, "sigmoid, ipo, hinge or robust");
  dpo_cmd->add_option("--lr", dpo_flags.lr)->check(CLI::PositiveNumber);
  dpo_cmd->add_option("--steps", dpo_flags.steps);
  dpo_cmd->add_option("--epsilon", dpo_flags.epsilon, "Label-noise rate of the robust loss");
  dpo_cmd->add_option("--init-scale", dpo_flags.init_scale, "Std-dev of random initial logits");

  auto* eval = app.add_subcommand("eval", "Accuracy, micro-F1, BLEU and win rate");
  eval->add_option("--samples", samples);
  eval->add_option("--predictions", predictions);
  eval->add_option("--baseline", baseline, "Baseline predictions for win rate");
  eval->add_option("--split", split, "Restrict to train, valid or test");
  eval->add_flag("--no-bleu", no_bleu);
  eval->add_option("--model-name", model_name);

  auto* pipeline = app.add_subcommand("pipeline", "Run the full mining pipeline");
  pipeline->add_option("--provider", provider, "file:<predictions.jsonl> or cmd:<argv>");
  pipeline->add_option("--embedder", embedder, "hash or cmd:<argv>");
  pipeline->add_option("--gamma", gamma);
  pipeline->add_option("--top-k", top_k);
  pipeline->add_option("--sigma", sigma);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (g.quiet) spdlog::set_level(spdlog::level::err);

  try {
    if (*sample) return run_sample(g, samples, gamma);
    if (*score) return run_score(g, samples, predictions, sigma);
    if (*mine) return run_mine(g, samples, embeddings, triage_path, top_k);
    if (*pairs) return run_pairs(g, samples, predictions, embeddings, pools, sigma);
    if (*dpo_cmd) return run_dpo(g, dpo_flags);
    if (*eval) return run_eval(g, samples, predictions, baseline, split, no_bleu, model_name);
    if (*pipeline) return run_pipeline_cmd(g, provider, embedder, gamma, top_k, sigma);
  } catch (const Error& e) {
    std::cerr << "chexpo: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "chexpo: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
