// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "chexpo/dpo.hpp"
#include "chexpo/retrieval.hpp"
#include "chexpo/rng.hpp"

namespace {

using namespace chexpo;

EmbeddingSet random_set(std::size_t rows, std::size_t dim, Modality m, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::string> ids(rows);
  std::vector<float> data(rows * dim);
  for (std::size_t i = 0; i < rows; ++i) ids[i] = "s" + std::to_string(i);
  for (auto& x : data) x = static_cast<float>(rng.normal());
  return EmbeddingSet(std::move(ids), dim, std::move(data), m);
}

struct Corpus {
  EmbeddingSet q, t, v;
  Corpus(std::size_t rows, std::size_t dim)
      : q(random_set(rows, dim, Modality::Question, 1)),
        t(random_set(rows, dim, Modality::Rationale, 2)),
        v(random_set(rows, dim, Modality::Image, 3)) {}
};

void BM_Cosine(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  const auto set = random_set(2, dim, Modality::Question, 4);
  for (auto _ : state) benchmark::DoNotOptimize(cosine(set.row(0), set.row(1)));
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_Cosine)->Arg(64)->Arg(512)->Arg(768);

void BM_TopK(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const std::size_t queries = rows / 40;
  const Corpus corpus(rows, 128);
  const TripleIndex index(corpus.q, corpus.t, corpus.v);
  std::vector<std::string> hard, rest;
  for (std::size_t i = 0; i < rows; ++i) (i < queries ? hard : rest).push_back(corpus.q.id(i));
  TopKOptions options;
  options.workers = static_cast<std::size_t>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(topk_neighbors(index, hard, rest, 10, options));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(queries * (rows - queries)));
}
BENCHMARK(BM_TopK)->Args({2000, 1})->Args({10000, 1})->Args({10000, 4})->UseRealTime()->Unit(benchmark::kMillisecond);

void BM_DpoGrad(benchmark::State& state) {
  const auto contexts = static_cast<std::size_t>(state.range(0));
  Rng rng(5);
  dpo::Logits logits(contexts, std::vector<double>(8));
  for (auto& row : logits) {
    for (auto& x : row) x = rng.normal();
  }
  const dpo::ToyPolicy theta(logits);
  const auto ref = dpo::ToyPolicy::uniform(std::vector<std::size_t>(contexts, 8));
  dpo::PreferenceBatch batch;
  for (std::size_t c = 0; c < contexts; ++c) batch.push_back({c, 0, 1 + c % 7});
  for (auto _ : state) {
    benchmark::DoNotOptimize(dpo::dpo_grad(theta, ref, batch, 0.1, LossType::Sigmoid));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(contexts));
}
BENCHMARK(BM_DpoGrad)->Arg(100)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();
