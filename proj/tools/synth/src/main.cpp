// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>
#include <iostream>

#include "chexpo/error.hpp"
#include "chexpo/synth.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic dataset with scripted model predictions"};
  chexpo::synth::Options options;
  chexpo::PipelineConfig config;
  std::string out_dir = "synthetic";
  app.add_option("-n,--samples", options.samples, "Number of samples")->check(CLI::PositiveNumber);
  app.add_option("--seed", options.seed, "Generator seed");
  app.add_option("--dim", options.dim, "Embedding dimension")->check(CLI::PositiveNumber);
  app.add_option("--embedder-seed", options.embedder_seed, "Seed of the hash text embedder");
  app.add_option("--valid-fraction", options.valid_fraction)->check(CLI::Range(0.0, 1.0));
  app.add_option("--test-fraction", options.test_fraction)->check(CLI::Range(0.0, 1.0));
  app.add_option("--gamma", config.gamma, "Sampling ratio written to config.json");
  app.add_option("--top-k", config.top_k, "Neighbors per hard sample written to config.json");
  app.add_option("--sigma", config.sigma, "Confidence threshold written to config.json");
  app.add_option("-o,--out-dir", out_dir, "Output directory");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto data = chexpo::synth::generate(options);
    chexpo::synth::write_dataset(data, out_dir, options, config);
    std::cout << "wrote " << data.samples.size() << " samples to " << out_dir << "\n";
  } catch (const chexpo::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == chexpo::ErrorKind::Config ? 2 : 3;
  }
  return 0;
}
