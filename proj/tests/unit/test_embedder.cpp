// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "chexpo/embedder.hpp"
#include "chexpo/retrieval.hpp"
#include "test_util.hpp"

namespace chexpo {
namespace {

TEST(HashEmbedder, DeterministicAndNormalizationAware) {
  HashProjectionEmbedder e(32, 7);
  const auto a = e.embed("Left lung opacity");
  EXPECT_EQ(a.size(), 32u);
  EXPECT_EQ(a, e.embed("  left   LUNG opacity "));
  EXPECT_NE(a, HashProjectionEmbedder(32, 8).embed("Left lung opacity"));
  EXPECT_NE(a, e.embed("right lung opacity"));
}

TEST(HashEmbedder, NeverZeroAndOverlapRaisesSimilarity) {
  HashProjectionEmbedder e(64, 0);
  EXPECT_GT(l2_norm(e.embed("")), 0.0);
  EXPECT_GT(l2_norm(e.embed("   ")), 0.0);
  const auto base = e.embed("moderate pleural effusion on the left");
  const auto close = e.embed("small pleural effusion on the left");
  const auto far = e.embed("patient gender is male");
  EXPECT_GT(cosine(base, close), cosine(base, far));
}

TEST(MakeEmbedder, Specs) {
  EXPECT_EQ(make_embedder("hash", 16, 1)->dim(), 16u);
  EXPECT_CHEXPO_ERROR(make_embedder("bert", 16, 1), "invalid-embedder");
  EXPECT_CHEXPO_ERROR(make_embedder("cmd:", 16, 1), "invalid-embedder");
}

TEST(CommandEmbedder, SpeaksJsonLines) {
  // replies with a fixed 3-dim vector per request line
  auto e = make_embedder(
      "cmd:sh -c 'while read -r line; do echo \"{\\\"vector\\\": [1, 0.5, -2]}\"; done'", 3, 0);
  EXPECT_EQ(e->embed("first"), (std::vector<float>{1, 0.5f, -2}));
  EXPECT_EQ(e->embed("second"), (std::vector<float>{1, 0.5f, -2}));
}

TEST(CommandEmbedder, WrongDimIsAContractBreach) {
  auto e = make_embedder("cmd:sh -c 'while read -r line; do echo \"{\\\"vector\\\": [1]}\"; done'", 3, 0);
  try {
    e->embed("x");
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::Provider);
    EXPECT_EQ(err.code(), "embedder-contract");
  }
}

TEST(CommandEmbedder, EarlyExit) {
  auto e = make_embedder("cmd:true", 3, 0);
  EXPECT_CHEXPO_ERROR(e->embed("x"), "embedder-closed");
}

}  // namespace
}  // namespace chexpo
