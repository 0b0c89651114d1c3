// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "chexpo/error.hpp"
#include "chexpo/types.hpp"

namespace chexpo::testing {

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("chexpo-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Sample sample(std::string id, QuestionType q, AnswerType a, std::vector<std::string> answer,
                     std::string explanation = "", Split split = Split::Train) {
  Sample s;
  s.id = id;
  s.image_ids = {"img-" + id};
  s.question = "question " + id;
  s.answer = std::move(answer);
  s.explanation = std::move(explanation);
  s.question_type = q;
  s.answer_type = a;
  s.split = split;
  return s;
}

inline PredictionRecord prediction(std::string id, std::string answer, std::vector<double> logprobs,
                                   std::string explanation = "") {
  return PredictionRecord{std::move(id), std::move(answer), std::move(explanation),
                          std::move(logprobs), "test-model"};
}

}  // namespace chexpo::testing

/// Asserts that `stmt` throws chexpo::Error with the given code.
#define EXPECT_CHEXPO_ERROR(stmt, expected_code)                                   \
  do {                                                                             \
    try {                                                                          \
      stmt;                                                                        \
      ADD_FAILURE() << "expected error '" << (expected_code) << "', none thrown";  \
    } catch (const ::chexpo::Error& e_) {                                          \
      EXPECT_EQ(e_.code(), (expected_code)) << e_.what();                          \
    }                                                                              \
  } while (0)
