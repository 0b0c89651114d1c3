// SPDX-License-Identifier: Apache-2.0
#include "chexpo/error.hpp"

#include <utility>

namespace chexpo {

namespace {

std::string format_message(const std::string& code, const std::string& detail,
                           std::optional<std::size_t> line) {
  std::string msg = code;
  if (line) msg += " (line " + std::to_string(*line) + ")";
  if (!detail.empty()) msg += ": " + detail;
  return msg;
}

}  // namespace

Error::Error(ErrorKind kind, std::string code, std::string detail,
             std::optional<std::size_t> line)
    : std::runtime_error(format_message(code, detail, line)),
      kind_(kind),
      code_(std::move(code)),
      detail_(std::move(detail)),
      line_(line) {}

void throw_config(std::string code, std::string detail) {
  throw Error(ErrorKind::Config, std::move(code), std::move(detail));
}

void throw_data(std::string code, std::string detail, std::optional<std::size_t> line) {
  throw Error(ErrorKind::Data, std::move(code), std::move(detail), line);
}

void throw_provider(std::string code, std::string detail) {
  throw Error(ErrorKind::Provider, std::move(code), std::move(detail));
}

}  // namespace chexpo
