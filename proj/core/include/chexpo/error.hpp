// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace chexpo {

/// Broad failure class. The CLI maps these onto process exit codes.
enum class ErrorKind {
  Config,    ///< bad configuration or arguments (exit 2)
  Data,      ///< malformed or invariant-violating input data (exit 3)
  Provider,  ///< forward provider or embedder contract breach (exit 4)
};

/// Every library failure carries a stable kebab-case code ("bad-magic",
/// "positive-logprob", ...) and, for line-oriented inputs, a 1-based line.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, std::string detail = {},
        std::optional<std::size_t> line = std::nullopt);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }
  std::optional<std::size_t> line() const noexcept { return line_; }

 private:
  ErrorKind kind_;
  std::string code_;
  std::string detail_;
  std::optional<std::size_t> line_;
};

[[noreturn]] void throw_config(std::string code, std::string detail = {});
[[noreturn]] void throw_data(std::string code, std::string detail = {},
                             std::optional<std::size_t> line = std::nullopt);
[[noreturn]] void throw_provider(std::string code, std::string detail = {});

}  // namespace chexpo
