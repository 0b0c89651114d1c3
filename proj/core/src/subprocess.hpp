// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace chexpo::detail {

/// Child process whose stdin and stdout are one end of a socket pair.
/// Writes never raise SIGPIPE; reads honour an inactivity timeout.
class Subprocess {
 public:
  explicit Subprocess(const std::vector<std::string>& argv);
  ~Subprocess();
  Subprocess(const Subprocess&) = delete;
  Subprocess& operator=(const Subprocess&) = delete;

  /// Feeds `input`, signals EOF, and collects stdout until the child closes
  /// it. Throws Error(Provider, "provider-timeout") after `timeout` without
  /// progress.
  std::string communicate(std::string_view input, std::chrono::milliseconds timeout);

  void write_all(std::string_view data, std::chrono::milliseconds timeout);
  /// One line without its terminator; nullopt on EOF.
  std::optional<std::string> read_line(std::chrono::milliseconds timeout);

  /// Closes our end and reaps the child; returns its exit status (-1 if killed).
  int wait();

 private:
  int fd_ = -1;
  int pid_ = -1;
  std::string buffer_;
  bool eof_ = false;
};

/// Splits a command string on whitespace.
std::vector<std::string> split_command(std::string_view command);

}  // namespace chexpo::detail
