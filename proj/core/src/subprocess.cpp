// SPDX-License-Identifier: Apache-2.0
#include "subprocess.hpp"

#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>
#include <wordexp.h>

#include <cerrno>
#include <cstring>

#include "chexpo/error.hpp"
#include "chexpo/text.hpp"

extern char** environ;

namespace chexpo::detail {

namespace {

int poll_ms(std::chrono::milliseconds timeout) {
  return static_cast<int>(std::min<std::chrono::milliseconds::rep>(timeout.count(), 1 << 30));
}

}  // namespace

std::vector<std::string> split_command(std::string_view command) {
  wordexp_t words;
  const std::string text(command);
  const int rc = ::wordexp(text.c_str(), &words, WRDE_NOCMD);
  if (rc != 0) {
    if (rc == WRDE_NOSPACE) ::wordfree(&words);
    throw_config("invalid-command", "cannot parse '" + text + "'");
  }
  std::vector<std::string> argv(words.we_wordv, words.we_wordv + words.we_wordc);
  ::wordfree(&words);
  return argv;
}

Subprocess::Subprocess(const std::vector<std::string>& argv) {
  if (argv.empty()) throw_provider("provider-spawn-failed", "empty command");
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) {
    throw_provider("provider-spawn-failed", std::strerror(errno));
  }
  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_adddup2(&actions, fds[1], STDIN_FILENO);
  posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);

  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  pid_t pid = -1;
  const int rc = ::posix_spawnp(&pid, args[0], &actions, nullptr, args.data(), environ);
  posix_spawn_file_actions_destroy(&actions);
  ::close(fds[1]);
  if (rc != 0) {
    ::close(fds[0]);
    throw_provider("provider-spawn-failed", argv[0] + ": " + std::strerror(rc));
  }
  fd_ = fds[0];
  pid_ = pid;
}

Subprocess::~Subprocess() {
  if (pid_ > 0) {
    ::kill(pid_, SIGKILL);
    wait();
  } else if (fd_ >= 0) {
    ::close(fd_);
  }
}

void Subprocess::write_all(std::string_view data, std::chrono::milliseconds timeout) {
  std::size_t off = 0;
  while (off < data.size()) {
    pollfd p{fd_, POLLOUT, 0};
    const int r = ::poll(&p, 1, poll_ms(timeout));
    if (r == 0) throw_provider("provider-timeout", "no progress writing to child");
    if (r < 0) {
      if (errno == EINTR) continue;
      throw_provider("provider-io", std::strerror(errno));
    }
    const ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      if (errno == EPIPE || errno == ECONNRESET) throw_provider("provider-closed", "child closed its input");
      throw_provider("provider-io", std::string("write: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> Subprocess::read_line(std::chrono::milliseconds timeout) {
  while (true) {
    if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    if (eof_) {
      if (buffer_.empty()) return std::nullopt;
      std::string line = std::move(buffer_);
      buffer_.clear();
      return line;
    }
    pollfd p{fd_, POLLIN, 0};
    const int r = ::poll(&p, 1, poll_ms(timeout));
    if (r == 0) throw_provider("provider-timeout", "no output from child");
    if (r < 0) {
      if (errno == EINTR) continue;
      throw_provider("provider-io", std::strerror(errno));
    }
    char chunk[65536];
    ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      // a child that exits with our request unread resets the socket
      if (errno != ECONNRESET) throw_provider("provider-io", std::string("read: ") + std::strerror(errno));
      n = 0;
    }
    if (n == 0) {
      eof_ = true;
    } else {
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }
}

std::string Subprocess::communicate(std::string_view input, std::chrono::milliseconds timeout) {
  std::string output;
  std::size_t off = 0;
  bool write_open = true;
  if (input.empty()) {
    ::shutdown(fd_, SHUT_WR);
    write_open = false;
  }
  while (true) {
    pollfd p{fd_, static_cast<short>(POLLIN | (write_open ? POLLOUT : 0)), 0};
    const int r = ::poll(&p, 1, poll_ms(timeout));
    if (r == 0) throw_provider("provider-timeout", "child made no progress");
    if (r < 0) {
      if (errno == EINTR) continue;
      throw_provider("provider-io", std::strerror(errno));
    }
    if (write_open && (p.revents & POLLOUT)) {
      const ssize_t n = ::send(fd_, input.data() + off, input.size() - off, MSG_NOSIGNAL | MSG_DONTWAIT);
      if (n < 0 && errno != EAGAIN && errno != EINTR) {
        // The child stopped reading; keep collecting whatever it wrote.
        write_open = false;
        ::shutdown(fd_, SHUT_WR);
      } else if (n > 0) {
        off += static_cast<std::size_t>(n);
        if (off == input.size()) {
          write_open = false;
          ::shutdown(fd_, SHUT_WR);
        }
      }
    }
    if (p.revents & (POLLIN | POLLHUP | POLLERR)) {
      char chunk[65536];
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, MSG_DONTWAIT);
      if (n == 0) break;
      if (n > 0) {
        output.append(chunk, static_cast<std::size_t>(n));
      } else if (errno != EAGAIN && errno != EINTR) {
        if (errno == ECONNRESET) break;
        throw_provider("provider-io", std::string("read: ") + std::strerror(errno));
      }
    }
  }
  return output;
}

int Subprocess::wait() {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
  if (pid_ <= 0) return -1;
  int status = 0;
  while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
  }
  pid_ = -1;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace chexpo::detail
