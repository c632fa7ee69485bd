#pragma once

// Adapter for real codecs behind a shell template. Piping contract:
//
//   - the command receives raw video on stdin: for each frame, the full R
//     plane (height*width bytes), then G, then B, frames in order
//   - it writes the decoded round-trip to stdout in the same planar layout
//   - it writes its compressed representation to the path substituted for
//     {coded}; the file's size is the measured stream size
//   - placeholders {w} {h} {f} {coded} are replaced before execution
//
// A command exiting 127 (shell could not find the binary) maps to
// FeatureUnavailable so suites can skip cleanly on machines without the tool.

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <csignal>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "cfe/error.hpp"
#include "cfe/geometry.hpp"

namespace cfe {

struct ExternalResult {
  Clip decoded;
  std::uint64_t coded_bytes = 0;
  double bpp = 0.0;
  std::string command;  // fully substituted, recorded for reports
  std::string fourcc;
};

namespace detail {

inline std::string substitute(std::string tpl, const std::string& key,
                              const std::string& value) {
  std::size_t at = 0;
  while ((at = tpl.find(key, at)) != std::string::npos) {
    tpl.replace(at, key.size(), value);
    at += value.size();
  }
  return tpl;
}

inline std::vector<std::uint8_t> to_planar(const Clip& c) {
  std::vector<std::uint8_t> out(c.samples.size());
  std::size_t k = 0;
  for (int f = 0; f < c.frames; ++f)
    for (int ch = 0; ch < kChannels; ++ch)
      for (int y = 0; y < c.height; ++y)
        for (int x = 0; x < c.width; ++x) out[k++] = c.at(f, y, x, ch);
  return out;
}

inline Clip from_planar(const std::vector<std::uint8_t>& buf, int frames,
                        int height, int width) {
  Clip c(frames, height, width);
  std::size_t k = 0;
  for (int f = 0; f < frames; ++f)
    for (int ch = 0; ch < kChannels; ++ch)
      for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) c.at(f, y, x, ch) = buf[k++];
  return c;
}

}  // namespace detail

inline ExternalResult run_external(const Clip& clip, const std::string& cmd_template,
                                   const std::string& fourcc = "",
                                   const std::string& coded_out = "") {
  // a child closing its stdin early must not kill the host process
  static const bool sigpipe_ignored = [] {
    std::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)sigpipe_ignored;

  namespace fs = std::filesystem;
  const bool keep_coded = !coded_out.empty();
  std::string coded_path = coded_out;
  if (!keep_coded) {
    coded_path = (fs::temp_directory_path() / "cfe-coded-XXXXXX").string();
    const int fd = ::mkstemp(coded_path.data());
    if (fd < 0) throw Error("cannot create temp file for coded stream");
    ::close(fd);
  }

  std::string cmd = cmd_template;
  cmd = detail::substitute(cmd, "{w}", std::to_string(clip.width));
  cmd = detail::substitute(cmd, "{h}", std::to_string(clip.height));
  cmd = detail::substitute(cmd, "{f}", std::to_string(clip.frames));
  cmd = detail::substitute(cmd, "{coded}", coded_path);

  int in_pipe[2], out_pipe[2];
  if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0)
    throw Error("pipe creation failed");

  const pid_t pid = ::fork();
  if (pid < 0) throw Error("fork failed");
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::execl("/bin/sh", "sh", "-c", cmd.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);

  const std::vector<std::uint8_t> planar = detail::to_planar(clip);
  std::thread writer([&planar, fd = in_pipe[1]] {
    std::size_t off = 0;
    while (off < planar.size()) {
      const ssize_t n = ::write(fd, planar.data() + off, planar.size() - off);
      if (n <= 0) break;
      off += static_cast<std::size_t>(n);
    }
    ::close(fd);
  });

  std::vector<std::uint8_t> out;
  std::uint8_t buf[1 << 16];
  for (;;) {
    const ssize_t n = ::read(out_pipe[0], buf, sizeof buf);
    if (n <= 0) break;
    out.insert(out.end(), buf, buf + n);
  }
  ::close(out_pipe[0]);
  writer.join();

  int status = 0;
  ::waitpid(pid, &status, 0);
  const auto cleanup = [&] {
    if (!keep_coded) ::unlink(coded_path.c_str());
  };
  if (WIFEXITED(status) && WEXITSTATUS(status) == 127) {
    cleanup();
    throw FeatureUnavailable("external codec not available: " + cmd);
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    cleanup();
    throw Error("external codec failed (status " + std::to_string(status) +
                "): " + cmd);
  }

  const std::size_t expect = clip.samples.size();
  if (out.size() != expect) {
    cleanup();
    throw FormatError("external codec returned " + std::to_string(out.size()) +
                      " bytes, expected " + std::to_string(expect));
  }

  ExternalResult r;
  r.decoded = detail::from_planar(out, clip.frames, clip.height, clip.width);
  std::error_code ec;
  const auto sz = fs::file_size(coded_path, ec);
  r.coded_bytes = ec ? 0 : static_cast<std::uint64_t>(sz);
  cleanup();
  const double px = static_cast<double>(clip.frames) * clip.height * clip.width;
  r.bpp = static_cast<double>(r.coded_bytes) * 8.0 / px;
  r.command = cmd;
  r.fourcc = fourcc;
  return r;
}

}  // namespace cfe
