// Minimal external-codec shim speaking the planar piping contract: encodes
// stdin with the toy intra codec, stores the stream at the given path and
// writes the decoded round-trip to stdout.
//
// usage: rawtoy <width> <height> <frames> <coded_path> [quality]

#include <unistd.h>

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "cfe/codec.hpp"
#include "cfe/external_codec.hpp"

namespace {

bool read_all(std::vector<std::uint8_t>& buf) {
  std::size_t off = 0;
  while (off < buf.size()) {
    const ssize_t n = ::read(STDIN_FILENO, buf.data() + off, buf.size() - off);
    if (n <= 0) return false;
    off += static_cast<std::size_t>(n);
  }
  return true;
}

bool write_all(const std::vector<std::uint8_t>& buf) {
  std::size_t off = 0;
  while (off < buf.size()) {
    const ssize_t n = ::write(STDOUT_FILENO, buf.data() + off, buf.size() - off);
    if (n <= 0) return false;
    off += static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 5 || argc > 6) {
    std::fprintf(stderr, "usage: rawtoy <width> <height> <frames> <coded_path> [quality]\n");
    return 1;
  }
  const int w = std::atoi(argv[1]);
  const int h = std::atoi(argv[2]);
  const int f = std::atoi(argv[3]);
  const std::string coded_path = argv[4];
  const int quality = argc == 6 ? std::atoi(argv[5]) : 50;
  if (w <= 0 || h <= 0 || f <= 0) {
    std::fprintf(stderr, "rawtoy: bad dimensions\n");
    return 1;
  }

  try {
    std::vector<std::uint8_t> planar(static_cast<std::size_t>(f) * h * w * 3);
    if (!read_all(planar)) {
      std::fprintf(stderr, "rawtoy: short read on stdin\n");
      return 2;
    }
    const cfe::Clip clip = cfe::detail::from_planar(planar, f, h, w);
    const cfe::CodedStream s = cfe::encode_intra(clip, quality);
    cfe::save_stream(coded_path, s);
    const cfe::Clip decoded = cfe::decode_intra(s);
    if (!write_all(cfe::detail::to_planar(decoded))) {
      std::fprintf(stderr, "rawtoy: short write on stdout\n");
      return 2;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "rawtoy: %s\n", e.what());
    return 2;
  }
  return 0;
}
