#pragma once

// Raw clip container ".cfvr" plus a PPM (P6) sequence importer/exporter.
//
// .cfvr layout: magic "CFVR", then little-endian u32 width, u32 height,
// u32 frames, then frames*height*width*3 bytes of interleaved RGB.
//
// PPM sequences are directories of zero-padded numbered P6 files
// (000000.ppm, 000001.ppm, ...), all with identical dimensions.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "cfe/error.hpp"
#include "cfe/geometry.hpp"

namespace cfe {

namespace detail {

inline void put_u32le(std::ostream& os, std::uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
               static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
  os.write(b, 4);
}

inline std::uint32_t get_u32le(std::istream& is, const char* what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw FormatError(std::string("cfvr: truncated while reading ") + what);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace detail

inline void write_cfvr(const std::string& path, const Clip& clip) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open for writing: " + path);
  os.write("CFVR", 4);
  detail::put_u32le(os, static_cast<std::uint32_t>(clip.width));
  detail::put_u32le(os, static_cast<std::uint32_t>(clip.height));
  detail::put_u32le(os, static_cast<std::uint32_t>(clip.frames));
  os.write(reinterpret_cast<const char*>(clip.samples.data()),
           static_cast<std::streamsize>(clip.samples.size()));
  if (!os) throw Error("write failed: " + path);
}

inline Clip read_cfvr(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "CFVR")
    throw FormatError("cfvr: bad magic in " + path);
  const std::uint32_t w = detail::get_u32le(is, "width");
  const std::uint32_t h = detail::get_u32le(is, "height");
  const std::uint32_t f = detail::get_u32le(is, "frames");
  if (w == 0 || h == 0 || w > (1u << 20) || h > (1u << 20) || f > (1u << 24))
    throw FormatError("cfvr: implausible dimensions in " + path);
  Clip clip(static_cast<int>(f), static_cast<int>(h), static_cast<int>(w));
  if (!is.read(reinterpret_cast<char*>(clip.samples.data()),
               static_cast<std::streamsize>(clip.samples.size())))
    throw FormatError("cfvr: truncated sample data in " + path);
  return clip;
}

inline void write_ppm_frame(const std::string& path, const Clip& clip, int frame) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open for writing: " + path);
  os << "P6\n" << clip.width << " " << clip.height << "\n255\n";
  const std::size_t frame_bytes =
      static_cast<std::size_t>(clip.height) * clip.width * kChannels;
  os.write(reinterpret_cast<const char*>(clip.samples.data() +
                                         static_cast<std::size_t>(frame) * frame_bytes),
           static_cast<std::streamsize>(frame_bytes));
  if (!os) throw Error("write failed: " + path);
}

inline void write_ppm_sequence(const std::string& dir, const Clip& clip) {
  std::filesystem::create_directories(dir);
  for (int f = 0; f < clip.frames; ++f) {
    char name[16];
    std::snprintf(name, sizeof(name), "%06d.ppm", f);
    write_ppm_frame((std::filesystem::path(dir) / name).string(), clip, f);
  }
}

namespace detail {

// PPM header token: skips whitespace and '#' comments.
inline int ppm_int(std::istream& is, const std::string& path) {
  int c = is.get();
  while (c == '#' || std::isspace(c)) {
    if (c == '#')
      while (c != '\n' && c != EOF) c = is.get();
    c = is.get();
  }
  if (!std::isdigit(c)) throw FormatError("ppm: bad header in " + path);
  int v = 0;
  while (std::isdigit(c)) {
    v = v * 10 + (c - '0');
    c = is.get();
  }
  return v;
}

inline void read_ppm_into(const std::string& path, Clip& clip, int frame) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open: " + path);
  char p, six;
  is.get(p);
  is.get(six);
  if (p != 'P' || six != '6') throw FormatError("ppm: not a P6 file: " + path);
  const int w = ppm_int(is, path);
  const int h = ppm_int(is, path);
  const int maxval = ppm_int(is, path);
  if (maxval != 255) throw FormatError("ppm: only maxval 255 supported: " + path);
  if (w != clip.width || h != clip.height)
    throw DimensionError("ppm: frame size mismatch in sequence: " + path);
  const std::size_t frame_bytes = static_cast<std::size_t>(h) * w * kChannels;
  if (!is.read(reinterpret_cast<char*>(clip.samples.data() +
                                       static_cast<std::size_t>(frame) * frame_bytes),
               static_cast<std::streamsize>(frame_bytes)))
    throw FormatError("ppm: truncated pixel data: " + path);
}

}  // namespace detail

inline Clip read_ppm_sequence(const std::string& dir) {
  std::vector<std::string> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".ppm")
      files.push_back(e.path().string());
  if (files.empty()) throw Error("no .ppm files in " + dir);
  std::sort(files.begin(), files.end());

  std::ifstream probe(files[0], std::ios::binary);
  if (!probe) throw Error("cannot open: " + files[0]);
  char p, six;
  probe.get(p);
  probe.get(six);
  if (p != 'P' || six != '6') throw FormatError("ppm: not a P6 file: " + files[0]);
  const int w = detail::ppm_int(probe, files[0]);
  const int h = detail::ppm_int(probe, files[0]);
  probe.close();

  Clip clip(static_cast<int>(files.size()), h, w);
  for (std::size_t i = 0; i < files.size(); ++i)
    detail::read_ppm_into(files[i], clip, static_cast<int>(i));
  return clip;
}

// Dispatch on path shape: directories hold PPM sequences, files are .cfvr.
inline Clip load_clip(const std::string& path) {
  if (std::filesystem::is_directory(path)) return read_ppm_sequence(path);
  return read_cfvr(path);
}

inline void save_clip(const std::string& path, const Clip& clip) {
  if (std::filesystem::is_directory(path) ||
      std::filesystem::path(path).extension() == "")
    write_ppm_sequence(path, clip);
  else
    write_cfvr(path, clip);
}

}  // namespace cfe
