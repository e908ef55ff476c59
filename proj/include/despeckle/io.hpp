#ifndef DESPECKLE_IO_HPP
#define DESPECKLE_IO_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "despeckle/image.hpp"

namespace despeckle {

// Raw-double interchange: 16-byte header (8-byte magic, uint32 rows,
// uint32 cols, little-endian) followed by rows*cols float64 little-endian,
// row-major. Lossless carrier between pipeline stages.
inline constexpr std::array<char, 8> kRawMagic = {'R', 'A', 'W', 'D',
                                                  'B', 'L', '1', '\0'};

namespace detail {

inline void put_u32_le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32_le(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

// Skips whitespace and '#' comments, then reads one ASCII token.
inline std::string pnm_token(std::istream& is) {
  std::string tok;
  int c = is.get();
  for (;;) {
    while (c == ' ' || c == '\t' || c == '\r' || c == '\n') c = is.get();
    if (c == '#') {
      while (c != '\n' && c != EOF) c = is.get();
      continue;
    }
    break;
  }
  while (c != EOF && c != ' ' && c != '\t' && c != '\r' && c != '\n') {
    tok.push_back(static_cast<char>(c));
    c = is.get();
  }
  if (tok.empty()) throw std::runtime_error("PGM: truncated header");
  return tok;
}

}  // namespace detail

inline void write_raw_double(const Image& im, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os.write(kRawMagic.data(), kRawMagic.size());
  detail::put_u32_le(os, static_cast<std::uint32_t>(im.rows()));
  detail::put_u32_le(os, static_cast<std::uint32_t>(im.cols()));
  for (double v : im.pixels()) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

/// 8-bit loads map raw value r to intensity r + 1 so the log transform is
/// always defined; 16-bit likewise. write_pgm inverts the mapping.
inline Image read_pgm(std::istream& is) {
  std::string magic = detail::pnm_token(is);
  if (magic != "P5") throw std::runtime_error("PGM: expected binary P5");
  const std::size_t cols = std::stoul(detail::pnm_token(is));
  const std::size_t rows = std::stoul(detail::pnm_token(is));
  const unsigned long maxval = std::stoul(detail::pnm_token(is));
  if (rows == 0 || cols == 0 || maxval == 0 || maxval > 65535)
    throw std::runtime_error("PGM: bad header");
  const bool wide = maxval > 255;
  std::vector<char> buf(rows * cols * (wide ? 2 : 1));
  is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (is.gcount() != static_cast<std::streamsize>(buf.size()))
    throw std::runtime_error("PGM: truncated pixel data");
  Image im(rows, cols);
  auto& px = im.pixels();
  for (std::size_t k = 0; k < rows * cols; ++k) {
    unsigned v;
    if (wide) {
      // 16-bit samples are big-endian
      v = (static_cast<unsigned char>(buf[2 * k]) << 8) |
          static_cast<unsigned char>(buf[2 * k + 1]);
    } else {
      v = static_cast<unsigned char>(buf[k]);
    }
    px[k] = static_cast<double>(v) + 1.0;
  }
  return im;
}

inline void write_pgm(const Image& im, const std::string& path, int maxval = 255,
                      std::size_t* clamped_count = nullptr) {
  if (maxval < 1 || maxval > 65535)
    throw std::invalid_argument("write_pgm: maxval out of range");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << "P5\n" << im.cols() << ' ' << im.rows() << '\n' << maxval << '\n';
  std::size_t clamped = 0;
  const bool wide = maxval > 255;
  for (double v : im.pixels()) {
    double q = std::round(v - 1.0);
    if (q < 0.0) {
      q = 0.0;
      ++clamped;
    } else if (q > maxval) {
      q = maxval;
      ++clamped;
    }
    const unsigned iv = static_cast<unsigned>(q);
    if (wide) {
      const unsigned char b[2] = {static_cast<unsigned char>(iv >> 8),
                                  static_cast<unsigned char>(iv & 0xff)};
      os.write(reinterpret_cast<const char*>(b), 2);
    } else {
      const unsigned char b = static_cast<unsigned char>(iv);
      os.write(reinterpret_cast<const char*>(&b), 1);
    }
  }
  if (clamped_count) *clamped_count = clamped;
  if (!os) throw std::runtime_error("write failed: " + path);
}

/// Reads either format, deciding by the leading magic bytes.
inline Image read_image(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::array<char, 8> head{};
  is.read(head.data(), head.size());
  if (is.gcount() >= 2 && head[0] == 'P' && head[1] == '5') {
    is.clear();
    is.seekg(0);
    return read_pgm(is);
  }
  if (is.gcount() == 8 && head == kRawMagic) {
    const std::size_t rows = detail::get_u32_le(is);
    const std::size_t cols = detail::get_u32_le(is);
    if (rows == 0 || cols == 0) throw std::runtime_error("raw image: bad header");
    Image im(rows, cols);
    std::vector<char> buf(rows * cols * 8);
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (is.gcount() != static_cast<std::streamsize>(buf.size()))
      throw std::runtime_error("raw image: truncated data");
    auto& px = im.pixels();
    for (std::size_t k = 0; k < rows * cols; ++k) {
      std::uint64_t bits = 0;
      for (int i = 7; i >= 0; --i)
        bits = (bits << 8) |
               static_cast<unsigned char>(buf[8 * k + static_cast<std::size_t>(i)]);
      double v;
      std::memcpy(&v, &bits, 8);
      px[k] = v;
    }
    return im;
  }
  throw std::runtime_error("unrecognized image format: " + path);
}

/// Writes PGM when the path ends in .pgm, raw-double otherwise.
inline void write_image(const Image& im, const std::string& path,
                        int maxval = 255, std::size_t* clamped_count = nullptr) {
  const bool pgm = path.size() >= 4 && path.compare(path.size() - 4, 4, ".pgm") == 0;
  if (pgm) {
    write_pgm(im, path, maxval, clamped_count);
  } else {
    write_raw_double(im, path);
    if (clamped_count) *clamped_count = 0;
  }
}

}  // namespace despeckle

#endif  // DESPECKLE_IO_HPP
