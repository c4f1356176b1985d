#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "dataset_io.hpp"
#include "types.hpp"

namespace echorec {

namespace detail {

inline std::uint32_t crc32(const unsigned char* data, std::size_t n, std::uint32_t crc = 0) {
  static std::uint32_t table[256];
  static bool init = false;
  if (!init) {
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      table[i] = c;
    }
    init = true;
  }
  crc ^= 0xFFFFFFFFu;
  for (std::size_t i = 0; i < n; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

inline std::uint32_t adler32(const unsigned char* data, std::size_t n) {
  std::uint32_t a = 1, b = 0;
  for (std::size_t i = 0; i < n; ++i) {
    a = (a + data[i]) % 65521u;
    b = (b + a) % 65521u;
  }
  return (b << 16) | a;
}

inline void put_u32_be(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

inline void png_chunk(std::string& out, const char type[4], const std::string& data) {
  put_u32_be(out, static_cast<std::uint32_t>(data.size()));
  std::string body(type, 4);
  body += data;
  out += body;
  put_u32_be(out, crc32(reinterpret_cast<const unsigned char*>(body.data()), body.size()));
}

/// Minimal 8-bit grayscale PNG; the IDAT stream uses stored (uncompressed)
/// deflate blocks so the output bytes are fully deterministic.
inline std::string encode_gray_png(const std::vector<unsigned char>& gray, int height, int width) {
  std::string png("\x89PNG\r\n\x1a\n", 8);

  std::string ihdr;
  put_u32_be(ihdr, static_cast<std::uint32_t>(width));
  put_u32_be(ihdr, static_cast<std::uint32_t>(height));
  ihdr += std::string("\x08\x00\x00\x00\x00", 5); // depth 8, grayscale, no interlace
  png_chunk(png, "IHDR", ihdr);

  std::string raw;
  raw.reserve(static_cast<std::size_t>(height) * (width + 1));
  for (int r = 0; r < height; ++r) {
    raw.push_back('\0'); // filter type none
    raw.append(reinterpret_cast<const char*>(gray.data()) +
                   static_cast<std::size_t>(r) * width,
               static_cast<std::size_t>(width));
  }

  std::string idat("\x78\x01", 2);
  std::size_t off = 0;
  while (true) {
    const std::size_t chunk = std::min<std::size_t>(raw.size() - off, 65535);
    const bool final = off + chunk == raw.size();
    idat.push_back(final ? '\x01' : '\x00'); // BFINAL, BTYPE=00 (stored)
    idat.push_back(static_cast<char>(chunk & 0xff));
    idat.push_back(static_cast<char>((chunk >> 8) & 0xff));
    idat.push_back(static_cast<char>(~chunk & 0xff));
    idat.push_back(static_cast<char>((~chunk >> 8) & 0xff));
    idat.append(raw, off, chunk);
    off += chunk;
    if (final) break;
  }
  put_u32_be(idat, adler32(reinterpret_cast<const unsigned char*>(raw.data()), raw.size()));
  png_chunk(png, "IDAT", idat);
  png_chunk(png, "IEND", "");
  return png;
}

} // namespace detail

/// 8-bit grayscale export with linear windowing. byte = round((v-lo)*255/(hi-lo)),
/// half-way values rounding away from zero, clamped to [0, 255]. Default
/// window is (0, max(image)).
inline void export_png(const MatrixXd& image, const std::string& path,
                       std::optional<std::pair<double, double>> window = std::nullopt) {
  if (!image.allFinite()) throw validation_error("export_png: non-finite image");
  const double lo = window ? window->first : 0.0;
  const double hi = window ? window->second : image.maxCoeff();
  const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
  const int h = static_cast<int>(image.rows());
  const int w = static_cast<int>(image.cols());
  std::vector<unsigned char> gray(static_cast<std::size_t>(h) * w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      const long v = std::lround((image(r, c) - lo) * scale);
      gray[static_cast<std::size_t>(r) * w + c] =
          static_cast<unsigned char>(std::clamp(v, 0l, 255l));
    }
  detail::write_file(path, detail::encode_gray_png(gray, h, w));
}

} // namespace echorec
