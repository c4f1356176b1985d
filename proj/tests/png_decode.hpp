// Minimal decoder for the stored-deflate grayscale PNGs written by
// export_png, for test-side verification of pixel bytes.
#pragma once

#include <catch2/catch_amalgamated.hpp>
#include <cstdint>
#include <string>
#include <vector>

namespace testutil {

inline std::vector<unsigned char> decode_png_gray(const std::string& bytes, int& h, int& w) {
  REQUIRE(bytes.size() > 8);
  std::size_t p = 8;
  std::string idat;
  auto be32 = [&](std::size_t at) {
    return (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at])) << 24) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + 1])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + 2])) << 8) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[at + 3]));
  };
  h = w = 0;
  while (p + 8 <= bytes.size()) {
    const std::uint32_t len = be32(p);
    const std::string type = bytes.substr(p + 4, 4);
    if (type == "IHDR") {
      w = static_cast<int>(be32(p + 8));
      h = static_cast<int>(be32(p + 12));
      REQUIRE(bytes[p + 16] == 8);  // bit depth
      REQUIRE(bytes[p + 17] == 0);  // grayscale
    } else if (type == "IDAT") {
      idat += bytes.substr(p + 8, len);
    }
    p += 12 + len;
  }
  // zlib header, then stored blocks: [final][len lo][len hi][~len lo][~len hi][data]
  std::string raw;
  std::size_t q = 2;
  while (q < idat.size() - 4) {
    const bool final = idat[q] & 1;
    const std::size_t len =
        static_cast<unsigned char>(idat[q + 1]) |
        (static_cast<std::size_t>(static_cast<unsigned char>(idat[q + 2])) << 8);
    raw += idat.substr(q + 5, len);
    q += 5 + len;
    if (final) break;
  }
  REQUIRE(raw.size() == static_cast<std::size_t>(h) * (w + 1));
  std::vector<unsigned char> gray(static_cast<std::size_t>(h) * w);
  for (int r = 0; r < h; ++r) {
    REQUIRE(raw[static_cast<std::size_t>(r) * (w + 1)] == 0); // filter none
    for (int c = 0; c < w; ++c)
      gray[static_cast<std::size_t>(r) * w + c] =
          static_cast<unsigned char>(raw[static_cast<std::size_t>(r) * (w + 1) + 1 + c]);
  }
  return gray;
}

} // namespace testutil
