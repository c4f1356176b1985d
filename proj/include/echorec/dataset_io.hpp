#pragma once

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "types.hpp"

namespace echorec {

/// Dataset files are a human-readable text header followed by a raw payload
/// of little-endian float32 (real, imaginary) pairs:
///
///   MECSET 1
///   role images|kspace|mask
///   height H
///   width W
///   echoes n                                   (images, kspace)
///   dtype complex64                            (images, kspace)
///   byte_order little                          (images, kspace)
///   noise_sigma <g17>                          (kspace)
///   mask <echo> <seed> <center_fraction> <k> <line...>   (kspace, per echo)
///   seed <u64>                                 (mask)
///   center_fraction <g17>                      (mask)
///   lines <k> <line...>                        (mask)
///   payload_bytes N
///   data
///   <payload>
///
/// Image payload is echo-major, row-major within an echo. K-space payload is
/// echo-major, selected lines in ascending order, full readout per line.
class io_error : public std::runtime_error {
public:
  enum class Kind { BadHeader, UnknownRole, SizeMismatch, TruncatedPayload };

  io_error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

private:
  Kind kind_;
};

enum class DatasetRole { Images, Kspace, Mask };

struct Dataset {
  DatasetRole role = DatasetRole::Images;
  EchoStack images;
  AcquiredData kspace;
  SamplingMask mask;
};

namespace detail {

inline std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void put_f32_le(std::string& out, double v) {
  const float f = static_cast<float>(v);
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  out.push_back(static_cast<char>(u & 0xff));
  out.push_back(static_cast<char>((u >> 8) & 0xff));
  out.push_back(static_cast<char>((u >> 16) & 0xff));
  out.push_back(static_cast<char>((u >> 24) & 0xff));
}

inline double get_f32_le(const char* p) {
  const std::uint32_t u = (static_cast<std::uint32_t>(static_cast<unsigned char>(p[0]))) |
                          (static_cast<std::uint32_t>(static_cast<unsigned char>(p[1])) << 8) |
                          (static_cast<std::uint32_t>(static_cast<unsigned char>(p[2])) << 16) |
                          (static_cast<std::uint32_t>(static_cast<unsigned char>(p[3])) << 24);
  float f;
  std::memcpy(&f, &u, 4);
  return static_cast<double>(f);
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error(io_error::Kind::BadHeader, "cannot open for writing: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw io_error(io_error::Kind::BadHeader, "write failed: " + path);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error(io_error::Kind::BadHeader, "cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string mask_line(int echo, const SamplingMask& m) {
  std::ostringstream os;
  os << "mask " << echo << ' ' << m.seed << ' ' << g17(m.center_fraction) << ' '
     << m.lines.size();
  for (int l : m.lines) os << ' ' << l;
  return os.str();
}

} // namespace detail

inline void save(const std::string& path, const EchoStack& x) {
  x.require_valid("save");
  std::ostringstream h;
  h << "MECSET 1\n"
    << "role images\n"
    << "height " << x.height << "\nwidth " << x.width << "\nechoes " << x.n_echoes() << '\n'
    << "dtype complex64\nbyte_order little\n";
  std::string payload;
  payload.reserve(static_cast<std::size_t>(8) * x.height * x.width * x.n_echoes());
  for (const auto& e : x.echoes)
    for (int r = 0; r < x.height; ++r)
      for (int c = 0; c < x.width; ++c) {
        detail::put_f32_le(payload, e(r, c).real());
        detail::put_f32_le(payload, e(r, c).imag());
      }
  h << "payload_bytes " << payload.size() << "\ndata\n";
  detail::write_file(path, h.str() + payload);
}

inline void save(const std::string& path, const AcquiredData& d) {
  d.require_valid("save");
  const SamplingMask& m0 = d.echoes.front().mask;
  std::ostringstream h;
  h << "MECSET 1\n"
    << "role kspace\n"
    << "height " << m0.height << "\nwidth " << m0.width << "\nechoes " << d.n_echoes() << '\n'
    << "dtype complex64\nbyte_order little\n"
    << "noise_sigma " << detail::g17(d.noise_sigma) << '\n';
  std::string payload;
  for (int j = 0; j < d.n_echoes(); ++j) {
    h << detail::mask_line(j, d.echoes[static_cast<std::size_t>(j)].mask) << '\n';
    const VectorXcd& y = d.echoes[static_cast<std::size_t>(j)].y;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      detail::put_f32_le(payload, y(i).real());
      detail::put_f32_le(payload, y(i).imag());
    }
  }
  h << "payload_bytes " << payload.size() << "\ndata\n";
  detail::write_file(path, h.str() + payload);
}

inline void save(const std::string& path, const SamplingMask& m) {
  m.require_valid("save");
  std::ostringstream h;
  h << "MECSET 1\n"
    << "role mask\n"
    << "height " << m.height << "\nwidth " << m.width << '\n'
    << "seed " << m.seed << '\n'
    << "center_fraction " << detail::g17(m.center_fraction) << '\n'
    << "lines " << m.lines.size();
  for (int l : m.lines) h << ' ' << l;
  h << "\npayload_bytes 0\ndata\n";
  detail::write_file(path, h.str());
}

inline Dataset load(const std::string& path) {
  const std::string bytes = detail::read_file(path);
  const std::string marker = "data\n";
  std::size_t data_pos = std::string::npos;
  // The data marker sits on its own line.
  for (std::size_t p = bytes.find(marker); p != std::string::npos;
       p = bytes.find(marker, p + 1)) {
    if (p == 0 || bytes[p - 1] == '\n') {
      data_pos = p;
      break;
    }
  }
  if (data_pos == std::string::npos)
    throw io_error(io_error::Kind::BadHeader, path + ": missing data marker");

  std::istringstream header(bytes.substr(0, data_pos));
  const char* payload = bytes.data() + data_pos + marker.size();
  const std::size_t payload_size = bytes.size() - data_pos - marker.size();

  std::string magic;
  int version = 0;
  header >> magic >> version;
  if (magic != "MECSET" || version != 1)
    throw io_error(io_error::Kind::BadHeader, path + ": not a MECSET v1 file");

  std::string key, role;
  header >> key >> role;
  if (key != "role") throw io_error(io_error::Kind::BadHeader, path + ": role line missing");
  if (role != "images" && role != "kspace" && role != "mask")
    throw io_error(io_error::Kind::UnknownRole, path + ": unknown role tag '" + role + "'");

  int height = 0, width = 0, echoes = 0;
  double noise_sigma = 0.0, center_fraction = 0.0;
  std::uint64_t seed = 0;
  std::size_t payload_bytes = 0;
  std::vector<SamplingMask> masks;
  std::vector<int> lines;
  while (header >> key) {
    if (key == "height") header >> height;
    else if (key == "width") header >> width;
    else if (key == "echoes") header >> echoes;
    else if (key == "dtype" || key == "byte_order") { std::string v; header >> v; }
    else if (key == "noise_sigma") header >> noise_sigma;
    else if (key == "seed") header >> seed;
    else if (key == "center_fraction") header >> center_fraction;
    else if (key == "payload_bytes") header >> payload_bytes;
    else if (key == "lines") {
      std::size_t k = 0;
      header >> k;
      lines.resize(k);
      for (auto& l : lines) header >> l;
    } else if (key == "mask") {
      SamplingMask m;
      int echo = 0;
      std::size_t k = 0;
      header >> echo >> m.seed >> m.center_fraction >> k;
      m.lines.resize(k);
      for (auto& l : m.lines) header >> l;
      masks.push_back(std::move(m));
    } else {
      throw io_error(io_error::Kind::BadHeader, path + ": unknown header key '" + key + "'");
    }
  }
  if (header.bad() || height < 1 || width < 1)
    throw io_error(io_error::Kind::BadHeader, path + ": malformed header");

  Dataset ds;
  if (role == "images") {
    ds.role = DatasetRole::Images;
    if (echoes < 1) throw io_error(io_error::Kind::BadHeader, path + ": echo count missing");
    const std::size_t expect = static_cast<std::size_t>(8) * height * width * echoes;
    if (payload_bytes != expect)
      throw io_error(io_error::Kind::SizeMismatch,
                     path + ": payload_bytes disagrees with image dims");
    if (payload_size < payload_bytes)
      throw io_error(io_error::Kind::TruncatedPayload, path + ": payload shorter than declared");
    ds.images = EchoStack(height, width, echoes);
    const char* p = payload;
    for (auto& e : ds.images.echoes)
      for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) {
          e(r, c) = Complex(detail::get_f32_le(p), detail::get_f32_le(p + 4));
          p += 8;
        }
  } else if (role == "kspace") {
    ds.role = DatasetRole::Kspace;
    if (echoes < 1 || static_cast<int>(masks.size()) != echoes)
      throw io_error(io_error::Kind::BadHeader, path + ": per-echo mask lines missing");
    std::size_t expect = 0;
    for (auto& m : masks) {
      m.height = height;
      m.width = width;
      expect += static_cast<std::size_t>(8) * m.lines.size() * width;
    }
    if (payload_bytes != expect)
      throw io_error(io_error::Kind::SizeMismatch,
                     path + ": payload_bytes disagrees with mask line counts");
    if (payload_size < payload_bytes)
      throw io_error(io_error::Kind::TruncatedPayload, path + ": payload shorter than declared");
    ds.kspace.noise_sigma = noise_sigma;
    const char* p = payload;
    for (auto& m : masks) {
      EchoSamples e;
      e.mask = std::move(m);
      e.y.resize(static_cast<Eigen::Index>(e.mask.n_lines()) * width);
      for (Eigen::Index i = 0; i < e.y.size(); ++i) {
        e.y(i) = Complex(detail::get_f32_le(p), detail::get_f32_le(p + 4));
        p += 8;
      }
      ds.kspace.echoes.push_back(std::move(e));
    }
  } else {
    ds.role = DatasetRole::Mask;
    if (payload_bytes != 0)
      throw io_error(io_error::Kind::SizeMismatch, path + ": mask files carry no payload");
    ds.mask.height = height;
    ds.mask.width = width;
    ds.mask.seed = seed;
    ds.mask.center_fraction = center_fraction;
    ds.mask.lines = std::move(lines);
    ds.mask.require_valid("load");
  }
  return ds;
}

inline EchoStack load_images(const std::string& path) {
  Dataset ds = load(path);
  if (ds.role != DatasetRole::Images)
    throw io_error(io_error::Kind::UnknownRole, path + ": expected an images file");
  return std::move(ds.images);
}

inline AcquiredData load_kspace(const std::string& path) {
  Dataset ds = load(path);
  if (ds.role != DatasetRole::Kspace)
    throw io_error(io_error::Kind::UnknownRole, path + ": expected a kspace file");
  return std::move(ds.kspace);
}

inline SamplingMask load_mask(const std::string& path) {
  Dataset ds = load(path);
  if (ds.role != DatasetRole::Mask)
    throw io_error(io_error::Kind::UnknownRole, path + ": expected a mask file");
  return std::move(ds.mask);
}

} // namespace echorec
