#pragma once

// Serialization: a little-endian binary container for space-time fields, CSV
// writers with locale-free %.17g doubles, and FNV-1a hashing for manifests.

#include <wvlt/grid.hpp>
#include <wvlt/xray.hpp>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace wvlt {

inline constexpr char kFieldMagic[4] = {'W', 'V', 'L', 'T'};
inline constexpr std::uint32_t kFieldVersion = 1;

/// Write a space-time field: magic "WVLT", u32 version, u32 n, u32 n_t,
/// f64 T, then (n_t+1)*n*n (re,im) f64 pairs, row-major slices in time order.
inline void write_field(const std::string& path, const SpaceTimeField& u) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_field: cannot open " + path);
  os.write(kFieldMagic, 4);
  auto put_u32 = [&](std::uint32_t x) { os.write(reinterpret_cast<const char*>(&x), 4); };
  auto put_f64 = [&](double x) { os.write(reinterpret_cast<const char*>(&x), 8); };
  put_u32(kFieldVersion);
  put_u32(static_cast<std::uint32_t>(u.grid.n));
  put_u32(static_cast<std::uint32_t>(u.time.n_t));
  put_f64(u.time.T);
  for (const cplx& z : u.v) {
    put_f64(z.real());
    put_f64(z.imag());
  }
  if (!os) throw std::runtime_error("write_field: short write to " + path);
}

inline SpaceTimeField read_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_field: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kFieldMagic, 4) != 0)
    throw std::runtime_error("read_field: bad magic in " + path);
  auto get_u32 = [&]() {
    std::uint32_t x = 0;
    is.read(reinterpret_cast<char*>(&x), 4);
    return x;
  };
  auto get_f64 = [&]() {
    double x = 0;
    is.read(reinterpret_cast<char*>(&x), 8);
    return x;
  };
  const std::uint32_t version = get_u32();
  if (version != kFieldVersion)
    throw std::runtime_error("read_field: unsupported version in " + path);
  const int n = static_cast<int>(get_u32());
  const int n_t = static_cast<int>(get_u32());
  const double T = get_f64();
  if (!is) throw std::runtime_error("read_field: truncated header in " + path);
  SpaceTimeField u(SpatialGrid(n), TimeAxis(n_t, T));
  for (cplx& z : u.v) {
    double re = get_f64();
    double im = get_f64();
    z = cplx(re, im);
  }
  if (!is) throw std::runtime_error("read_field: truncated payload in " + path);
  return u;
}

inline constexpr char kSliceMagic[4] = {'W', 'V', 'S', 'L'};

/// Write a single spatial slice: magic "WVSL", u32 version, u32 n, then
/// n*n (re,im) f64 pairs in row-major order.
inline void write_slice(const std::string& path, const Field& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_slice: cannot open " + path);
  os.write(kSliceMagic, 4);
  auto put_u32 = [&](std::uint32_t x) { os.write(reinterpret_cast<const char*>(&x), 4); };
  auto put_f64 = [&](double x) { os.write(reinterpret_cast<const char*>(&x), 8); };
  put_u32(kFieldVersion);
  put_u32(static_cast<std::uint32_t>(f.grid.n));
  for (const cplx& z : f.v) {
    put_f64(z.real());
    put_f64(z.imag());
  }
  if (!os) throw std::runtime_error("write_slice: short write to " + path);
}

inline Field read_slice(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_slice: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kSliceMagic, 4) != 0)
    throw std::runtime_error("read_slice: bad magic in " + path);
  std::uint32_t version = 0, n = 0;
  is.read(reinterpret_cast<char*>(&version), 4);
  is.read(reinterpret_cast<char*>(&n), 4);
  if (!is || version != kFieldVersion)
    throw std::runtime_error("read_slice: unsupported header in " + path);
  Field f(SpatialGrid(static_cast<int>(n)));
  for (cplx& z : f.v) {
    double re = 0, im = 0;
    is.read(reinterpret_cast<char*>(&re), 8);
    is.read(reinterpret_cast<char*>(&im), 8);
    z = cplx(re, im);
  }
  if (!is) throw std::runtime_error("read_slice: truncated payload in " + path);
  return f;
}

/// Shortest round-trippable decimal form, independent of locale.
inline std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

/// Boundary trace CSV: header t,node_x,node_y,re,im; one row per
/// (slice, boundary node) in canonical boundary order.
inline void write_trace_csv(const std::string& path, const BoundaryTimeTrace& tr) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_trace_csv: cannot open " + path);
  os << "t,node_x,node_y,re,im\n";
  const int n = tr.grid.n;
  for (int k = 0; k <= tr.time.n_t; ++k) {
    const std::string t = fmt_double(tr.time.t(k));
    for (size_t b = 0; b < tr.num_bnodes(); ++b) {
      const int lin = tr.nodes[b];
      const cplx z = tr.at(k, b);
      os << t << ',' << fmt_double(tr.grid.x(lin % n)) << ',' << fmt_double(tr.grid.y(lin / n))
         << ',' << fmt_double(z.real()) << ',' << fmt_double(z.imag()) << '\n';
    }
  }
  if (!os) throw std::runtime_error("write_trace_csv: short write to " + path);
}

/// Generic CSV writer: header row then rows of %.17g cells.
inline void write_csv(const std::string& path, const std::vector<std::string>& header,
                      const std::vector<std::vector<double>>& rows) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_csv: cannot open " + path);
  for (size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << '\n';
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw std::invalid_argument("write_csv: row width mismatch");
    for (size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << fmt_double(row[i]);
    os << '\n';
  }
  if (!os) throw std::runtime_error("write_csv: short write to " + path);
}

/// Sinogram CSV: columns t_index, angle, offset, value.
inline void write_sinogram_csv(const std::string& path, const Sinogram& s) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_sinogram_csv: cannot open " + path);
  os << "t_index,angle,offset,value\n";
  for (int t = 0; t < s.n_times; ++t)
    for (size_t a = 0; a < s.angles.size(); ++a)
      for (size_t o = 0; o < s.offsets.size(); ++o)
        os << t << ',' << fmt_double(s.angles[a]) << ',' << fmt_double(s.offsets[o]) << ','
           << fmt_double(s.at(t, a, o)) << '\n';
  if (!os) throw std::runtime_error("write_sinogram_csv: short write to " + path);
}

/// Spatial slice CSV: columns x, y, re, im in row-major node order.
inline void write_slice_csv(const std::string& path, const Field& f) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_slice_csv: cannot open " + path);
  os << "x,y,re,im\n";
  for (int iy = 0; iy < f.grid.n; ++iy)
    for (int ix = 0; ix < f.grid.n; ++ix) {
      const cplx z = f.at(ix, iy);
      os << fmt_double(f.grid.x(ix)) << ',' << fmt_double(f.grid.y(iy)) << ','
         << fmt_double(z.real()) << ',' << fmt_double(z.imag()) << '\n';
    }
  if (!os) throw std::runtime_error("write_slice_csv: short write to " + path);
}

/// FNV-1a 64-bit over raw bytes.
inline std::uint64_t fnv1a(const void* data, size_t len, std::uint64_t seed = 14695981039346656037ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("fnv1a_file: cannot open " + path);
  std::uint64_t h = 14695981039346656037ull;
  char buf[1 << 16];
  while (is) {
    is.read(buf, sizeof buf);
    h = fnv1a(buf, static_cast<size_t>(is.gcount()), h);
  }
  return h;
}

inline std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace wvlt
