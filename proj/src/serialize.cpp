#include "ecqt/serialize.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace ecqt {

using nlohmann::json;

json matrix_to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      row.push_back({m(i, j).real(), m(i, j).imag()});
    rows.push_back(row);
  }
  return rows;
}

Mat matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty())
    throw ConfigError("matrix JSON must be a nonempty array of rows");
  const std::size_t nr = j.size();
  const std::size_t nc = j[0].size();
  Mat m(nr, nc);
  for (std::size_t r = 0; r < nr; ++r) {
    if (!j[r].is_array() || j[r].size() != nc)
      throw ConfigError("ragged matrix JSON");
    for (std::size_t c = 0; c < nc; ++c) {
      const auto& e = j[r][c];
      if (!e.is_array() || e.size() != 2)
        throw ConfigError("matrix entries must be [re, im] pairs");
      m(r, c) = Cplx(e[0].get<Real>(), e[1].get<Real>());
    }
  }
  return m;
}

namespace {

constexpr char kMagic[4] = {'E', 'C', 'Q', 'H'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::string& out, const T& v) {
  const char* p = reinterpret_cast<const char*>(&v);
  out.append(p, sizeof(T));
}

template <class T>
T take(const std::string& in, std::size_t& off) {
  if (off + sizeof(T) > in.size())
    throw ConfigError("truncated history file");
  T v;
  std::memcpy(&v, in.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}

}  // namespace

void history_save_binary(const StateHistory& h, const std::string& path) {
  std::string out;
  out.append(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, std::uint32_t(h.dim()));
  put<std::uint8_t>(out, h.pure() ? 1 : 0);
  put<Real>(out, h.dt());
  put<Real>(out, h.t0());
  put<std::uint64_t>(out, h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (h.pure()) {
      const Vec& v = h.psi_index(i);
      for (Eigen::Index k = 0; k < v.size(); ++k) {
        put<Real>(out, v(k).real());
        put<Real>(out, v(k).imag());
      }
    } else {
      const Mat m = h.rho_index(i);
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
          put<Real>(out, m(r, c).real());
          put<Real>(out, m(r, c).imag());
        }
    }
  }
  write_file(path, out);
}

StateHistory history_load_binary(const std::string& path) {
  const std::string in = read_file(path);
  std::size_t off = 0;
  if (in.size() < 4 || std::memcmp(in.data(), kMagic, 4) != 0)
    throw ConfigError("not a history file");
  off = 4;
  if (take<std::uint32_t>(in, off) != kVersion)
    throw ConfigError("unsupported history version");
  const int dim = int(take<std::uint32_t>(in, off));
  const bool pure = take<std::uint8_t>(in, off) != 0;
  const Real dt = take<Real>(in, off);
  const Real t0 = take<Real>(in, off);
  const std::uint64_t count = take<std::uint64_t>(in, off);
  StateHistory h(t0, dt, pure);
  for (std::uint64_t i = 0; i < count; ++i) {
    if (pure) {
      Vec v(dim);
      for (int k = 0; k < dim; ++k) {
        const Real re = take<Real>(in, off);
        const Real im = take<Real>(in, off);
        v(k) = Cplx(re, im);
      }
      h.append(v);
    } else {
      Mat m(dim, dim);
      for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) {
          const Real re = take<Real>(in, off);
          const Real im = take<Real>(in, off);
          m(r, c) = Cplx(re, im);
        }
      h.append(m);
    }
  }
  return h;
}

json history_to_json(const StateHistory& h) {
  json j;
  j["dim"] = h.dim();
  j["dt"] = h.dt();
  j["t0"] = h.t0();
  j["count"] = h.size();
  j["pure"] = h.pure();
  json rows = json::array();
  for (std::size_t i = 0; i < h.size(); ++i) {
    json row = json::array();
    if (h.pure()) {
      const Vec& v = h.psi_index(i);
      for (Eigen::Index k = 0; k < v.size(); ++k) {
        row.push_back(v(k).real());
        row.push_back(v(k).imag());
      }
    } else {
      const Mat m = h.rho_index(i);
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
          row.push_back(m(r, c).real());
          row.push_back(m(r, c).imag());
        }
    }
    rows.push_back(row);
  }
  j["rows"] = rows;
  return j;
}

StateHistory history_from_json(const json& j) {
  const int dim = j.at("dim").get<int>();
  const bool pure = j.at("pure").get<bool>();
  StateHistory h(j.at("t0").get<Real>(), j.at("dt").get<Real>(), pure);
  for (const auto& row : j.at("rows")) {
    if (pure) {
      if (int(row.size()) != 2 * dim) throw ConfigError("bad history row");
      Vec v(dim);
      for (int k = 0; k < dim; ++k)
        v(k) = Cplx(row[2 * k].get<Real>(), row[2 * k + 1].get<Real>());
      h.append(v);
    } else {
      if (int(row.size()) != 2 * dim * dim)
        throw ConfigError("bad history row");
      Mat m(dim, dim);
      for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c) {
          const int k = 2 * (r * dim + c);
          m(r, c) = Cplx(row[k].get<Real>(), row[k + 1].get<Real>());
        }
      h.append(m);
    }
  }
  return h;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t hash = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(hash));
  return std::string(buf);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path);
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw ConfigError("short write to " + path);
}

std::string format_real(Real x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return std::string(buf);
}

}  // namespace ecqt
