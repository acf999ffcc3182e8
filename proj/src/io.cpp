#include "swrom/io.hpp"

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace swrom {

namespace {

constexpr std::array<char, 7> kMagic = {'S', 'W', 'R', 'O', 'M', '1', '\0'};
constexpr std::uint32_t kVersion = 1;

struct Header {
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
};

void write_header(std::ofstream& out, std::uint64_t rows, std::uint64_t cols) {
  out.write(kMagic.data(), kMagic.size());
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof(kVersion));
  out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
  out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
}

Header read_header(std::ifstream& in, const std::string& path) {
  std::array<char, 7> magic{};
  std::uint32_t version = 0;
  Header h;
  in.read(magic.data(), magic.size());
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&h.rows), sizeof(h.rows));
  in.read(reinterpret_cast<char*>(&h.cols), sizeof(h.cols));
  if (!in) throw IoError("truncated header in " + path);
  if (magic != kMagic) throw IoError("bad magic in " + path);
  if (version != kVersion) throw IoError("unsupported container version in " + path);
  return h;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path + " for reading");
  return in;
}

std::string format_value(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

Field read_column(const std::string& path) {
  Mat m = read_matrix(path);
  if (m.cols() != 1) throw IoError("expected a single column in " + path);
  return m.col(0);
}

}  // namespace

void write_matrix(const std::string& path, const Mat& m) {
  std::ofstream out = open_out(path);
  write_header(out, static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols()));
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double)) * m.size());
  if (!out) throw IoError("short write to " + path);
}

Mat read_matrix(const std::string& path) {
  std::ifstream in = open_in(path);
  const Header h = read_header(in, path);
  Mat m(static_cast<long>(h.rows), static_cast<long>(h.cols));
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double)) * m.size());
  if (!in) throw IoError("truncated payload in " + path);
  return m;
}

void write_index_vector(const std::string& path, const std::vector<long>& idx) {
  std::ofstream out = open_out(path);
  write_header(out, static_cast<std::uint64_t>(idx.size()), 1);
  for (long v : idx) {
    const std::int64_t w = v;
    out.write(reinterpret_cast<const char*>(&w), sizeof(w));
  }
  if (!out) throw IoError("short write to " + path);
}

std::vector<long> read_index_vector(const std::string& path) {
  std::ifstream in = open_in(path);
  const Header h = read_header(in, path);
  if (h.cols != 1) throw IoError("index vector with more than one column in " + path);
  std::vector<long> idx(h.rows);
  for (auto& v : idx) {
    std::int64_t w = 0;
    in.read(reinterpret_cast<char*>(&w), sizeof(w));
    v = static_cast<long>(w);
  }
  if (!in) throw IoError("truncated payload in " + path);
  return idx;
}

void write_snapshots(const std::string& stem, const SnapshotSet& snaps) {
  write_matrix(stem + "_u.bin", snaps.su);
  write_matrix(stem + "_v.bin", snaps.sv);
  write_matrix(stem + "_h.bin", snaps.sh);
  write_matrix(stem + "_mean_u.bin", snaps.mean_u);
  write_matrix(stem + "_mean_v.bin", snaps.mean_v);
  write_matrix(stem + "_mean_h.bin", snaps.mean_h);
}

SnapshotSet read_snapshots(const std::string& stem) {
  SnapshotSet s;
  s.su = read_matrix(stem + "_u.bin");
  s.sv = read_matrix(stem + "_v.bin");
  s.sh = read_matrix(stem + "_h.bin");
  s.mean_u = read_column(stem + "_mean_u.bin");
  s.mean_v = read_column(stem + "_mean_v.bin");
  s.mean_h = read_column(stem + "_mean_h.bin");
  if (s.su.rows() != s.sv.rows() || s.su.rows() != s.sh.rows() ||
      s.su.cols() != s.sv.cols() || s.su.cols() != s.sh.cols())
    throw IoError("inconsistent snapshot component shapes under stem " + stem);
  return s;
}

void emit_invariant_csv(const std::string& path, const InvariantSeries& series) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "t,H,Z,M,V\n";
  for (const auto& s : series)
    out << format_value(s.t) << ',' << format_value(s.H) << ',' << format_value(s.Z) << ','
        << format_value(s.M) << ',' << format_value(s.V) << '\n';
  if (!out) throw IoError("short write to " + path);
}

void emit_error_table(const std::string& path, const std::vector<ErrorTableRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "method,modes,err_u,err_v,err_h\n";
  for (const auto& r : rows)
    out << r.method << ',' << r.modes << ',' << format_value(r.err_u) << ','
        << format_value(r.err_v) << ',' << format_value(r.err_h) << '\n';
  if (!out) throw IoError("short write to " + path);
}

void emit_invariant_error_table(const std::string& path,
                                const std::vector<InvariantErrorRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "method,modes,err_energy,err_enstrophy,err_vorticity\n";
  for (const auto& r : rows)
    out << r.method << ',' << r.modes << ',' << format_value(r.err_energy) << ','
        << format_value(r.err_enstrophy) << ',' << format_value(r.err_vorticity) << '\n';
  if (!out) throw IoError("short write to " + path);
}

}  // namespace swrom
