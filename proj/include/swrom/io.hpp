#pragma once

#include <string>
#include <vector>

#include "swrom/invariants.hpp"
#include "swrom/pod.hpp"
#include "swrom/types.hpp"

namespace swrom {

// binary matrix container: magic "SWROM1\0", u32 version, u64 rows, u64 cols,
// then column-major payload, little endian. f64 payload for matrices, i64 for
// index vectors (same header, documented by file role).
void write_matrix(const std::string& path, const Mat& m);
Mat read_matrix(const std::string& path);

void write_index_vector(const std::string& path, const std::vector<long>& idx);
std::vector<long> read_index_vector(const std::string& path);

// snapshot sets persist as <stem>_{u,v,h}.bin plus <stem>_mean_{u,v,h}.bin
void write_snapshots(const std::string& stem, const SnapshotSet& snaps);
SnapshotSet read_snapshots(const std::string& stem);

// header exactly "t,H,Z,M,V", 17 significant digits, one row per sample
void emit_invariant_csv(const std::string& path, const InvariantSeries& series);

struct ErrorTableRow {
  std::string method;
  long modes = 0;
  double err_u = 0, err_v = 0, err_h = 0;
};
void emit_error_table(const std::string& path, const std::vector<ErrorTableRow>& rows);

struct InvariantErrorRow {
  std::string method;
  long modes = 0;
  double err_energy = 0, err_enstrophy = 0, err_vorticity = 0;
};
void emit_invariant_error_table(const std::string& path,
                                const std::vector<InvariantErrorRow>& rows);

}  // namespace swrom
