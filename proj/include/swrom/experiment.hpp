#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "swrom/deim.hpp"
#include "swrom/fom.hpp"
#include "swrom/invariants.hpp"
#include "swrom/io.hpp"
#include "swrom/tensor_rom.hpp"

namespace swrom {

enum class RomKind { none, pod, pod_deim, tpod };

std::string to_string(Scheme s);
std::string to_string(RomKind r);
std::string to_string(TensorBuilder b);

struct ExperimentConfig {
  long nx = 100, ny = 100;
  double xa = 0.0, xb = 1.0, yc = 0.0, yd = 1.0;
  double g = 1.0;
  double f0 = 0.0;
  double T = 50.0;
  double dt = 0.04;
  Scheme scheme = Scheme::kahan;
  RomKind rom = RomKind::none;
  long n = 50;                 // POD modes (rank_rule=fixed)
  long m = 90;                 // DEIM modes (rank_rule=fixed)
  double kappa = 1e-4;         // cumulative energy threshold (rank_rule=energy)
  std::string rank_rule = "fixed";  // "fixed" | "energy"
  std::string deim_rank_rule;  // "" inherits rank_rule; "fixed" | "energy"
  double newton_tol = 1e-10;
  int newton_max_iter = 25;
  TensorBuilder tensor_builder = TensorBuilder::rowwise_batched;
  int timing_repeats = 1;      // repeats of the timed phases, median reported
  std::string out_dir;         // artifacts omitted when empty

  void validate() const;
};

// flat key=value file, '#' comments; unknown keys are errors
ExperimentConfig load_config(const std::string& path);
void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value);

// Gaussian height bump over a weak divergence-free velocity field, the
// standard test case for this solver
State initial_condition_gaussian_bump(const GridSpec& grid);

struct RunReport {
  ExperimentConfig cfg;
  long selected_n = 0;  // after rank rule / truncation
  long selected_m = 0;
  double fom_seconds = 0.0;
  double offline_seconds = 0.0;
  double online_seconds = 0.0;
  double speedup_online = 0.0;        // fom / online
  double speedup_total = 0.0;         // fom / (offline + online)
  InvariantErrors fom_invariant_errors;
  InvariantErrors rom_invariant_errors;
  VariableErrors rom_errors;          // time-averaged relative L2, FOM vs ROM
  InvariantSeries fom_invariants;
  InvariantSeries rom_invariants;
  StepStats fom_step_stats;
  std::vector<std::string> artifacts;
  std::vector<std::string> notes;
};

RunReport run_experiment(const ExperimentConfig& cfg);

void write_report(const RunReport& report, const std::string& path);

struct BenchResult {
  std::string builder;
  long N = 0;
  long n = 0;
  double seconds = 0.0;  // median of timing_repeats, after one warm-up
};

// times the reduced-quadratic builders on synthetic orthonormal bases
std::vector<BenchResult> run_tensor_bench(const std::vector<long>& grid_sizes,
                                          const std::vector<long>& mode_counts, int repeats);

void emit_bench_csv(const std::string& path, const std::vector<BenchResult>& rows);

}  // namespace swrom
