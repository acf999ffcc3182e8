#include "swrom/experiment.hpp"

#include <Eigen/LU>
#include <Eigen/QR>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <random>
#include <sstream>

namespace swrom {

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

double median(std::vector<double> v) {
  std::nth_element(v.begin(), v.begin() + (v.size() - 1) / 2, v.end());
  return v[(v.size() - 1) / 2];
}

std::string trim(const std::string& s) {
  const auto from = s.find_first_not_of(" \t\r\n");
  if (from == std::string::npos) return {};
  const auto to = s.find_last_not_of(" \t\r\n");
  return s.substr(from, to - from + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw ConfigError("trailing characters in value for " + key);
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("cannot parse value '" + value + "' for " + key);
  }
}

long parse_long(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long v = std::stol(value, &pos);
    if (pos != value.size()) throw ConfigError("trailing characters in value for " + key);
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    throw ConfigError("cannot parse value '" + value + "' for " + key);
  }
}

std::string scheme_name(Scheme s) { return s == Scheme::avf ? "avf" : "kahan"; }

std::string rom_name(RomKind r) {
  switch (r) {
    case RomKind::none: return "none";
    case RomKind::pod: return "pod";
    case RomKind::pod_deim: return "pod-deim";
    case RomKind::tpod: return "tpod";
  }
  return "none";
}

std::string builder_name(TensorBuilder b) {
  switch (b) {
    case TensorBuilder::naive: return "naive";
    case TensorBuilder::mumode: return "mumode";
    case TensorBuilder::rowwise: return "rowwise";
    case TensorBuilder::rowwise_batched: return "rowwise-batched";
  }
  return "naive";
}

Scheme parse_scheme(const std::string& value) {
  if (value == "avf") return Scheme::avf;
  if (value == "kahan") return Scheme::kahan;
  throw ConfigError("unknown scheme '" + value + "' (expected avf or kahan)");
}

RomKind parse_rom(const std::string& value) {
  if (value == "none") return RomKind::none;
  if (value == "pod") return RomKind::pod;
  if (value == "pod-deim") return RomKind::pod_deim;
  if (value == "tpod") return RomKind::tpod;
  throw ConfigError("unknown rom '" + value + "' (expected none, pod, pod-deim or tpod)");
}

TensorBuilder parse_builder(const std::string& value) {
  if (value == "naive") return TensorBuilder::naive;
  if (value == "mumode") return TensorBuilder::mumode;
  if (value == "rowwise") return TensorBuilder::rowwise;
  if (value == "rowwise-batched") return TensorBuilder::rowwise_batched;
  throw ConfigError("unknown tensor_builder '" + value + "'");
}

std::string format_sci(double v) {
  std::ostringstream os;
  os << std::scientific << std::setprecision(6) << v;
  return os.str();
}

}  // namespace

std::string to_string(Scheme s) { return scheme_name(s); }
std::string to_string(RomKind r) { return rom_name(r); }
std::string to_string(TensorBuilder b) { return builder_name(b); }

void ExperimentConfig::validate() const {
  if (nx < 3 || ny < 3) throw ConfigError("need nx, ny >= 3");
  if (!(xa < xb) || !(yc < yd)) throw ConfigError("need xa < xb and yc < yd");
  if (!(g > 0)) throw ConfigError("need g > 0");
  if (T < 0 || !(dt > 0)) throw ConfigError("need T >= 0 and dt > 0");
  if (n < 1) throw ConfigError("need n >= 1");
  if (m < 1) throw ConfigError("need m >= 1");
  if (!(kappa > 0) || !(kappa < 1)) throw ConfigError("need kappa in (0, 1)");
  if (rank_rule != "fixed" && rank_rule != "energy")
    throw ConfigError("rank_rule must be fixed or energy");
  if (!deim_rank_rule.empty() && deim_rank_rule != "fixed" && deim_rank_rule != "energy")
    throw ConfigError("deim_rank_rule must be empty, fixed, or energy");
  if (!(newton_tol > 0)) throw ConfigError("need newton_tol > 0");
  if (newton_max_iter < 1) throw ConfigError("need newton_max_iter >= 1");
  if (timing_repeats < 1) throw ConfigError("need timing_repeats >= 1");
  if (rom == RomKind::pod_deim && scheme != Scheme::avf)
    throw ConfigError("rom pod-deim is only defined for the avf scheme");
  if (rom == RomKind::tpod && scheme != Scheme::kahan)
    throw ConfigError("rom tpod is only defined for the kahan scheme");
}

void apply_override(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "nx") cfg.nx = parse_long(key, value);
  else if (key == "ny") cfg.ny = parse_long(key, value);
  else if (key == "xa") cfg.xa = parse_double(key, value);
  else if (key == "xb") cfg.xb = parse_double(key, value);
  else if (key == "yc") cfg.yc = parse_double(key, value);
  else if (key == "yd") cfg.yd = parse_double(key, value);
  else if (key == "g") cfg.g = parse_double(key, value);
  else if (key == "f0") cfg.f0 = parse_double(key, value);
  else if (key == "T") cfg.T = parse_double(key, value);
  else if (key == "dt") cfg.dt = parse_double(key, value);
  else if (key == "scheme") cfg.scheme = parse_scheme(value);
  else if (key == "rom") cfg.rom = parse_rom(value);
  else if (key == "n") cfg.n = parse_long(key, value);
  else if (key == "m") cfg.m = parse_long(key, value);
  else if (key == "kappa") cfg.kappa = parse_double(key, value);
  else if (key == "rank_rule") cfg.rank_rule = value;
  else if (key == "deim_rank_rule") cfg.deim_rank_rule = value;
  else if (key == "newton_tol") cfg.newton_tol = parse_double(key, value);
  else if (key == "newton_max_iter")
    cfg.newton_max_iter = static_cast<int>(parse_long(key, value));
  else if (key == "tensor_builder") cfg.tensor_builder = parse_builder(value);
  else if (key == "timing_repeats")
    cfg.timing_repeats = static_cast<int>(parse_long(key, value));
  else if (key == "out_dir") cfg.out_dir = value;
  else throw ConfigError("unknown configuration key '" + key + "'");
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  ExperimentConfig cfg;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
    apply_override(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

State initial_condition_gaussian_bump(const GridSpec& grid) {
  constexpr double pi = 3.14159265358979323846;
  State z;
  z.h = discretize_field(grid, [](double x, double y) {
    return 1.0 + 0.5 * std::exp(-25.0 * ((x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5)));
  });
  z.u = discretize_field(grid, [pi](double x, double y) {
    return -(0.5 / pi) * std::sin(pi * x) * std::sin(2.0 * pi * y);
  });
  z.v = discretize_field(grid, [pi](double x, double y) {
    return (0.5 / pi) * std::sin(2.0 * pi * x) * std::sin(pi * y);
  });
  return z;
}

namespace {

// Galerkin reduced steppers without hyper-reduction: the full right-hand side
// is evaluated at the lifted state and projected. Used for rom=pod.
struct GalerkinRom {
  const PodBasis& basis;
  const DiffOps& ops;
  const Physics& phys;
  Mat v;  // dense blkdiag(Vu, Vv, Vh), 3N x 3n

  GalerkinRom(const PodBasis& b, const DiffOps& o, const Physics& p)
      : basis(b), ops(o), phys(p) {
    const long N = b.Vu.rows(), n = b.n;
    v = Mat::Zero(3 * N, 3 * n);
    v.block(0, 0, N, n) = b.Vu;
    v.block(N, n, N, n) = b.Vv;
    v.block(2 * N, 2 * n, N, n) = b.Vh;
  }

  Vec project_increment(const Vec& w) const { return v.transpose() * w; }

  Vec flow(const State& z, const State& zn) const {
    State mid;
    mid.u = 0.5 * (z.u + zn.u);
    mid.v = 0.5 * (z.v + zn.v);
    mid.h = 0.5 * (z.h + zn.h);
    return poisson_apply(mid, avf_integral(z, zn, phys), ops, phys);
  }

  Vec avf_step(const Vec& zr, double dt, const SolverOptions& opts, StepStats* stats) const {
    const long n3 = 3 * basis.n;
    const State z = lift(zr, basis);
    Vec zrn = zr;
    const double tol = opts.newton_tol * (1.0 + zr.norm());
    bool converged = false;
    for (int it = 0; it < opts.newton_max_iter; ++it) {
      const State zn = lift(zrn, basis);
      const Vec res = zrn - zr - dt * project_increment(flow(z, zn));
      if (res.norm() <= tol) {
        converged = true;
        break;
      }
      const SpMat b = avf_residual_jacobian(z, zn, ops, phys);
      const Mat a = Mat::Identity(n3, n3) - dt * (v.transpose() * (b * v));
      zrn -= a.partialPivLu().solve(res);
      if (stats) {
        ++stats->newton_iterations;
        ++stats->factorizations;
        ++stats->linear_solves;
      }
    }
    if (!converged) {
      const State zn = lift(zrn, basis);
      const Vec res = zrn - zr - dt * project_increment(flow(z, zn));
      if (res.norm() > tol)
        throw ConvergenceError("reduced avf Newton stalled", res.norm());
    }
    // re-evaluate the flow at the converged point so the update is exactly
    // the projected conservative form
    const Vec out = zr + dt * project_increment(flow(z, lift(zrn, basis)));
    check_positive(out);
    return out;
  }

  Vec kahan_step(const Vec& zr, double dt, StepStats* stats) const {
    const long n3 = 3 * basis.n;
    const State z = lift(zr, basis);
    const Mat a =
        Mat::Identity(n3, n3) - (0.5 * dt) * (v.transpose() * (jacobian_fplane(z, ops, phys) * v));
    const Vec d = a.partialPivLu().solve(project_increment(rhs_fplane(z, ops, phys)));
    if (stats) {
      ++stats->factorizations;
      ++stats->linear_solves;
    }
    const Vec out = zr + dt * d;
    check_positive(out);
    return out;
  }

  void check_positive(const Vec& zr) const {
    const State z = lift(zr, basis);
    if (const long node = z.first_nonpositive_depth(); node >= 0)
      throw PositivityError("lifted depth lost positivity", node);
  }
};

std::string rom_label(const ExperimentConfig& cfg) {
  return rom_name(cfg.rom) + "-" + scheme_name(cfg.scheme);
}

// errors escaping run_experiment carry the phase they occurred in
template <typename Fn>
void run_phase(const char* phase, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    throw Error(std::string(phase) + " phase: " + e.what());
  }
}

}  // namespace

RunReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  RunReport rep;
  rep.cfg = cfg;

  const GridSpec grid(cfg.nx, cfg.ny, cfg.xa, cfg.xb, cfg.yc, cfg.yd);
  const DiffOps ops = build_diff_ops(grid);
  const Physics phys = Physics::constant(cfg.g, cfg.f0, grid.n());
  const TimeSpec ts = TimeSpec::from_dt(cfg.T, cfg.dt);
  SolverOptions opts;
  opts.newton_tol = cfg.newton_tol;
  opts.newton_max_iter = cfg.newton_max_iter;
  const State z0 = initial_condition_gaussian_bump(grid);
  const bool with_rom = cfg.rom != RomKind::none && ts.nt > 0;
  if (cfg.rom != RomKind::none && ts.nt == 0)
    rep.notes.push_back("no steps requested; reduced model skipped");

  // full-order phase; the first repeat also collects the trajectory
  std::vector<State> fom_traj;
  if (with_rom) fom_traj.reserve(ts.nt);
  run_phase("fom", [&] {
    rep.fom_invariants.push_back(invariant_sample(0.0, z0, ops, phys));
    std::vector<double> fom_times;
    for (int r = 0; r < cfg.timing_repeats; ++r) {
      const bool collect = r == 0;
      StepStats stats;
      const StepSink sink = [&](long, double t, const State& z) {
        if (!collect) return;
        rep.fom_invariants.push_back(invariant_sample(t, z, ops, phys));
        if (with_rom) fom_traj.push_back(z);
      };
      const double t0 = now_seconds();
      integrate(z0, cfg.scheme, ts, ops, phys, opts, sink, &stats);
      fom_times.push_back(now_seconds() - t0);
      if (collect) rep.fom_step_stats = stats;
    }
    rep.fom_seconds = median(fom_times);
    rep.fom_invariant_errors = invariant_error_series(rep.fom_invariants);
  });

  std::vector<State> rom_traj;
  if (with_rom) {
    const RankRule pod_rule = cfg.rank_rule == "energy" ? RankRule::energy(cfg.kappa)
                                                        : RankRule::fixed(cfg.n);
    const std::string deim_choice =
        cfg.deim_rank_rule.empty() ? cfg.rank_rule : cfg.deim_rank_rule;
    const RankRule deim_rule = deim_choice == "energy" ? RankRule::energy(cfg.kappa)
                                                       : RankRule::fixed(cfg.m);

    // offline phase
    PodBasis basis;
    std::unique_ptr<DeimAvfStepper> deim_stepper;
    TpodModel tpod_model;
    BuildStats build_stats;
    run_phase("offline", [&] {
      std::vector<double> offline_times;
      for (int r = 0; r < cfg.timing_repeats; ++r) {
        const double t0 = now_seconds();
        const SnapshotSet snaps = assemble_snapshots(fom_traj);
        basis = compute_pod_basis(snaps, pod_rule);
        if (cfg.rom == RomKind::pod_deim) {
          const NonlinearSnapshotSet nls = collect_nonlinearity_snapshots(fom_traj, ops, phys);
          const DeimOperator deim = build_deim_operator(basis, nls, deim_rule);
          rep.selected_m = deim.m;
          deim_stepper = std::make_unique<DeimAvfStepper>(deim, basis, ops, phys, opts);
        } else if (cfg.rom == RomKind::tpod) {
          const BlockOps blocks = build_block_ops(ops, phys);
          tpod_model = build_tpod_model(basis, blocks, cfg.tensor_builder, &build_stats);
        }
        offline_times.push_back(now_seconds() - t0);
      }
      rep.offline_seconds = median(offline_times);
    });
    rep.selected_n = basis.n;
    if (basis.truncated)
      rep.notes.push_back("requested rank exceeded the numerical rank; basis truncated");
    if (cfg.rom == RomKind::tpod)
      rep.notes.push_back("tensor builder " + builder_name(cfg.tensor_builder) + ": " +
                          std::to_string(build_stats.multiplies) + " multiplies, " +
                          format_sci(build_stats.seconds) + " s");

    std::unique_ptr<GalerkinRom> galerkin;
    if (cfg.rom == RomKind::pod) galerkin = std::make_unique<GalerkinRom>(basis, ops, phys);

    // online phase over the reduced unknowns only; lifting for diagnostics
    // happens outside the clock
    run_phase("online", [&] {
      const Vec zr0 = project(z0, basis);
      std::vector<Vec> reduced_traj;
      reduced_traj.reserve(ts.nt);
      std::vector<double> online_times;
      for (int r = 0; r < cfg.timing_repeats; ++r) {
        const bool collect = r == 0;
        Vec zr = zr0;
        const double t0 = now_seconds();
        for (long k = 1; k <= ts.nt; ++k) {
          switch (cfg.rom) {
            case RomKind::pod:
              zr = cfg.scheme == Scheme::avf ? galerkin->avf_step(zr, ts.dt, opts, nullptr)
                                             : galerkin->kahan_step(zr, ts.dt, nullptr);
              break;
            case RomKind::pod_deim:
              zr = deim_stepper->step(zr, ts.dt);
              break;
            case RomKind::tpod:
              zr = kahan_step_reduced(zr, ts.dt, tpod_model);
              break;
            case RomKind::none:
              break;
          }
          if (collect) reduced_traj.push_back(zr);
        }
        online_times.push_back(now_seconds() - t0);
      }
      rep.online_seconds = median(online_times);
      rep.speedup_online = rep.fom_seconds / rep.online_seconds;
      rep.speedup_total = rep.fom_seconds / (rep.offline_seconds + rep.online_seconds);

      rom_traj.reserve(ts.nt);
      rep.rom_invariants.push_back(invariant_sample(0.0, lift(zr0, basis), ops, phys));
      for (long k = 0; k < ts.nt; ++k) {
        rom_traj.push_back(lift(reduced_traj[k], basis));
        rep.rom_invariants.push_back(
            invariant_sample(static_cast<double>(k + 1) * ts.dt, rom_traj.back(), ops, phys));
      }
      rep.rom_invariant_errors = invariant_error_series(rep.rom_invariants);
      rep.rom_errors = relative_l2_error(fom_traj, rom_traj, grid);
    });
  }

  if (!cfg.out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);
    const auto emit = [&](const std::string& name) {
      const std::string path = (fs::path(cfg.out_dir) / name).string();
      rep.artifacts.push_back(path);
      return path;
    };
    emit_invariant_csv(emit("fom_invariants.csv"), rep.fom_invariants);
    if (with_rom) {
      emit_invariant_csv(emit("rom_invariants.csv"), rep.rom_invariants);
      emit_error_table(emit("rom_errors.csv"),
                       {{rom_label(cfg), rep.selected_n, rep.rom_errors.u, rep.rom_errors.v,
                         rep.rom_errors.h}});
      emit_invariant_error_table(
          emit("invariant_errors.csv"),
          {{"fom-" + scheme_name(cfg.scheme), 0, rep.fom_invariant_errors.H,
            rep.fom_invariant_errors.Z, rep.fom_invariant_errors.V},
           {rom_label(cfg), rep.selected_n, rep.rom_invariant_errors.H,
            rep.rom_invariant_errors.Z, rep.rom_invariant_errors.V}});
    }
    write_report(rep, emit("report.txt"));
  }
  return rep;
}

void write_report(const RunReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  const auto& cfg = report.cfg;
  out << "grid: " << cfg.nx << " x " << cfg.ny << "\n";
  out << "dt: " << cfg.dt << "\nT: " << cfg.T << "\n";
  out << "scheme: " << scheme_name(cfg.scheme) << "\n";
  out << "rom: " << rom_name(cfg.rom) << "\n";
  if (cfg.rom != RomKind::none) {
    out << "selected_n: " << report.selected_n << "\n";
    if (cfg.rom == RomKind::pod_deim) out << "selected_m: " << report.selected_m << "\n";
  }
  out << std::fixed << std::setprecision(3);
  out << "fom_seconds: " << report.fom_seconds << "\n";
  if (cfg.rom != RomKind::none) {
    out << "offline_seconds: " << report.offline_seconds << "\n";
    out << "online_seconds: " << report.online_seconds << "\n";
    out << "speedup_online: " << report.speedup_online << "\n";
    out << "speedup_total: " << report.speedup_total << "\n";
  }
  out << "fom_newton_iterations: " << report.fom_step_stats.newton_iterations << "\n";
  out << "fom_linear_solves: " << report.fom_step_stats.linear_solves << "\n";
  const auto inv = [&out](const char* tag, const InvariantErrors& e) {
    out << tag << "_energy_error: " << format_sci(e.H) << "\n";
    out << tag << "_enstrophy_error: " << format_sci(e.Z) << "\n";
    out << tag << "_mass_error: " << format_sci(e.M) << "\n";
    out << tag << "_vorticity_error: " << format_sci(e.V) << "\n";
  };
  inv("fom", report.fom_invariant_errors);
  if (cfg.rom != RomKind::none) {
    inv("rom", report.rom_invariant_errors);
    out << "rom_error_u: " << format_sci(report.rom_errors.u) << "\n";
    out << "rom_error_v: " << format_sci(report.rom_errors.v) << "\n";
    out << "rom_error_h: " << format_sci(report.rom_errors.h) << "\n";
  }
  for (const auto& a : report.artifacts) out << "artifact: " << a << "\n";
  for (const auto& n : report.notes) out << "note: " << n << "\n";
  if (!out) throw IoError("short write to " + path);
}

namespace {

PodBasis synthetic_basis(long N, long n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  PodBasis basis;
  const auto ortho = [&]() {
    Mat a(N, n);
    for (long j = 0; j < n; ++j)
      for (long i = 0; i < N; ++i) a(i, j) = dist(rng);
    return Mat(Eigen::HouseholderQR<Mat>(a).householderQ() * Mat::Identity(N, n));
  };
  basis.Vu = ortho();
  basis.Vv = ortho();
  basis.Vh = ortho();
  basis.mean_u = Field::Zero(N);
  basis.mean_v = Field::Zero(N);
  basis.mean_h = Field::Zero(N);
  basis.n = n;
  return basis;
}

}  // namespace

std::vector<BenchResult> run_tensor_bench(const std::vector<long>& grid_sizes,
                                          const std::vector<long>& mode_counts, int repeats) {
  if (repeats < 1) throw ConfigError("need repeats >= 1");
  std::vector<BenchResult> results;
  for (long nx : grid_sizes) {
    const GridSpec grid(nx, nx);
    const DiffOps ops = build_diff_ops(grid);
    const BlockOps blocks = build_block_ops(ops, Physics::constant(1.0, 0.0, grid.n()));
    for (long n : mode_counts) {
      const PodBasis basis =
          synthetic_basis(grid.n(), n, 0x5eed0000u + 1000 * static_cast<std::uint64_t>(nx) + n);
      const auto time_builder = [&](const std::string& name, auto&& build) {
        build();  // warm-up
        std::vector<double> times;
        for (int r = 0; r < repeats; ++r) {
          const double t0 = now_seconds();
          build();
          times.push_back(now_seconds() - t0);
        }
        results.push_back({name, grid.n(), n, median(times)});
      };
      time_builder("mumode",
                   [&] { build_reduced_quadratic_mumode(basis, blocks); });
      time_builder("rowwise-batched",
                   [&] { build_reduced_quadratic_rowwise(basis, blocks, true); });
    }
  }
  return results;
}

void emit_bench_csv(const std::string& path, const std::vector<BenchResult>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << "builder,N,n,seconds\n";
  out << std::setprecision(17);
  for (const auto& r : rows)
    out << r.builder << ',' << r.N << ',' << r.n << ',' << r.seconds << '\n';
  if (!out) throw IoError("short write to " + path);
}

}  // namespace swrom
