#include "CLI11.hpp"
#include "swrom/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

namespace {

using namespace swrom;

struct CommonOpts {
  std::string config;
  std::vector<std::string> sets;
  std::string grid, scheme, rom, n, m, T, dt, out;
};

void add_common(CLI::App* sub, CommonOpts& o) {
  sub->add_option("--config", o.config, "flat key=value configuration file");
  sub->add_option("--set", o.sets, "override as key=value (repeatable)");
  sub->add_option("--grid", o.grid, "grid as NXxNY, e.g. 100x100");
  sub->add_option("--scheme", o.scheme, "avf | kahan");
  sub->add_option("--rom", o.rom, "none | pod | pod-deim | tpod");
  sub->add_option("--n", o.n, "POD mode count (rank_rule=fixed)");
  sub->add_option("--m", o.m, "hyper-reduction mode count (rank_rule=fixed)");
  sub->add_option("--T", o.T, "final time");
  sub->add_option("--dt", o.dt, "time step");
  sub->add_option("--out", o.out, "output directory for artifacts");
}

ExperimentConfig build_config(const CommonOpts& o) {
  ExperimentConfig cfg;
  if (!o.config.empty()) cfg = load_config(o.config);
  if (!o.grid.empty()) {
    const auto x = o.grid.find('x');
    if (x == std::string::npos) throw ConfigError("--grid expects NXxNY");
    apply_override(cfg, "nx", o.grid.substr(0, x));
    apply_override(cfg, "ny", o.grid.substr(x + 1));
  }
  if (!o.scheme.empty()) apply_override(cfg, "scheme", o.scheme);
  if (!o.rom.empty()) apply_override(cfg, "rom", o.rom);
  if (!o.n.empty()) apply_override(cfg, "n", o.n);
  if (!o.m.empty()) apply_override(cfg, "m", o.m);
  if (!o.T.empty()) apply_override(cfg, "T", o.T);
  if (!o.dt.empty()) apply_override(cfg, "dt", o.dt);
  if (!o.out.empty()) apply_override(cfg, "out_dir", o.out);
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

std::vector<long> parse_long_list(const std::string& s, const std::string& what) {
  std::vector<long> out;
  std::size_t from = 0;
  while (from <= s.size()) {
    const auto to = s.find(',', from);
    const std::string item = s.substr(from, to == std::string::npos ? std::string::npos : to - from);
    if (item.empty()) throw ConfigError("empty entry in " + what);
    try {
      std::size_t pos = 0;
      out.push_back(std::stol(item, &pos));
      if (pos != item.size()) throw ConfigError("bad entry '" + item + "' in " + what);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("bad entry '" + item + "' in " + what);
    }
    if (to == std::string::npos) break;
    from = to + 1;
  }
  return out;
}

std::string rom_label(const ExperimentConfig& cfg) {
  return to_string(cfg.rom) + "-" + to_string(cfg.scheme);
}

void print_report(const RunReport& rep) {
  const auto& cfg = rep.cfg;
  std::cout << "grid " << cfg.nx << "x" << cfg.ny << "  dt " << cfg.dt << "  T " << cfg.T
            << "  scheme " << to_string(cfg.scheme) << "  rom " << to_string(cfg.rom) << "\n";
  std::cout << "fom: " << rep.fom_seconds << " s, invariant errors H " << rep.fom_invariant_errors.H
            << " Z " << rep.fom_invariant_errors.Z << " M " << rep.fom_invariant_errors.M << " V "
            << rep.fom_invariant_errors.V << "\n";
  if (cfg.rom != RomKind::none) {
    std::cout << "rom: n " << rep.selected_n;
    if (cfg.rom == RomKind::pod_deim) std::cout << ", m " << rep.selected_m;
    std::cout << ", offline " << rep.offline_seconds << " s, online " << rep.online_seconds
              << " s, speedup online " << rep.speedup_online << ", total " << rep.speedup_total
              << "\n";
    std::cout << "rom errors: u " << rep.rom_errors.u << "  v " << rep.rom_errors.v << "  h "
              << rep.rom_errors.h << "\n";
    std::cout << "rom invariant errors: H " << rep.rom_invariant_errors.H << " Z "
              << rep.rom_invariant_errors.Z << " V " << rep.rom_invariant_errors.V << "\n";
  }
  for (const auto& a : rep.artifacts) std::cout << "wrote " << a << "\n";
  for (const auto& n : rep.notes) std::cout << "note: " << n << "\n";
}

int run_compare(const CommonOpts& common, const std::string& pipelines_csv,
                const std::string& modes_csv, int jobs) {
  const ExperimentConfig base = build_config(common);
  std::vector<ExperimentConfig> cfgs;
  std::size_t from = 0;
  std::vector<std::string> pipelines;
  while (from <= pipelines_csv.size()) {
    const auto to = pipelines_csv.find(',', from);
    pipelines.push_back(pipelines_csv.substr(
        from, to == std::string::npos ? std::string::npos : to - from));
    if (to == std::string::npos) break;
    from = to + 1;
  }
  const std::vector<long> modes = parse_long_list(modes_csv, "--modes");
  for (const auto& p : pipelines) {
    for (long n : modes) {
      ExperimentConfig cfg = base;
      apply_override(cfg, "rom", p);
      if (cfg.rom == RomKind::none) throw ConfigError("compare pipelines cannot include none");
      // each hyper-reduced pipeline is tied to its scheme
      if (cfg.rom == RomKind::pod_deim) cfg.scheme = Scheme::avf;
      if (cfg.rom == RomKind::tpod) cfg.scheme = Scheme::kahan;
      cfg.n = n;
      cfg.rank_rule = "fixed";
      if (!base.out_dir.empty())
        cfg.out_dir = (std::filesystem::path(base.out_dir) / (p + "-n" + std::to_string(n)))
                          .string();
      cfgs.push_back(cfg);
    }
  }

  std::vector<RunReport> reports(cfgs.size());
  std::vector<std::exception_ptr> errors(cfgs.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cfgs.size()) return;
      try {
        reports[i] = run_experiment(cfgs[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int nthreads = std::max(1, std::min<int>(jobs, static_cast<int>(cfgs.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<ErrorTableRow> err_rows;
  std::vector<InvariantErrorRow> inv_rows;
  std::vector<std::string> fom_seen;
  for (const auto& rep : reports) {
    const std::string label = rom_label(rep.cfg);
    err_rows.push_back(
        {label, rep.selected_n, rep.rom_errors.u, rep.rom_errors.v, rep.rom_errors.h});
    const std::string fom_method = "fom-" + to_string(rep.cfg.scheme);
    if (std::find(fom_seen.begin(), fom_seen.end(), fom_method) == fom_seen.end()) {
      fom_seen.push_back(fom_method);
      inv_rows.push_back({fom_method, 0, rep.fom_invariant_errors.H, rep.fom_invariant_errors.Z,
                          rep.fom_invariant_errors.V});
    }
    inv_rows.push_back({label, rep.selected_n, rep.rom_invariant_errors.H,
                        rep.rom_invariant_errors.Z, rep.rom_invariant_errors.V});
    std::cout << label << " n=" << rep.selected_n << "  err u " << rep.rom_errors.u << "  v "
              << rep.rom_errors.v << "  h " << rep.rom_errors.h << "  speedup online "
              << rep.speedup_online << "\n";
  }
  if (!base.out_dir.empty()) {
    namespace fs = std::filesystem;
    fs::create_directories(base.out_dir);
    const std::string err_path = (fs::path(base.out_dir) / "rom_errors.csv").string();
    const std::string inv_path = (fs::path(base.out_dir) / "invariant_errors.csv").string();
    emit_error_table(err_path, err_rows);
    emit_invariant_error_table(inv_path, inv_rows);
    std::cout << "wrote " << err_path << "\nwrote " << inv_path << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    CLI::App app{"structure-preserving shallow water solver with reduced-order models"};
    app.require_subcommand(1);

    CommonOpts fom_opts;
    CLI::App* fom = app.add_subcommand("fom", "run the full-order model only");
    add_common(fom, fom_opts);

    CommonOpts rom_opts;
    CLI::App* rom = app.add_subcommand("rom", "run the full-order model plus one reduced model");
    add_common(rom, rom_opts);

    CommonOpts cmp_opts;
    std::string pipelines = "pod-deim,tpod";
    std::string modes = "10,20,30";
    int jobs = 1;
    CLI::App* cmp =
        app.add_subcommand("compare", "sweep reduced pipelines and mode counts, emit tables");
    add_common(cmp, cmp_opts);
    cmp->add_option("--pipelines", pipelines, "comma list of pod, pod-deim, tpod");
    cmp->add_option("--modes", modes, "comma list of POD mode counts");
    cmp->add_option("--jobs", jobs, "independent runs in flight");

    std::string sizes = "40,70,100";
    std::string bench_modes = "10,30,50";
    int repeats = 3;
    std::string bench_out = "tensors_bench.csv";
    CLI::App* bench =
        app.add_subcommand("tensors-bench", "time the reduced-quadratic tensor builders");
    bench->add_option("--sizes", sizes, "comma list of square grid sizes nx (N = nx*nx)");
    bench->add_option("--modes", bench_modes, "comma list of POD mode counts");
    bench->add_option("--repeats", repeats, "timed repetitions after one warm-up");
    bench->add_option("--out", bench_out, "CSV output path");

    CLI11_PARSE(app, argc, argv);

    if (fom->parsed()) {
      ExperimentConfig cfg = build_config(fom_opts);
      cfg.rom = RomKind::none;
      print_report(run_experiment(cfg));
      return 0;
    }
    if (rom->parsed()) {
      const ExperimentConfig cfg = build_config(rom_opts);
      if (cfg.rom == RomKind::none)
        throw ConfigError("rom subcommand needs --rom pod, pod-deim or tpod");
      print_report(run_experiment(cfg));
      return 0;
    }
    if (cmp->parsed()) return run_compare(cmp_opts, pipelines, modes, jobs);
    if (bench->parsed()) {
      const auto results = run_tensor_bench(parse_long_list(sizes, "--sizes"),
                                            parse_long_list(bench_modes, "--modes"), repeats);
      emit_bench_csv(bench_out, results);
      for (const auto& r : results)
        std::cout << r.builder << " N=" << r.N << " n=" << r.n << "  " << r.seconds << " s\n";
      std::cout << "wrote " << bench_out << "\n";
      return 0;
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
