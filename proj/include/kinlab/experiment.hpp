#pragma once

// Configuration-driven experiment runners behind the CLI: strict JSON
// parsing, deterministic seed derivation, a bounded worker pool whose size
// never changes results, and the per-command pipelines.

#include "kinlab/enhancement.hpp"
#include "kinlab/io.hpp"
#include "kinlab/particles.hpp"

#include <atomic>
#include <chrono>
#include <thread>

namespace kinlab {

// worker pool for embarrassingly parallel index loops; results must be
// written to per-index slots so the schedule cannot leak into the output
inline int& worker_threads() {
  static int n = 1;
  return n;
}

inline void parallel_for(int n, const std::function<void(int)>& fn) {
  int workers = std::max(1, std::min(worker_threads(), n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        int i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  for (auto& t : pool) t.join();
}

namespace cfg {

using nlohmann::json;

inline void reject_unknown(const json& j, std::initializer_list<const char*> keys,
                           const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : keys)
      if (it.key() == k) ok = true;
    if (!ok)
      throw std::invalid_argument("unknown key '" + it.key() + "' in " +
                                  where);
  }
}

inline GridSpec grid_from(const json& j) {
  reject_unknown(j, {"n_x", "n_v", "L_x", "L_v", "dealias"}, "grid");
  return GridSpec(j.value("n_x", 128), j.value("n_v", 256),
                  j.value("L_x", 2 * pi / 800), j.value("L_v", 2 * pi),
                  j.value("dealias", false));
}

inline SpectralMeasureSpec measure_from(const json& j) {
  reject_unknown(j, {"kind", "gamma1", "gamma2", "beta"}, "measure");
  SpectralMeasureSpec sp;
  std::string kind = j.value("kind", "product");
  if (kind == "x_colored")
    sp.kind = MeasureKind::x_colored;
  else if (kind == "v_white_colored")
    sp.kind = MeasureKind::v_white_colored;
  else if (kind == "product")
    sp.kind = MeasureKind::product;
  else
    throw std::invalid_argument("unknown measure kind '" + kind + "'");
  sp.gamma1 = j.value("gamma1", 0.8);
  sp.gamma2 = j.value("gamma2", 0.9);
  sp.beta = j.value("beta", 0.6);
  return sp;
}

inline RealField bump_from(const json& j, const GridSpec& g) {
  reject_unknown(j, {"x0", "v0", "sx", "sv", "normalize"}, "bump");
  RealField f(g);
  double x0 = j.value("x0", 0.0), v0 = j.value("v0", 0.0);
  double sx = j.value("sx", g.L_x / 6), sv = j.value("sv", g.L_v / 12);
  for (int i = 0; i < g.n_x; ++i)
    for (int jj = 0; jj < g.n_v; ++jj) {
      double dx = std::remainder(g.x_coord(i) - x0, g.L_x);
      double dv = g.v_coord(jj) - v0;
      f.at(i, jj) =
          std::exp(-dx * dx / (2 * sx * sx) - dv * dv / (2 * sv * sv));
    }
  if (j.value("normalize", true)) f *= 1.0 / f.integral();
  return f;
}

}  // namespace cfg

struct RunContext {
  std::filesystem::path out_dir;
  std::uint64_t root_seed = 0;
  nlohmann::json config;
  std::chrono::steady_clock::time_point t0 =
      std::chrono::steady_clock::now();

  RandomStream stream(std::string_view module) const {
    return RandomStream(root_seed, module);
  }

  void write_manifest(const std::string& command) const {
    nlohmann::json m = {
        {"command", command},
        {"config", config},
        {"config_hash", detail::fnv1a(config.dump())},
        {"root_seed", root_seed},
        {"version", "kinlab 0.1.0"},
        {"threads", worker_threads()},
        {"wall_seconds",
         std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
             .count()}};
    std::ofstream(out_dir / "manifest.json") << m.dump(2) << "\n";
  }
};

// ---- per-command runners ----------------------------------------------

inline void run_besov_analyze(const RunContext& ctx) {
  const nlohmann::json& j = ctx.config;
  cfg::reject_unknown(j, {"grid", "field", "measure", "s", "char_s", "seed",
                          "output_dir"},
                      "besov-analyze config");
  GridSpec g = cfg::grid_from(j.value("grid", nlohmann::json::object()));
  DyadicPartition part(g);
  nlohmann::json fj = j.value("field", nlohmann::json::object());
  cfg::reject_unknown(fj, {"type", "slope", "j_lo", "j_hi", "max_kx", "eps"},
                      "field");
  std::string type = fj.value("type", "synthetic-slope");
  RealField f(g);
  if (type == "synthetic-slope") {
    f = synthesize_slope_field(g, part, fj.value("slope", -0.8),
                               fj.value("j_lo", 1),
                               fj.value("j_hi", part.j_max()),
                               ctx.stream("besov-field"),
                               fj.value("max_kx", 1 << 30));
  } else if (type == "noise") {
    SpectralMeasureSpec sp =
        cfg::measure_from(j.value("measure", nlohmann::json::object()));
    NoiseSample ns = sample_noise(sp, g, ctx.root_seed);
    Mollifier m;
    m.epsilon = fj.value("eps", 1.0 / 16.0);
    f = mollify(ns, m);
  } else {
    throw std::invalid_argument("unknown field type '" + type + "'");
  }
  BesovIndex idx;
  idx.s = j.value("s", 0.0);
  BesovReport rep = besov_norm(f, idx, part);
  io::write_besov_csv(rep, idx, ctx.out_dir / "besov.csv");
  double inf = std::numeric_limits<double>::infinity();
  double s_char = j.value("char_s", 0.9);
  std::vector<std::vector<double>> rows = {
      {s_char, difference_norm(f, s_char, inf, inf),
       besov_norm(f, BesovIndex{s_char, inf, inf, {}}, part).norm,
       part.partition_defect()}};
  io::write_csv({"s", "difference_norm", "besov_norm", "partition_defect"},
                rows, ctx.out_dir / "characterization.csv");
  io::dump_field(f, ctx.out_dir / "field");
}

inline void run_noise_sample(const RunContext& ctx) {
  const nlohmann::json& j = ctx.config;
  cfg::reject_unknown(j, {"grid", "measure", "samples", "eps", "seed",
                          "output_dir"},
                      "noise-sample config");
  GridSpec g = cfg::grid_from(j.value("grid", nlohmann::json::object()));
  DyadicPartition part(g);
  SpectralMeasureSpec sp =
      cfg::measure_from(j.value("measure", nlohmann::json::object()));
  MeasureReport val = validate_measure(sp, g);
  if (!val.ok) throw std::invalid_argument("measure invalid: " + val.reason);
  int n = j.value("samples", 2);
  double eps = j.value("eps", 1.0 / 16.0);
  Mollifier m;
  m.epsilon = eps;
  std::vector<std::vector<double>> rows(n);
  for (int s = 0; s < n; ++s) {
    NoiseSample ns = sample_noise(sp, g, ctx.root_seed + s);
    RealField x = mollify(ns, m);
    if (s == 0)
      io::dump_field(x, ctx.out_dir / "sample0");
    BesovReport rep = besov_norm(x, BesovIndex{}, part);
    rows[s] = {double(s), x.sup(), rep.fitted_slope};
  }
  io::write_csv({"sample", "sup", "fitted_slope"}, rows,
                ctx.out_dir / "samples.csv");
  nlohmann::json meta = {{"kind", int(sp.kind)},
                         {"gamma1", sp.gamma1},
                         {"gamma2", sp.gamma2},
                         {"beta", sp.beta},
                         {"seed", ctx.root_seed},
                         {"epsilon", eps},
                         {"worst_shift_integral", val.worst_shift_integral}};
  std::ofstream(ctx.out_dir / "measure.json") << meta.dump(2) << "\n";
}

inline void run_enhance(const RunContext& ctx) {
  const nlohmann::json& j = ctx.config;
  cfg::reject_unknown(j, {"grid", "measure", "eps", "alpha", "T", "nodes",
                          "ladder", "mc_samples", "seed", "output_dir"},
                      "enhance config");
  GridSpec g = cfg::grid_from(j.value("grid", nlohmann::json::object()));
  DyadicPartition part(g);
  SpectralMeasureSpec sp =
      cfg::measure_from(j.value("measure", nlohmann::json::object()));
  double eps = j.value("eps", 1.0 / 16.0);
  double alpha = j.value("alpha", 0.62);
  double T = j.value("T", 0.1);
  int nodes = j.value("nodes", 64);
  EnhancedDrift ed = build_enhanced_drift(sp, part, ctx.root_seed, eps, alpha,
                                          T, {0.0, 1.0, 10.0}, nodes,
                                          j.value("ladder", true));
  io::dump_field(ed.b, ctx.out_dir / "drift");
  io::dump_field(ed.products.front(), ctx.out_dir / "product_lambda0");
  std::vector<double> w_mu = measure_cell_mass(sp, g);
  Mollifier m;
  m.epsilon = eps;
  const int mc_samples = j.value("mc_samples", 96);
  const double tt = g.snap_time(T);
  std::vector<int> chaos_levels;
  for (int lvl : {1, 2, 3})
    if (lvl <= part.j_max()) chaos_levels.push_back(lvl);
  // per-level MC mean/std of R_j M^eps, chunked deterministically
  const int n_chunks = 8, chunk = std::max(1, mc_samples / 8);
  std::vector<std::vector<RealField>> cmean(n_chunks), cm2(n_chunks);
  parallel_for(n_chunks, [&](int c) {
    std::vector<RealField> mean(chaos_levels.size(), RealField(g)),
        m2(chaos_levels.size(), RealField(g));
    for (int s = c * chunk; s < (c + 1) * chunk; ++s) {
      NoiseSample ns = sample_noise(sp, g, ctx.root_seed + 100 + s);
      RealField prod =
          resonant_drift_product(mollify_hat(ns, m), part, tt, 0, nodes);
      SpectralField ph = forward_transform(prod);
      for (std::size_t li = 0; li < chaos_levels.size(); ++li) {
        RealField rj = inverse_transform(part.block_hat(ph, chaos_levels[li]));
        mean[li] += rj;
        for (std::size_t k = 0; k < g.size(); ++k)
          m2[li].values[k] += rj.values[k] * rj.values[k];
      }
    }
    cmean[c] = std::move(mean);
    cm2[c] = std::move(m2);
  });
  std::vector<std::vector<double>> rows;
  const int M = n_chunks * chunk;
  for (std::size_t li = 0; li < chaos_levels.size(); ++li) {
    RealField mean(g), m2f(g);
    for (int c = 0; c < n_chunks; ++c) {
      mean += cmean[c][li];
      m2f += cm2[c][li];
    }
    mean *= 1.0 / M;
    double se_sup = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      double var =
          std::max(m2f.values[k] / M - mean.values[k] * mean.values[k], 0.0);
      se_sup = std::max(se_sup, std::sqrt(var / M));
    }
    int lvl = chaos_levels[li];
    double quad = zeroth_chaos_quadrature(w_mu, m, part, lvl, tt, 0, nodes).sup();
    double j22 = j22_cancellation_check(w_mu, m, part, lvl, tt, nodes);
    rows.push_back({double(lvl), tt, eps, mean.sup(), quad, se_sup, j22});
  }
  io::write_csv({"j", "t", "eps", "mc_mean_norm", "quad_norm", "mc_std",
                 "j22_residual"},
                rows, ctx.out_dir / "chaos.csv");
  std::vector<std::vector<double>> conv;
  for (const CauchyRow& r : ed.convergence)
    conv.push_back({r.eps_coarse, r.eps_fine, r.lambda_diff, r.product_diff});
  io::write_csv({"eps_coarse", "eps_fine", "lambda_diff", "product_diff"},
                conv, ctx.out_dir / "convergence.csv");
  nlohmann::json meta = {{"a_quantity", ed.a_quantity},
                         {"product_slope", ed.product_slope},
                         {"alpha", alpha},
                         {"T", ed.T},
                         {"epsilon", eps}};
  std::ofstream(ctx.out_dir / "enhanced.json") << meta.dump(2) << "\n";
}

inline void write_solve_report(const SolveReport& rep,
                               const DyadicPartition& part,
                               const std::filesystem::path& dir) {
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < rep.path.times.size(); ++k) {
    BesovReport br = besov_norm(rep.path.fields[k], BesovIndex{}, part);
    rows.push_back({rep.path.times[k], rep.mass_series[k],
                    rep.entropy_series[k], rep.dissipation_series[k],
                    br.fitted_slope});
  }
  io::write_csv({"t", "mass", "entropy", "dissipation", "slope"}, rows,
                dir / "diagnostics.csv");
  std::filesystem::create_directories(dir / "fields");
  for (std::size_t k = 0; k < rep.path.times.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "u_%04zu", k);
    io::dump_field(rep.path.fields[k], dir / "fields" / name);
  }
}

inline void run_solve_linear(const RunContext& ctx) {
  const nlohmann::json& j = ctx.config;
  cfg::reject_unknown(j, {"grid", "phi", "T", "dt", "lambda", "save_every",
                          "drift_amp", "seed", "output_dir"},
                      "solve-linear config");
  GridSpec g = cfg::grid_from(j.value("grid", nlohmann::json::object()));
  DyadicPartition part(g);
  LinearProblem p;
  p.phi = cfg::bump_from(j.value("phi", nlohmann::json::object()), g);
  p.T = j.value("T", 0.1);
  p.dt = j.value("dt", 1e-3);
  p.lambda = j.value("lambda", 0.0);
  p.save_every = j.value("save_every", 25);
  if (j.contains("drift_amp")) {
    RealField b(g);
    double amp = j["drift_amp"].get<double>();
    for (int i = 0; i < g.n_x; ++i)
      for (int jj = 0; jj < g.n_v; ++jj)
        b.at(i, jj) = amp * std::cos(2 * pi * (i * g.dx()) / g.L_x);
    p.b = PathField::constant(b, 0, p.T);
  }
  SolveReport rep = solve_linear(p);
  write_solve_report(rep, part, ctx.out_dir);
  PathField sharp = extract_sharp(rep, p, part);
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < sharp.times.size(); ++k) {
    BesovReport bu = besov_norm(rep.path.fields[k], BesovIndex{}, part);
    BesovReport bs = besov_norm(sharp.fields[k], BesovIndex{}, part);
    rows.push_back({sharp.times[k], bu.fitted_slope, bs.fitted_slope});
  }
  io::write_csv({"t", "slope_u", "slope_sharp"}, rows,
                ctx.out_dir / "sharp.csv");
}

inline void run_solve_mfl(const RunContext& ctx) {
  const nlohmann::json& j = ctx.config;
  cfg::reject_unknown(j, {"grid", "phi", "T", "dt", "save_every", "K_amp",
                          "with_noise_W", "measure", "eps", "W_amp", "seed",
                          "output_dir"},
                      "solve-mfl config");
  GridSpec g = cfg::grid_from(j.value("grid", nlohmann::json::object()));
  DyadicPartition part(g);
  NonlinearProblem p;
  p.phi = cfg::bump_from(j.value("phi", nlohmann::json::object()), g);
  p.T = j.value("T", 0.2);
  p.dt = j.value("dt", 1e-3);
  p.save_every = j.value("save_every", 25);
  double kamp = j.value("K_amp", 0.4);
  p.K.resize(g.n_x);
  for (int i = 0; i < g.n_x; ++i)
    p.K[i] = kamp * std::sin(2 * pi * i / g.n_x);
  if (j.value("with_noise_W", false)) {
    SpectralMeasureSpec sp =
        cfg::measure_from(j.value("measure", nlohmann::json::object()));
    sp.kind = MeasureKind::x_colored;  // div_v-free environment
    NoiseSample ns = sample_noise(sp, g, ctx.root_seed);
    Mollifier m;
    m.epsilon = j.value("eps", 1.0 / 16.0);
    RealField W = mollify(ns, m);
    W *= j.value("W_amp", 0.2) / std::max(W.sup(), 1e-30);
    p.W = W;
  }
  SolveReport rep = solve_mean_field(p);
  write_solve_report(rep, part, ctx.out_dir);
  std::vector<std::vector<double>> slack;
  for (std::size_t k = 0; k < rep.path.times.size(); ++k)
    slack.push_back({rep.path.times[k], rep.entropy_slack[k]});
  io::write_csv({"t", "entropy_slack"}, slack, ctx.out_dir / "entropy.csv");
}

inline void run_particles(const RunContext& ctx) {
  const nlohmann::json& j = ctx.config;
  cfg::reject_unknown(j, {"grid", "phi", "h", "T", "N", "seed", "output_dir"},
                      "particles config");
  GridSpec g = cfg::grid_from(j.value("grid", nlohmann::json::object()));
  RealField phi = cfg::bump_from(j.value("phi", nlohmann::json::object()), g);
  SdeConfig c;
  c.grid = &g;
  c.h = j.value("h", 1e-3);
  c.T = j.value("T", 0.2);
  c.seed = ctx.root_seed;
  int N = j.value("N", 2000);
  ParticleEnsemble e = sample_ensemble(phi, N, c.seed + 1);
  std::vector<double> record;
  for (int k = 0; k <= 4; ++k) record.push_back(c.T * k / 4);
  TrajectoryRecord rec = run_sde(e, c, record);
  std::vector<std::vector<double>> rows;
  for (std::size_t k = 0; k < rec.times.size(); ++k) {
    double m2 = 0, m4 = 0;
    for (std::size_t i = 0; i < rec.V[k].size(); ++i) {
      double d = rec.V[k][i] - rec.V[0][i];
      m2 += d * d;
      m4 += d * d * d * d;
    }
    m2 /= double(rec.V[k].size());
    m4 /= double(rec.V[k].size());
    rows.push_back({rec.times[k], m2, m4, double(rec.excursions[k])});
  }
  io::write_csv({"t", "m2", "m4", "excursions"}, rows,
                ctx.out_dir / "moments.csv");
  ParticleEnsemble fin = e;
  for (int k = 0; k < int(std::round(c.T / c.h)); ++k)
    fin = step_em(fin, c, k);
  io::dump_field(empirical_density(fin, c), ctx.out_dir / "density");
}

inline void run_schauder_bench(const RunContext& ctx) {
  const nlohmann::json& j = ctx.config;
  cfg::reject_unknown(j, {"grid", "beta_probe", "t_max", "seed", "output_dir"},
                      "schauder-bench config");
  GridSpec g = cfg::grid_from(j.value("grid", nlohmann::json::object()));
  DyadicPartition part(g);
  double beta_probe = j.value("beta_probe", 0.6);
  double t_max = j.value("t_max", 0.25);
  RealField f = synthesize_slope_field(g, part, -beta_probe, 1, part.j_max(),
                                       ctx.stream("schauder"), 0);
  SchauderReport rep = schauder_gain(f, part, t_max);
  nlohmann::json meta = {{"t", t_max},
                         {"beta_probe", beta_probe},
                         {"slope_in", rep.slope_in},
                         {"slope_out", rep.slope_out},
                         {"gain", rep.gain}};
  io::write_level_csv(rep.level_ratios, meta, ctx.out_dir / "schauder.csv");

  // companion commutator diagnostic on the same grid
  RealField h = synthesize_slope_field(g, part, -beta_probe + 0.2, 0,
                                       part.j_max(),
                                       ctx.stream("schauder-pair"), 1);
  RealField fc = synthesize_slope_field(g, part, -beta_probe, 0, part.j_max(),
                                        ctx.stream("schauder-f"), 1);
  double tc = g.snap_time(std::min(0.05, t_max));
  std::vector<std::pair<int, double>> com_rows;
  for (int jj = 2; jj <= part.j_max(); ++jj)
    com_rows.emplace_back(jj,
                          semigroup_commutator(fc, h, tc, jj, part).sup());
  nlohmann::json cmeta = {{"t", tc},
                          {"beta_probe", beta_probe},
                          {"slopes", fit_slope(com_rows, 2, part.j_max() - 1)}};
  io::write_level_csv(com_rows, cmeta, ctx.out_dir / "commutator.csv");
}

inline void run_full_suite(const RunContext& ctx) {
  using nlohmann::json;
  auto sub = [&](const std::string& name, json extra) {
    RunContext c = ctx;
    c.out_dir = ctx.out_dir / name;
    std::filesystem::create_directories(c.out_dir);
    c.config = std::move(extra);
    return c;
  };
  json small_grid = {{"n_x", 64}, {"n_v", 128}, {"L_x", 2 * pi / 800},
                     {"L_v", 2 * pi}};
  json box_grid = {{"n_x", 64}, {"n_v", 64}, {"L_x", 16.0}, {"L_v", 16.0}};
  run_besov_analyze(sub("besov", {{"grid", small_grid}}));
  run_noise_sample(sub("noise", {{"grid", small_grid}}));
  run_enhance(sub("enhance", {{"grid", {{"n_x", 32}, {"n_v", 128},
                                        {"L_x", 2 * pi / 800},
                                        {"L_v", 2 * pi}}},
                              {"T", 0.05},
                              {"nodes", 48},
                              {"ladder", false}}));
  run_solve_linear(sub("linear", {{"grid", box_grid},
                                  {"T", 0.05},
                                  {"drift_amp", 0.3},
                                  {"save_every", 25}}));
  run_solve_mfl(sub("mfl", {{"grid", box_grid}, {"T", 0.05}}));
  run_particles(sub("particles", {{"grid", box_grid}, {"N", 500}, {"T", 0.1}}));
  run_schauder_bench(sub("schauder", {{"grid", small_grid}}));
}

inline int run_command(const std::string& command, RunContext& ctx) {
  std::filesystem::create_directories(ctx.out_dir);
  if (command == "besov-analyze")
    run_besov_analyze(ctx);
  else if (command == "noise-sample")
    run_noise_sample(ctx);
  else if (command == "enhance")
    run_enhance(ctx);
  else if (command == "solve-linear")
    run_solve_linear(ctx);
  else if (command == "solve-mfl")
    run_solve_mfl(ctx);
  else if (command == "particles")
    run_particles(ctx);
  else if (command == "schauder-bench")
    run_schauder_bench(ctx);
  else if (command == "full-suite")
    run_full_suite(ctx);
  else
    throw std::invalid_argument("unknown command '" + command + "'");
  ctx.write_manifest(command);
  return 0;
}

}  // namespace kinlab
