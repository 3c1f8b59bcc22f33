#pragma once

// Euler-Maruyama integration of the second-order interacting particle
// system in a frozen environment field, empirical densities by periodic
// Gaussian deposition, and the mean-field comparison utilities.
//
// The mean-field force is evaluated through the kernel's trigonometric
// interpolant: the O(N n_x) mode-sum route is an exact rearrangement of the
// O(N^2) pairwise sum, not an approximation.

#include "kinlab/solver.hpp"

namespace kinlab {

struct ParticleEnsemble {
  std::vector<double> X, V;
  double t = 0;
  long excursions = 0;  // |V| > L_v/2 events; a valid run keeps this at 0

  int size() const { return int(X.size()); }
};

struct SdeConfig {
  double h = 1e-3;
  double T = 0.2;
  std::uint64_t seed = 0;
  const GridSpec* grid = nullptr;      // geometry for W, K and densities
  const RealField* W_field = nullptr;  // frozen environment sample, optional
  std::vector<double> K;               // kernel samples on the x-grid
  double bandwidth_x = 0, bandwidth_v = 0;  // KDE scales; 0 = 2 * spacing
};

// i.i.d. sample from a nonnegative grid density (inverse CDF over cells,
// uniform within a cell); deterministic in (seed, index)
inline ParticleEnsemble sample_ensemble(const RealField& density, int n,
                                        std::uint64_t seed) {
  if (n <= 0) throw std::invalid_argument("sample_ensemble: empty ensemble");
  const GridSpec& g = *density.grid;
  std::vector<double> cdf(g.size());
  double acc = 0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    acc += std::max(density.values[k], 0.0);
    cdf[k] = acc;
  }
  RandomStream rng(seed, "ensemble-init");
  ParticleEnsemble e;
  e.X.resize(n);
  e.V.resize(n);
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform(3 * i) * acc;
    std::size_t k =
        std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
    int ix = int(k / g.n_v), jv = int(k % g.n_v);
    double x = (ix + rng.uniform(3 * i + 1)) * g.dx();
    double v = g.v_coord(jv) + (rng.uniform(3 * i + 2) - 0.5) * g.dv();
    e.X[i] = x - g.L_x * std::floor(x / g.L_x);
    e.V[i] = v;
  }
  return e;
}

namespace detail {

inline double wrap_x(double x, double L) { return x - L * std::floor(x / L); }

// bilinear interpolation on the torus field
inline double interp_field(const RealField& f, double x, double v) {
  const GridSpec& g = *f.grid;
  double fx = wrap_x(x, g.L_x) / g.dx();
  double fv = wrap_x(v, g.L_v) / g.dv();
  int i0 = int(fx) % g.n_x, j0 = int(fv) % g.n_v;
  int i1 = (i0 + 1) % g.n_x, j1 = (j0 + 1) % g.n_v;
  double ax = fx - std::floor(fx), av = fv - std::floor(fv);
  return (1 - ax) * ((1 - av) * f.at(i0, j0) + av * f.at(i0, j1)) +
         ax * ((1 - av) * f.at(i1, j0) + av * f.at(i1, j1));
}

struct KernelModes {
  std::vector<cplx> khat;  // DFT of the samples / n
  double k0 = 0;           // kernel value at distance 0
};

inline KernelModes kernel_modes(const std::vector<double>& K) {
  KernelModes m;
  const int n = int(K.size());
  m.khat.assign(K.begin(), K.end());
  detail::FftEngine::instance().forward_1d(n, m.khat.data());
  for (cplx& c : m.khat) c /= double(n);
  m.k0 = K[0];
  return m;
}

// trigonometric interpolant of the kernel at distance d
inline double kernel_at(const KernelModes& m, const GridSpec& g, double d) {
  cplx acc = 0;
  const int n = int(m.khat.size());
  for (int k = 0; k < n; ++k)
    acc += m.khat[k] * std::exp(cplx(0, g.xi(k) * d));
  return acc.real();
}

}  // namespace detail

// mean-field force on every particle, exact mode-sum route:
// F_i = (1/N) sum_{j != i} K(X_i - X_j)
//     = (1/N) [ sum_k khat_k e^{i xi_k X_i} conj(S_k) - K(0) ],
// S_k = sum_j e^{i xi_k X_j}
inline std::vector<double> mean_field_force(const std::vector<double>& X,
                                            const std::vector<double>& K,
                                            const GridSpec& g) {
  const int n = int(K.size()), N = int(X.size());
  detail::KernelModes m = detail::kernel_modes(K);
  std::vector<cplx> S(n, cplx(0));
  for (int j = 0; j < N; ++j)
    for (int k = 0; k < n; ++k) S[k] += std::exp(cplx(0, -g.xi(k) * X[j]));
  std::vector<double> F(N, 0.0);
  for (int i = 0; i < N; ++i) {
    cplx acc = 0;
    for (int k = 0; k < n; ++k)
      acc += m.khat[k] * std::exp(cplx(0, g.xi(k) * X[i])) * S[k];
    F[i] = (acc.real() - m.k0) / N;
  }
  return F;
}

// the O(N^2) pairwise reference, same interpolant
inline std::vector<double> mean_field_force_pairwise(
    const std::vector<double>& X, const std::vector<double>& K,
    const GridSpec& g) {
  const int N = int(X.size());
  detail::KernelModes m = detail::kernel_modes(K);
  std::vector<double> F(N, 0.0);
  for (int i = 0; i < N; ++i) {
    double acc = 0;
    for (int j = 0; j < N; ++j) {
      if (j == i) continue;
      acc += detail::kernel_at(m, g, X[i] - X[j]);
    }
    F[i] = acc / N;
  }
  return F;
}

inline ParticleEnsemble step_em(const ParticleEnsemble& e, const SdeConfig& c,
                                int step_index) {
  if (e.size() == 0) throw std::invalid_argument("step_em: empty ensemble");
  const GridSpec& g = *c.grid;
  ParticleEnsemble out = e;
  std::vector<double> F;
  if (!c.K.empty()) F = mean_field_force(e.X, c.K, g);
  RandomStream rng(c.seed, "em-noise");
  const double sq = std::sqrt(2 * c.h);
  for (int i = 0; i < e.size(); ++i) {
    double drift = 0;
    if (c.W_field) drift += detail::interp_field(*c.W_field, e.X[i], e.V[i]);
    if (!F.empty()) drift += F[i];
    double xi = rng.sub(std::uint64_t(i)).normal(std::uint64_t(step_index));
    out.X[i] = detail::wrap_x(e.X[i] + c.h * e.V[i], g.L_x);
    out.V[i] = e.V[i] + c.h * drift + sq * xi;
    if (std::abs(out.V[i]) > g.L_v / 2) ++out.excursions;
  }
  out.t = e.t + c.h;
  return out;
}

// Gaussian-product KDE on the grid, periodic in x; normalised per particle
// against the discrete sums so the total mass is exactly one
inline RealField empirical_density(const ParticleEnsemble& e,
                                   const SdeConfig& c) {
  if (e.size() == 0)
    throw std::invalid_argument("empirical_density: empty ensemble");
  const GridSpec& g = *c.grid;
  const double hx = c.bandwidth_x > 0 ? c.bandwidth_x : 2 * g.dx();
  const double hv = c.bandwidth_v > 0 ? c.bandwidth_v : 2 * g.dv();
  const int rx = std::min(g.n_x / 2, int(std::ceil(4 * hx / g.dx())));
  const int rv = std::min(g.n_v / 2, int(std::ceil(4 * hv / g.dv())));
  RealField out(g);
  std::vector<double> wx(2 * rx + 1), wv(2 * rv + 1);
  for (int i = 0; i < e.size(); ++i) {
    int ic = int(std::floor(e.X[i] / g.dx()));
    // v indexed on the signed axis
    double vf = detail::wrap_x(e.V[i], g.L_v) / g.dv();
    int jc = int(std::floor(vf));
    double swx = 0, swv = 0;
    for (int a = -rx; a <= rx; ++a) {
      double d = e.X[i] - (ic + a) * g.dx();
      d = std::remainder(d, g.L_x);
      wx[a + rx] = std::exp(-d * d / (2 * hx * hx));
      swx += wx[a + rx];
    }
    for (int b = -rv; b <= rv; ++b) {
      double d = vf - (jc + b);
      wv[b + rv] = std::exp(-d * d * g.dv() * g.dv() / (2 * hv * hv));
      swv += wv[b + rv];
    }
    double norm = 1.0 / (e.size() * g.cell() * swx * swv);
    for (int a = -rx; a <= rx; ++a) {
      int ix = ((ic + a) % g.n_x + g.n_x) % g.n_x;
      for (int b = -rv; b <= rv; ++b) {
        int jv = ((jc + b) % g.n_v + g.n_v) % g.n_v;
        out.at(ix, jv) += wx[a + rx] * wv[b + rv] * norm;
      }
    }
  }
  return out;
}

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<std::vector<double>> V;  // velocity snapshots
  std::vector<long> excursions;
};

inline TrajectoryRecord run_sde(ParticleEnsemble e, const SdeConfig& c,
                                const std::vector<double>& record_times) {
  TrajectoryRecord rec;
  std::size_t next = 0;
  int n_steps = int(std::round(c.T / c.h));
  auto maybe_record = [&](const ParticleEnsemble& s) {
    while (next < record_times.size() &&
           s.t >= record_times[next] - 1e-12) {
      rec.times.push_back(s.t);
      rec.V.push_back(s.V);
      rec.excursions.push_back(s.excursions);
      ++next;
    }
  };
  maybe_record(e);
  for (int k = 0; k < n_steps; ++k) {
    e = step_em(e, c, k);
    maybe_record(e);
  }
  return rec;
}

struct MomentReport {
  double max_ratio = 0;  // max over (s,t) of E|V_t - V_s|^p / (t-s)^{p/2}
  double se_at_max = 0;
  std::vector<std::array<double, 3>> rows;  // (s, t, ratio)
};

inline MomentReport moment_check(const TrajectoryRecord& rec, int p) {
  if (p != 2 && p != 4)
    throw std::invalid_argument("moment_check: p must be 2 or 4");
  MomentReport rep;
  for (std::size_t a = 0; a < rec.times.size(); ++a)
    for (std::size_t b = a + 1; b < rec.times.size(); ++b) {
      double dt = rec.times[b] - rec.times[a];
      if (dt <= 0) continue;
      const std::vector<double>&va = rec.V[a], &vb = rec.V[b];
      double m = 0, m2 = 0;
      for (std::size_t i = 0; i < va.size(); ++i) {
        double d = std::pow(std::abs(vb[i] - va[i]), p);
        m += d;
        m2 += d * d;
      }
      m /= double(va.size());
      m2 /= double(va.size());
      double se = std::sqrt(std::max(m2 - m * m, 0.0) / double(va.size()));
      double scale = std::pow(dt, p / 2.0);
      rep.rows.push_back({rec.times[a], rec.times[b], m / scale});
      if (m / scale > rep.max_ratio) {
        rep.max_ratio = m / scale;
        rep.se_at_max = se / scale;
      }
    }
  return rep;
}

struct MeanFieldDistance {
  int N = 0;
  std::vector<double> times;
  std::vector<double> l1;  // median over seeds per time
};

inline std::vector<MeanFieldDistance> compare_mean_field(
    const SdeConfig& base, const RealField& phi,
    const std::vector<int>& N_list, const SolveReport& pde, int n_seeds) {
  std::vector<MeanFieldDistance> out;
  for (int N : N_list) {
    if (N <= 0) throw std::invalid_argument("compare_mean_field: N <= 0");
    MeanFieldDistance d;
    d.N = N;
    d.times = pde.path.times;
    std::vector<std::vector<double>> per_seed;
    for (int s = 0; s < n_seeds; ++s) {
      SdeConfig c = base;
      c.seed = base.seed + 1000 * s;
      ParticleEnsemble e = sample_ensemble(phi, N, c.seed + 1);
      std::vector<double> dist;
      std::size_t next = 0;
      int n_steps = int(std::round(c.T / c.h));
      auto maybe = [&](const ParticleEnsemble& en) {
        while (next < pde.path.times.size() &&
               en.t >= pde.path.times[next] - 1e-12) {
          dist.push_back(
              (empirical_density(en, c) - pde.path.fields[next]).l1());
          ++next;
        }
      };
      maybe(e);
      for (int k = 0; k < n_steps; ++k) {
        e = step_em(e, c, k);
        maybe(e);
      }
      per_seed.push_back(dist);
    }
    for (std::size_t t = 0; t < d.times.size(); ++t) {
      std::vector<double> col;
      for (auto& v : per_seed)
        if (t < v.size()) col.push_back(v[t]);
      std::sort(col.begin(), col.end());
      d.l1.push_back(col.empty() ? 0.0 : col[col.size() / 2]);
    }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace kinlab
