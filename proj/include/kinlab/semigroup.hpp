#pragma once

// The kinetic propagator: Galilean shear Gamma_t, the Kolmogorov heat
// kernel p_t and its Fourier multiplier, the semigroup P_t = Gamma_t (p_t *),
// the damped Duhamel integral I_lambda, the theta frequency-interaction
// sets, and the measurable shadows of the Schauder/commutator estimates.

#include "kinlab/paraproduct.hpp"

#include <algorithm>
#include <set>

namespace kinlab {

// Gamma_t f(x,v) = f(x + t v, v): per v-row spectral translation in x by
// t * v_signed.  Exact group law; when t*xi lands on the eta lattice this
// coincides with an exact shear of the 2-D mode lattice.
namespace detail {

// shear on the mode lattice: (k,l) -> (k, l + m0*k mod n_v); exact when
// t = m0 * (L_x/L_v)
inline void lattice_shear_hat(SpectralField& fh, long m0) {
  const GridSpec& g = *fh.grid;
  std::vector<cplx> col(g.n_v);
  for (int i = 0; i < g.n_x; ++i) {
    long m = m0 * g.kx(i);
    long shift = ((m % g.n_v) + g.n_v) % g.n_v;
    if (shift == 0) continue;
    for (int j = 0; j < g.n_v; ++j) col[j] = fh.at(i, j);
    for (int j = 0; j < g.n_v; ++j)
      fh.at(i, int((j + shift) % g.n_v)) = col[j];
  }
}

inline bool shear_is_lattice(const GridSpec& g, double t, long* m0) {
  double m = t / g.shear_quantum();
  double r = std::round(m);
  if (std::abs(m - r) < 1e-9 * std::max(1.0, std::abs(m)) &&
      std::abs(r) < 1e15) {
    *m0 = long(r);
    return true;
  }
  return false;
}

}  // namespace detail

inline RealField galilean_shift(const RealField& f, double t) {
  const GridSpec& g = *f.grid;
  if (t == 0) return f;
  long m0 = 0;
  if (detail::shear_is_lattice(g, t, &m0)) {
    SpectralField fh = forward_transform(f);
    detail::lattice_shear_hat(fh, m0);
    return inverse_transform(fh);
  }
  RealField out(g);
  auto& fft = detail::FftEngine::instance();
  std::vector<cplx> work(g.n_x);
  for (int j = 0; j < g.n_v; ++j) {
    const double shift = t * g.v_coord(j);
    for (int i = 0; i < g.n_x; ++i) work[i] = f.at(i, j);
    fft.forward_1d(g.n_x, work.data());
    for (int i = 0; i < g.n_x; ++i)
      work[i] *= std::exp(cplx(0, std::remainder(g.xi(i) * shift, 2 * pi)));
    fft.backward_1d(g.n_x, work.data());
    for (int i = 0; i < g.n_x; ++i) out.at(i, j) = work[i].real() / g.n_x;
  }
  return out;
}

// hat p_t(xi,eta) = exp(-t|eta|^2 - t^3|xi|^2/3 - t^2 <xi,eta>)
inline double heat_symbol(double t, double xi, double eta) {
  return std::exp(-t * eta * eta - t * t * t * xi * xi / 3.0 -
                  t * t * xi * eta);
}

inline SpectralField heat_kernel_hat(const GridSpec& g, double t) {
  if (t <= 0) throw std::invalid_argument("heat_kernel_hat needs t > 0");
  SpectralField out(g, true);
  for (int i = 0; i < g.n_x; ++i)
    for (int j = 0; j < g.n_v; ++j)
      out.at(i, j) = heat_symbol(t, g.xi(i), g.eta(j));
  return out;
}

// p_t(x,v) = (4 pi^2 t^4/3)^{-1/2} exp(-(3x^2 + (3x-2tv)^2)/(4t^3)), d = 1,
// sampled at signed coordinates; the prefactor is (2 pi)^{-d} det(Sigma)^{-1/2}
// for the covariance of (sqrt2 int_0^t B, sqrt2 B_t), so the mass is 1 and
// the characteristic function is exp(-t eta^2 - t^3 xi^2/3 - t^2 xi eta).
// Throws if the box truncates the kernel.
inline RealField kinetic_kernel(const GridSpec& g, double t) {
  if (t <= 0) throw std::invalid_argument("kinetic_kernel needs t > 0");
  RealField out(g);
  const double pref = std::sqrt(3.0) / (2.0 * pi * t * t);
  for (int i = 0; i < g.n_x; ++i) {
    const double x = g.x_coord(i);
    for (int j = 0; j < g.n_v; ++j) {
      const double v = g.v_coord(j);
      const double q = 3 * x * x + (3 * x - 2 * t * v) * (3 * x - 2 * t * v);
      out.at(i, j) = pref * std::exp(-q / (4 * t * t * t));
    }
  }
  double mass = out.integral();
  if (mass < 1.0 - 1e-6)
    throw std::runtime_error("kinetic_kernel: box too small for t");
  return out;
}

// P_t f = Gamma_t (p_t * f); the convolution is the multiplier hat p_t.
inline RealField apply_semigroup(const RealField& f, double t) {
  if (t < 0) throw std::invalid_argument("apply_semigroup needs t >= 0");
  if (t == 0) return f;
  const GridSpec& g = *f.grid;
  SpectralField fh = forward_transform(f);
  for (int i = 0; i < g.n_x; ++i)
    for (int j = 0; j < g.n_v; ++j)
      fh.at(i, j) *= heat_symbol(t, g.xi(i), g.eta(j));
  return galilean_shift(inverse_transform(fh), t);
}

struct SemigroupParams {
  double lambda = 0;
  int t_substeps = 4;
};

struct PathField {
  std::vector<double> times;
  std::vector<RealField> fields;

  static PathField constant(const RealField& f, double t0, double t1) {
    PathField p;
    p.times = {t0, t1};
    p.fields = {f, f};
    return p;
  }

  const GridSpec& grid() const { return *fields.front().grid; }

  RealField eval(double t) const {
    if (t <= times.front()) return fields.front();
    if (t >= times.back()) return fields.back();
    auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t k = it - times.begin();
    double w = (t - times[k - 1]) / (times[k] - times[k - 1]);
    RealField out = fields[k - 1];
    for (std::size_t m = 0; m < out.values.size(); ++m)
      out.values[m] = (1 - w) * out.values[m] + w * fields[k].values[m];
    return out;
  }
};

// I_lambda f(t) = int_0^t exp(-lambda (t-s)) P_{t-s} f(s) ds,
// composite trapezoid over the stored times refined by t_substeps.
inline RealField duhamel(const PathField& src, const SemigroupParams& par,
                         double t) {
  if (t < src.times.front() - 1e-12 || t > src.times.back() + 1e-12)
    throw std::out_of_range("duhamel: t outside source range");
  const GridSpec& g = src.grid();
  std::vector<double> nodes;
  nodes.push_back(src.times.front());
  for (std::size_t k = 1; k < src.times.size(); ++k) {
    double a = src.times[k - 1], b = std::min(src.times[k], t);
    if (b <= a) break;
    int n = std::max(1, par.t_substeps);
    for (int m = 1; m <= n; ++m) nodes.push_back(a + (b - a) * m / n);
    if (b >= t) break;
  }
  RealField acc(g);
  if (nodes.size() < 2) return acc;  // empty integration range
  for (std::size_t m = 0; m < nodes.size(); ++m) {
    double w;
    if (m == 0)
      w = (nodes[1] - nodes[0]) / 2;
    else if (m + 1 == nodes.size())
      w = (nodes[m] - nodes[m - 1]) / 2;
    else
      w = (nodes[m + 1] - nodes[m - 1]) / 2;
    double s = nodes[m];
    RealField term = apply_semigroup(src.eval(s), t - s);
    term *= w * std::exp(-par.lambda * (t - s));
    acc += term;
  }
  return acc;
}

// Theta^t_j = { l >= -1 : 2^l <= 16 (2^j + t 8^j),  2^j <= 16 (2^l + t 8^l) }
inline std::set<int> theta_set(int j, double t, int l_max) {
  if (j < 0 || t < 0) throw std::invalid_argument("theta_set needs j,t >= 0");
  std::set<int> out;
  const double twoj = std::ldexp(1.0, j), eightj = std::ldexp(1.0, 3 * j);
  for (int l = -1; l <= l_max; ++l) {
    double twol = std::ldexp(1.0, l), eightl = std::ldexp(1.0, 3 * l);
    if (twol <= 16 * (twoj + t * eightj) && twoj <= 16 * (twol + t * eightl))
      out.insert(l);
  }
  return out;
}

struct SchauderReport {
  double slope_in = 0;     // fitted Besov slope of the probe
  double slope_out = 0;    // fitted slope of I_0 f(t_max)
  double gain = 0;         // slope_in - slope_out (regularity gained)
  bool degenerate = false;
  std::vector<std::pair<int, double>> level_ratios;  // ||R_j I f|| / ||R_j f||
};

inline SchauderReport schauder_gain(const RealField& f,
                                    const DyadicPartition& part, double t_max,
                                    int substeps = 64) {
  SchauderReport rep;
  if (f.sup() == 0) {
    rep.degenerate = true;
    return rep;
  }
  SemigroupParams par;
  par.t_substeps = substeps;
  RealField If = duhamel(PathField::constant(f, 0, t_max), par, t_max);
  BesovIndex idx;  // s=0, p=q=inf
  BesovReport rin = besov_norm(f, idx, part);
  BesovReport rout = besov_norm(If, idx, part);
  rep.slope_in = rin.fitted_slope;
  rep.slope_out = rout.fitted_slope;
  rep.gain = rep.slope_in - rep.slope_out;
  for (std::size_t k = 0; k < rin.per_level.size(); ++k) {
    double a = rin.per_level[k].second, b = rout.per_level[k].second;
    rep.level_ratios.emplace_back(rin.per_level[k].first,
                                  a > 0 ? b / a : 0.0);
  }
  return rep;
}

// R_j P_t(f < g) - R_j(Gamma_t f < P_t g)
inline RealField semigroup_commutator(const RealField& f, const RealField& g,
                                      double t, int j,
                                      const DyadicPartition& part) {
  if (t <= 0) throw std::invalid_argument("semigroup_commutator needs t > 0");
  RealField lhs = part.block(apply_semigroup(para_lt(f, g, part), t), j);
  RealField rhs =
      part.block(para_lt(galilean_shift(f, t), apply_semigroup(g, t), part), j);
  return lhs - rhs;
}

// sup_t ||f(t)||_inf + sup_{s<t} ||f(t) - Gamma_{t-s} f(s)||_inf / (t-s)^beta
inline double kinetic_holder_seminorm(const PathField& path, double beta) {
  if (path.times.size() < 2)
    throw std::invalid_argument("kinetic_holder_seminorm needs >= 2 times");
  double sup = 0, inc = 0;
  for (const RealField& u : path.fields) sup = std::max(sup, u.sup());
  for (std::size_t a = 0; a < path.times.size(); ++a)
    for (std::size_t b = a + 1; b < path.times.size(); ++b) {
      double dt = path.times[b] - path.times[a];
      RealField d = path.fields[b] - galilean_shift(path.fields[a], dt);
      inc = std::max(inc, d.sup() / std::pow(dt, beta));
    }
  return sup + inc;
}

}  // namespace kinlab
