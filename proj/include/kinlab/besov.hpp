#pragma once

// Weighted anisotropic Besov norms from dyadic block data, the
// difference-quotient norm they are equivalent to, slope fitting, and the
// polynomial diagnostic weight.

#include "kinlab/dyadic.hpp"
#include "kinlab/rng.hpp"

#include <limits>
#include <optional>

namespace kinlab {

struct BesovIndex {
  double s = 0;
  double p = std::numeric_limits<double>::infinity();
  double q = std::numeric_limits<double>::infinity();
  std::optional<double> weight_kappa;
};

struct BesovReport {
  std::vector<std::pair<int, double>> per_level;  // (j, ||R_j f||_{L^p(rho)})
  double norm = 0;
  double fitted_slope = 0;
  int window_lo = 0, window_hi = 0;
};

// rho(x,v) = ((1+|x|^2)^{1/3} + 1 + |v|^2)^{-1/2}, comparable to (1+|z|_a)^{-1}
inline double varrho(double x, double v) {
  return 1.0 / std::sqrt(std::cbrt((1.0 + x * x)) + 1.0 + v * v);
}

inline RealField weight_eval(const GridSpec& g, double kappa) {
  RealField w(g);
  for (int i = 0; i < g.n_x; ++i)
    for (int j = 0; j < g.n_v; ++j)
      w.at(i, j) = std::pow(varrho(g.x_coord(i), g.v_coord(j)), kappa);
  return w;
}

// least-squares slope of log2(y_j) vs j over levels [lo,hi]; levels with
// y <= 0 are skipped
inline double fit_slope(const std::vector<std::pair<int, double>>& lv, int lo,
                        int hi) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (auto [j, y] : lv) {
    if (j < lo || j > hi || y <= 0) continue;
    double ly = std::log2(y);
    sx += j; sy += ly; sxx += double(j) * j; sxy += j * ly;
    ++n;
  }
  if (n < 2) return 0;
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline std::pair<int, int> default_fit_window(const DyadicPartition& part) {
  return {2, std::max(2, part.j_max() - 2)};
}

inline BesovReport besov_norm(const RealField& f, const BesovIndex& idx,
                              const DyadicPartition& part) {
  const GridSpec& g = part.grid();
  std::optional<RealField> w;
  if (idx.weight_kappa && *idx.weight_kappa != 0.0)
    w = weight_eval(g, *idx.weight_kappa);

  BesovReport rep;
  SpectralField fh = forward_transform(f);
  for (int j = -1; j <= part.j_max(); ++j) {
    RealField bj = inverse_transform(part.block_hat(fh, j));
    if (w)
      for (std::size_t k = 0; k < bj.values.size(); ++k)
        bj.values[k] *= w->values[k];
    rep.per_level.emplace_back(j, bj.lp(idx.p));
  }

  if (std::isinf(idx.q)) {
    for (auto [j, y] : rep.per_level)
      rep.norm = std::max(rep.norm, y * std::pow(2.0, idx.s * j));
  } else {
    double s = 0;
    for (auto [j, y] : rep.per_level)
      s += std::pow(std::pow(2.0, idx.s * j) * y, idx.q);
    rep.norm = std::pow(s, 1.0 / idx.q);
  }

  auto [lo, hi] = default_fit_window(part);
  rep.window_lo = lo;
  rep.window_hi = hi;
  rep.fitted_slope = fit_slope(rep.per_level, lo, hi);
  return rep;
}

// M-th forward difference along h as one spectral multiplier pass:
// (delta_h^{(M)} f)^hat(zeta) = (e^{i zeta.h} - 1)^M fhat(zeta)
inline RealField difference_field(const RealField& f, double hx, double hv,
                                  int order) {
  const GridSpec& g = *f.grid;
  SpectralField fh = forward_transform(f);
  for (int i = 0; i < g.n_x; ++i)
    for (int j = 0; j < g.n_v; ++j) {
      cplx m = std::exp(cplx(0, g.xi(i) * hx + g.eta(j) * hv)) - 1.0;
      cplx mm = 1.0;
      for (int k = 0; k < order; ++k) mm *= m;
      fh.at(i, j) *= mm;
    }
  return inverse_transform(fh);
}

// Difference-quotient Besov norm: quadrature of
//   ( \int_{|h|_a<=1} (||delta_h^{(M)} f||_p / |h|_a^s)^q dh/|h|_a^{a.m} )^{1/q} + ||f||_p
// over a log-radial lattice of shifts.  In coordinates h1 = s1 (w r)^3,
// h2 = s2 (1-w) r the measure dh/|h|_a^4 becomes 3 w^2 dr/r dw per sign
// quadrant.
inline double difference_norm(const RealField& f, double s, double p, double q,
                              int n_radii = 16, int n_dirs = 16) {
  if (s <= 0) throw std::invalid_argument("difference_norm needs s > 0");
  const int order = int(std::floor(s)) + 1;
  const int n_omega = std::max(1, n_dirs / 4);
  const double r_min = 1.0 / 64.0;
  const double dlr = std::log(1.0 / r_min) / n_radii;
  const double dw = 1.0 / n_omega;

  double acc = 0, sup_acc = 0;
  for (int ir = 0; ir < n_radii; ++ir) {
    double r = r_min * std::exp((ir + 0.5) * dlr);
    for (int io = 0; io < n_omega; ++io) {
      double w = (io + 0.5) * dw;
      double h1 = std::pow(w * r, 3.0), h2 = (1.0 - w) * r;
      for (int sgn = 0; sgn < 4; ++sgn) {
        double sx = (sgn & 1) ? -1 : 1, sv = (sgn & 2) ? -1 : 1;
        double dn = difference_field(f, sx * h1, sv * h2, order).lp(p);
        if (std::isinf(q)) {
          sup_acc = std::max(sup_acc, dn / std::pow(r, s));
        } else {
          acc += std::pow(dn / std::pow(r, s), q) * 3.0 * w * w * dlr * dw;
        }
      }
    }
  }
  double seminorm = std::isinf(q) ? sup_acc : std::pow(acc, 1.0 / q);
  return seminorm + f.lp(p);
}

// Random field with spectrum confined to |zeta|_a in [2^j * 0.8, 2^j * 1.0];
// on that shell phi_j = 1 and phi_{j+-1} = 0, so the synthesis has exactly
// one active block per piece.  max_kx optionally restricts the x-band (an
// eta-dominated probe resolves its x-oscillations on any grid).
inline RealField band_limited_field(const GridSpec& g, int level,
                                    const RandomStream& rng,
                                    int max_kx = 1 << 30) {
  SpectralField fh(g, true);
  double lo = std::ldexp(0.8, level), hi = std::ldexp(1.0, level);
  std::uint64_t ctr = 0;
  for (int i = 0; i < g.n_x; ++i)
    for (int j = 0; j < g.n_v; ++j) {
      ++ctr;
      int im = (g.n_x - i) % g.n_x, jm = (g.n_v - j) % g.n_v;
      if (g.idx(i, j) > g.idx(im, jm)) continue;  // fill canonical half
      if (std::abs(g.kx(i)) > max_kx) continue;
      if (std::abs(g.kx(i)) > g.n_x / 3 || std::abs(g.kv(j)) > g.n_v / 3)
        continue;  // keep products representable under the 2/3 rule
      double r = aniso_norm(g.xi(i), g.eta(j));
      if (r < lo || r > hi) continue;
      cplx val(rng.normal(2 * ctr), rng.normal(2 * ctr + 1));
      if (g.idx(i, j) == g.idx(im, jm)) val = cplx(val.real(), 0);
      fh.at(i, j) = val;
      fh.at(im, jm) = std::conj(val);
    }
  return inverse_transform(fh);
}

// sum of per-level pieces scaled 2^{slope * j}; sup-normalised pieces
inline RealField synthesize_slope_field(const GridSpec& g,
                                        const DyadicPartition& part,
                                        double slope, int j_lo, int j_hi,
                                        const RandomStream& rng,
                                        int max_kx = 1 << 30) {
  RealField out(g);
  for (int j = j_lo; j <= std::min(j_hi, part.j_max()); ++j) {
    RealField piece = band_limited_field(g, j, rng.sub(std::uint64_t(j)), max_kx);
    double sup = piece.sup();
    if (sup == 0) continue;
    double amp = std::pow(2.0, slope * j) / sup;
    for (std::size_t k = 0; k < out.values.size(); ++k)
      out.values[k] += amp * piece.values[k];
  }
  return out;
}

// random field spectrally supported in the resolved band (and inside the
// 2/3 dealias box), unit sup norm
inline RealField random_resolved_field(const GridSpec& g,
                                       const DyadicPartition& part,
                                       const RandomStream& rng) {
  SpectralField fh(g, true);
  double band = part.resolved_band();
  std::uint64_t ctr = 0;
  for (int i = 0; i < g.n_x; ++i)
    for (int j = 0; j < g.n_v; ++j) {
      ++ctr;
      int im = (g.n_x - i) % g.n_x, jm = (g.n_v - j) % g.n_v;
      if (g.idx(i, j) > g.idx(im, jm)) continue;
      if (aniso_norm(g.xi(i), g.eta(j)) > band) continue;
      if (std::abs(g.kx(i)) > g.n_x / 3 || std::abs(g.kv(j)) > g.n_v / 3)
        continue;
      double decay = 1.0 / (1.0 + aniso_norm(g.xi(i), g.eta(j)));
      cplx val = decay * cplx(rng.normal(2 * ctr), rng.normal(2 * ctr + 1));
      if (g.idx(i, j) == g.idx(im, jm)) val = cplx(val.real(), 0);
      fh.at(i, j) = val;
      fh.at(im, jm) = std::conj(val);
    }
  RealField f = inverse_transform(fh);
  double sup = f.sup();
  if (sup > 0) f *= 1.0 / sup;
  return f;
}

}  // namespace kinlab
