#pragma once

// Renormalized resonant product X o grad_v I_lambda X: the Monte-Carlo
// realisation on the grid, the matching zeroth-chaos quadrature, the odd-term
// cancellation check, Cauchy-in-eps convergence ladders, and assembly of the
// enhanced drift consumed by the solvers.
//
// Both sides of the chaos comparison share one time-node rule with nodes on
// the shear lattice, so the semigroup inside the Duhamel integral is an exact
// lattice shear and the Monte-Carlo mean matches the quadrature up to
// sampling noise.

#include "kinlab/noise.hpp"
#include "kinlab/semigroup.hpp"

namespace kinlab {

struct ChaosNodeRule {
  std::vector<double> s;       // quadrature nodes on [0, t]
  std::vector<double> weight;  // trapezoid weights for the actual nodes
  double t = 0;
};

// Nodes on the shear lattice, geometrically refined towards s = t (where the
// semigroup age tau = t - s is small and stiff columns are still alive).
inline ChaosNodeRule chaos_nodes(const GridSpec& g, double t, int n_min = 64) {
  double q = g.shear_quantum();
  long steps = std::lround(t / q);
  if (std::abs(steps * q - t) > 1e-9 * std::max(1.0, t))
    throw std::invalid_argument("chaos_nodes: t must sit on the shear lattice");
  ChaosNodeRule rule;
  rule.t = t;
  if (steps == 0) {
    rule.s = {0.0};
    rule.weight = {0.0};
    return rule;
  }
  // ages tau = t - s: 0, q, then geometric up to t; shrink the ratio until
  // the requested node count is reached
  std::vector<long> ages;
  double ratio = std::pow(double(steps), 1.0 / std::max(2, n_min - 2));
  for (;;) {
    ages = {0, 1};
    double cur = 1;
    while (ages.back() < steps) {
      cur = std::max(cur * ratio, cur + 1);
      ages.push_back(std::min(steps, long(std::ceil(cur))));
    }
    if (int(ages.size()) >= std::min<long>(n_min, steps + 1) || ratio <= 1.0)
      break;
    ratio = std::sqrt(ratio);
  }
  for (auto it = ages.rbegin(); it != ages.rend(); ++it)
    rule.s.push_back((steps - *it) * q);
  rule.weight.assign(rule.s.size(), 0.0);
  for (std::size_t m = 0; m < rule.s.size(); ++m) {
    double lo = m == 0 ? rule.s.front() : rule.s[m - 1];
    double hi = m + 1 == rule.s.size() ? rule.s.back() : rule.s[m + 1];
    rule.weight[m] = (hi - lo) / 2;
  }
  return rule;
}

// grad_v I_lambda X(t) for a time-constant spectral field: per node the
// heat multiplier and the exact lattice shear, folded into one column-wise
// accumulation with early skips for heat-dead (column, node) pairs
inline SpectralField duhamel_grad_v_hat(const SpectralField& x_hat,
                                        const ChaosNodeRule& rule,
                                        double lambda) {
  const GridSpec& g = *x_hat.grid;
  SpectralField acc(g, x_hat.hermitian);
  const double q = g.shear_quantum();
  std::vector<long> shear_steps(rule.s.size());
  std::vector<double> taus(rule.s.size()), damps(rule.s.size());
  for (std::size_t m = 0; m < rule.s.size(); ++m) {
    double tau = rule.t - rule.s[m];
    long m0 = std::lround(tau / q);
    if (std::abs(m0 * q - tau) > 1e-9 * std::max(1.0, tau))
      throw std::logic_error("chaos node off the shear lattice");
    taus[m] = tau;
    shear_steps[m] = m0;
    damps[m] = rule.weight[m] * std::exp(-lambda * tau);
  }
  for (int i = 0; i < g.n_x; ++i) {
    const double xi = g.xi(i);
    const long k = g.kx(i);
    for (std::size_t m = 0; m < rule.s.size(); ++m) {
      const double tau = taus[m];
      const double xdecay = tau * tau * tau * xi * xi / 3.0;
      if (xdecay > 700) continue;
      const long shift =
          ((shear_steps[m] * k) % g.n_v + g.n_v) % g.n_v;
      const double cx = damps[m] * std::exp(-xdecay);
      for (int j = 0; j < g.n_v; ++j) {
        const cplx& v = x_hat.at(i, j);
        if (v == cplx(0)) continue;
        const double eta = g.eta(j);
        double e = tau * eta * eta + tau * tau * xi * eta;
        if (e > 700) continue;
        acc.at(i, int((j + shift) % g.n_v)) += cx * std::exp(-e) * v;
      }
    }
  }
  return derivative_multiplier(acc, Derivative::grad_v);
}

// M^eps_t = X_eps o grad_v I_lambda X_eps(t)
inline RealField resonant_drift_product(const SpectralField& x_eps_hat,
                                        const DyadicPartition& part, double t,
                                        double lambda, int n_nodes = 64) {
  if (t <= 0) throw std::invalid_argument("resonant_drift_product needs t > 0");
  ChaosNodeRule rule = chaos_nodes(part.grid(), t, n_nodes);
  SpectralField a_hat = duhamel_grad_v_hat(x_eps_hat, rule, lambda);
  return resonant(inverse_transform(x_eps_hat), inverse_transform(a_hat),
                  part);
}

namespace detail {

// psi(z, z') = sum_{|i-j|<=1} phi_i(z) phi_j(z'), with both levels capped
// at the partition's j_max exactly as the grid resonant product truncates
inline double psi_pair(double r1, double r2, int j_max) {
  double acc = 0;
  for (int i = -1; i <= j_max; ++i) {
    double a = lp_phi(i, r1);
    if (a == 0) continue;
    double b = lp_phi(i - 1, r2) + lp_phi(i, r2) +
               (i + 1 <= j_max ? lp_phi(i + 1, r2) : 0.0);
    acc += a * b;
  }
  return acc;
}

}  // namespace detail

namespace detail {

// accumulate the zeroth-chaos symbol onto v-modes; shared by the Lambda
// quadrature and the J22 cancellation check
inline std::vector<cplx> chaos_vmodes(const std::vector<double>& w_mu,
                                      const Mollifier& moll,
                                      const DyadicPartition& part, int level,
                                      double t, double lambda, int n_nodes,
                                      bool j22_only) {
  const GridSpec& g = part.grid();
  ChaosNodeRule rule = chaos_nodes(g, t, n_nodes);
  const double norm = 1.0 / ((2 * pi) * (2 * pi));
  std::vector<cplx> vmode(g.n_v, cplx(0));
  for (int i = 0; i < g.n_x; ++i) {
    const double xi = g.xi(i);
    for (int j = 0; j < g.n_v; ++j) {
      double mass = w_mu[g.idx(i, j)];
      if (mass == 0) continue;
      const double eta = g.eta(j);
      double c = mass * norm;
      double mh = moll.hat(xi, eta);
      c *= mh * mh;
      double r2 = aniso_norm(xi, eta);
      for (std::size_t m = 0; m < rule.s.size(); ++m) {
        double tau = rule.t - rule.s[m];
        if (tau == 0) continue;  // phi_level((0,0)) = 0 for level >= 0
        double kappa = tau * xi;  // output v-frequency: |(0,kappa)|_a = |kappa|
        double phi_out = lp_phi(level, std::abs(kappa));
        if (phi_out == 0) continue;
        long kshift = std::lround(kappa / g.deta());
        if (std::abs(kshift) >= g.n_v / 2) continue;  // damped to nothing
        double pv, psi, amp;
        if (j22_only) {
          // the odd piece: weight eta, kernel without the cross term
          pv = std::exp(-tau * eta * eta -
                        tau * tau * tau * xi * xi / 3.0);
          psi = detail::psi_pair(r2, r2, part.j_max());
          amp = eta;
        } else {
          pv = heat_symbol(tau, xi, eta);
          psi = detail::psi_pair(aniso_norm(xi, eta + kappa), r2,
                                 part.j_max());
          amp = eta + kappa;
        }
        double coeff = c * rule.weight[m] * std::exp(-lambda * tau) * pv *
                       phi_out * psi * amp;
        if (coeff == 0) continue;
        // term: -i * coeff * exp(-i kappa v): accumulate at mode -kshift
        int idx = int(((-kshift) % g.n_v + g.n_v) % g.n_v);
        vmode[idx] += cplx(0, -coeff);
      }
    }
  }
  return vmode;
}

}  // namespace detail

// Lambda^{level,eps}_t(v) = E[R_level M^eps_t], evaluated by frequency
// quadrature of the zeroth-chaos symbol with the same node rule as the
// Monte-Carlo side.  The output depends on v only.
inline RealField zeroth_chaos_quadrature(const std::vector<double>& w_mu,
                                         const Mollifier& moll,
                                         const DyadicPartition& part,
                                         int level, double t,
                                         double lambda = 0, int n_nodes = 64) {
  const GridSpec& g = part.grid();
  std::vector<cplx> vmode = detail::chaos_vmodes(w_mu, moll, part, level, t,
                                                 lambda, n_nodes, false);
  RealField out(g);
  for (int j = 0; j < g.n_v; ++j) {
    cplx acc = 0;
    double v = j * g.dv();
    for (int l = 0; l < g.n_v; ++l) {
      if (vmode[l] == cplx(0)) continue;
      acc += vmode[l] * std::exp(cplx(0, g.eta(l) * v));
    }
    for (int i = 0; i < g.n_x; ++i) out.at(i, j) = acc.real();
  }
  return out;
}

inline RealField zeroth_chaos_quadrature(const SpectralMeasureSpec& sp,
                                         const Mollifier& moll,
                                         const DyadicPartition& part,
                                         int level, double t,
                                         double lambda = 0, int n_nodes = 64) {
  return zeroth_chaos_quadrature(measure_cell_mass(sp, part.grid()), moll,
                                 part, level, t, lambda, n_nodes);
}

// quadrature of the odd J22 piece alone, as the total complex mode mass;
// identically zero for eta-symmetric measures
inline double j22_cancellation_check(const std::vector<double>& w_mu,
                                     const Mollifier& moll,
                                     const DyadicPartition& part, int level,
                                     double t, int n_nodes = 64) {
  if (t == 0) return 0.0;
  const GridSpec& g = part.grid();
  for (int i = 0; i < g.n_x; ++i)
    for (int j = 1; j < g.n_v; ++j)
      if (w_mu[g.idx(i, j)] != w_mu[g.idx(i, (g.n_v - j) % g.n_v)])
        throw std::invalid_argument("j22 check requires an eta-even measure");
  std::vector<cplx> vm =
      detail::chaos_vmodes(w_mu, moll, part, level, t, 0, n_nodes, true);
  double acc = 0;
  for (const cplx& c : vm) acc += std::abs(c);
  return acc;
}

// test-only probe: the same quadrature on a deliberately eta-asymmetric mass
inline double j22_asymmetric_probe(std::vector<double> w_mu,
                                   const Mollifier& moll,
                                   const DyadicPartition& part, int level,
                                   double t, int n_nodes = 64) {
  const GridSpec& g = part.grid();
  for (int i = 0; i < g.n_x; ++i)
    for (int j = 1; j < g.n_v / 2; ++j) w_mu[g.idx(i, j)] *= 2.0;
  std::vector<cplx> vm =
      detail::chaos_vmodes(w_mu, moll, part, level, t, 0, n_nodes, true);
  double acc = 0;
  for (const cplx& c : vm) acc += std::abs(c);
  return acc;
}

struct CauchyRow {
  double eps_coarse = 0, eps_fine = 0;
  double lambda_diff = 0;   // weighted sup_level sup_t of quadrature diffs
  double product_diff = 0;  // same for the full product, seed-averaged
};

// weighted sup over a level window: sup_j 2^{(1-2alpha) j} ||R_j f||_inf
inline double chaos_weighted_sup(const RealField& f, const DyadicPartition& part,
                                 double alpha, int j_lo, int j_hi) {
  SpectralField fh = forward_transform(f);
  double worst = 0;
  for (int j = j_lo; j <= std::min(j_hi, part.j_max()); ++j) {
    double n = inverse_transform(part.block_hat(fh, j)).sup();
    worst = std::max(worst, std::pow(2.0, (1 - 2 * alpha) * j) * n);
  }
  return worst;
}

inline std::vector<CauchyRow> cauchy_convergence(
    const SpectralMeasureSpec& sp, const DyadicPartition& part, int n_seeds,
    const std::vector<double>& eps_ladder, const std::vector<double>& times,
    double alpha, int j_lo, int j_hi, int n_nodes = 64,
    std::uint64_t seed0 = 1) {
  const GridSpec& g = part.grid();
  std::vector<double> w_mu = measure_cell_mass(sp, g);
  std::vector<CauchyRow> rows;
  for (std::size_t k = 0; k + 1 < eps_ladder.size(); ++k) {
    CauchyRow row;
    row.eps_coarse = eps_ladder[k];
    row.eps_fine = eps_ladder[k + 1];
    Mollifier mc, mf;
    mc.epsilon = row.eps_coarse;
    mf.epsilon = row.eps_fine;
    for (double t : times) {
      for (int j = j_lo; j <= std::min(j_hi, part.j_max()); ++j) {
        RealField d =
            zeroth_chaos_quadrature(w_mu, mc, part, j, t, 0, n_nodes) -
            zeroth_chaos_quadrature(w_mu, mf, part, j, t, 0, n_nodes);
        row.lambda_diff =
            std::max(row.lambda_diff,
                     std::pow(2.0, (1 - 2 * alpha) * j) * d.sup());
      }
      double acc = 0;
      for (int s = 0; s < n_seeds; ++s) {
        NoiseSample ns = sample_noise(sp, g, seed0 + s);
        RealField pc = resonant_drift_product(mollify_hat(ns, mc), part, t, 0,
                                              n_nodes);
        RealField pf = resonant_drift_product(mollify_hat(ns, mf), part, t, 0,
                                              n_nodes);
        acc += chaos_weighted_sup(pc - pf, part, alpha, j_lo, j_hi);
      }
      row.product_diff = std::max(row.product_diff, acc / n_seeds);
    }
    rows.push_back(row);
  }
  return rows;
}

struct LambdaProbeReport {
  double lhs = 0;  // sup over the lambda probes of ||b o grad_v I_lambda f||
  double rhs = 0;  // 2 sup_{s in [0,t]} ||b o grad_v I^t_s f||
  bool holds = false;
  std::vector<std::pair<double, double>> lambda_norms;
};

// sup_lambda || b o grad_v I_lambda f || <= 2 sup_s || b o grad_v I^t_s f ||
inline LambdaProbeReport sup_lambda_probe(const RealField& b,
                                          const RealField& f,
                                          const DyadicPartition& part, double T,
                                          int n_nodes = 64) {
  LambdaProbeReport rep;
  const GridSpec& g = part.grid();
  SpectralField fh = forward_transform(f);
  RealField bb = b;
  BesovIndex idx;  // sup-norm based C^0 surrogate; constants are empirical
  for (double lambda : {0.0, 1.0, 10.0, 100.0}) {
    double n = resonant(bb,
                        inverse_transform(duhamel_grad_v_hat(
                            fh, chaos_nodes(g, T, n_nodes), lambda)),
                        part)
                   .sup();
    rep.lambda_norms.emplace_back(lambda, n);
    rep.lhs = std::max(rep.lhs, n);
  }
  // I^t_s f = int_s^t P_{t-r} f dr over a lattice of s values
  for (int k = 0; k < 8; ++k) {
    double s = g.snap_time(T * k / 8.0);
    ChaosNodeRule full = chaos_nodes(g, T, n_nodes);
    ChaosNodeRule rule;
    rule.t = T;
    for (std::size_t m = 0; m < full.s.size(); ++m)
      if (full.s[m] >= s - 1e-12) {
        rule.s.push_back(full.s[m]);
        rule.weight.push_back(full.weight[m]);
      }
    if (rule.s.size() < 2) continue;
    // recompute trapezoid weights for the truncated node set
    for (std::size_t m = 0; m < rule.s.size(); ++m) {
      double lo = m == 0 ? rule.s.front() : rule.s[m - 1];
      double hi = m + 1 == rule.s.size() ? rule.s.back() : rule.s[m + 1];
      rule.weight[m] = (hi - lo) / 2;
    }
    double n =
        resonant(bb, inverse_transform(duhamel_grad_v_hat(fh, rule, 0.0)),
                 part)
            .sup();
    rep.rhs = std::max(rep.rhs, 2.0 * n);
  }
  rep.holds = rep.lhs <= rep.rhs * (1 + 1e-6) + 1e-12;
  return rep;
}

struct EnhancedDrift {
  double alpha = 0.62;
  double T = 0.25;
  std::uint64_t seed = 0;
  double epsilon = 1.0 / 16.0;
  SpectralMeasureSpec spec;
  RealField b;           // mollified drift sample
  SpectralField b_hat;
  std::vector<double> lambda_probes;  // probes; canonical product is lambda=0
  std::vector<RealField> products;    // b o grad_v I_lambda b at t = T
  double product_slope = 0;
  double a_quantity = 0;
  std::vector<double> eps_ladder;
  std::vector<CauchyRow> convergence;
};

inline EnhancedDrift build_enhanced_drift(const SpectralMeasureSpec& sp,
                                          const DyadicPartition& part,
                                          std::uint64_t seed, double eps,
                                          double alpha, double T,
                                          std::vector<double> lambda_probes =
                                              {0.0, 1.0, 10.0},
                                          int n_nodes = 64,
                                          bool with_ladder = true) {
  const GridSpec& g = part.grid();
  MeasureReport val = validate_measure(sp, g);
  if (!val.ok)
    throw std::invalid_argument("build_enhanced_drift: " + val.reason);
  EnhancedDrift ed;
  ed.alpha = alpha;
  ed.T = g.snap_time(T);
  ed.seed = seed;
  ed.epsilon = eps;
  ed.spec = sp;
  ed.lambda_probes = std::move(lambda_probes);

  NoiseSample ns = sample_noise(sp, g, seed);
  Mollifier moll;
  moll.epsilon = eps;
  ed.b_hat = mollify_hat(ns, moll);
  ed.b = inverse_transform(ed.b_hat);

  for (double lambda : ed.lambda_probes)
    ed.products.push_back(
        resonant_drift_product(ed.b_hat, part, ed.T, lambda, n_nodes));

  BesovIndex plain;
  ed.product_slope = besov_norm(ed.products.front(), plain, part).fitted_slope;

  BesovIndex prod_idx, drift_idx;
  prod_idx.s = 1 - 2 * alpha;
  drift_idx.s = -alpha;
  double prod_norm = 0;
  for (const RealField& p : ed.products)
    prod_norm = std::max(prod_norm, besov_norm(p, prod_idx, part).norm);
  double b_norm = besov_norm(ed.b, drift_idx, part).norm;
  ed.a_quantity = prod_norm + (b_norm + 1) * b_norm;

  if (with_ladder) {
    ed.eps_ladder = {eps * 2, eps, eps / 2};
    ed.convergence =
        cauchy_convergence(sp, part, 4, ed.eps_ladder, {ed.T}, alpha, 1,
                           part.j_max() - 1, n_nodes, seed + 1000);
  }
  return ed;
}

}  // namespace kinlab
