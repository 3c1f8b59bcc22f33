#pragma once

// Anisotropic Littlewood-Paley machinery: the radial profile theta, the
// dyadic multipliers phi_j on the frequency grid, block and low-frequency
// cut operators.

#include "kinlab/core.hpp"

#include <memory>

namespace kinlab {

// Smooth cutoff: theta(r) = 1 for r <= 1/2, 0 for r >= 2/3, quintic
// smoothstep in log2(r) in between (C^2 is plenty for the multipliers).
inline double lp_profile(double r) {
  if (r <= 0.5) return 1.0;
  if (r >= 2.0 / 3.0) return 0.0;
  const double a = std::log2(0.5), b = std::log2(2.0 / 3.0);
  double u = (std::log2(r) - a) / (b - a);
  double s = u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
  return 1.0 - s;
}

// phi_{-1}(zeta) = theta(|zeta|_a), phi_j = theta(2^{-(j+1)}|.|) - theta(2^{-j}|.|)
inline double lp_phi(int j, double r_aniso) {
  if (j <= -2) return 0.0;
  if (j == -1) return lp_profile(r_aniso);
  return lp_profile(std::ldexp(r_aniso, -(j + 1))) -
         lp_profile(std::ldexp(r_aniso, -j));
}

class DyadicPartition {
 public:
  explicit DyadicPartition(const GridSpec& g) : grid_(&g) {
    // highest level whose annulus |zeta|_a <= 2^{j+2}/3 still fits in the
    // eta band; the xi direction is allowed to truncate (thin-box layouts
    // place x-modes sparsely on the |.|_a scale).
    double band = g.eta_max();
    j_max_ = 0;
    while (std::ldexp(1.0, j_max_ + 3) / 3.0 <= band) ++j_max_;
    levels_.resize(j_max_ + 2);
    for (int j = -1; j <= j_max_; ++j) {
      std::vector<double>& m = levels_[j + 1];
      m.resize(g.size());
      for (int i = 0; i < g.n_x; ++i)
        for (int jj = 0; jj < g.n_v; ++jj)
          m[g.idx(i, jj)] = lp_phi(j, aniso_norm(g.xi(i), g.eta(jj)));
    }
  }

  const GridSpec& grid() const { return *grid_; }
  int j_max() const { return j_max_; }

  // frequencies with |zeta|_a below this are exactly resolved by the partition
  double resolved_band() const { return std::ldexp(1.0, j_max_); }

  const std::vector<double>& multiplier(int j) const {
    if (j < -1 || j > j_max_) throw std::out_of_range("dyadic level");
    return levels_[j + 1];
  }

  SpectralField block_hat(const SpectralField& f, int j) const {
    const std::vector<double>& m = multiplier(j);
    SpectralField out(*grid_, f.hermitian);
    for (std::size_t k = 0; k < f.coeffs.size(); ++k)
      out.coeffs[k] = m[k] * f.coeffs[k];
    return out;
  }

  RealField block(const RealField& f, int j) const {
    return inverse_transform(block_hat(forward_transform(f), j));
  }

  // S_k f = sum_{j<=k-1} R_j f  =  theta(2^{-k}|zeta|_a) f_hat; S_k = 0 for k<=-1
  SpectralField low_freq_hat(const SpectralField& f, int k) const {
    SpectralField out(*grid_, f.hermitian);
    if (k <= -1) return out;
    const GridSpec& g = *grid_;
    for (int i = 0; i < g.n_x; ++i)
      for (int j = 0; j < g.n_v; ++j)
        out.at(i, j) = lp_profile(std::ldexp(aniso_norm(g.xi(i), g.eta(j)), -k)) *
                       f.at(i, j);
    return out;
  }

  RealField low_freq(const RealField& f, int k) const {
    return inverse_transform(low_freq_hat(forward_transform(f), k));
  }

  // all block images of f at once (levels -1..j_max), one forward FFT
  std::vector<RealField> all_blocks(const RealField& f) const {
    SpectralField fh = forward_transform(f);
    std::vector<RealField> out;
    out.reserve(j_max_ + 2);
    for (int j = -1; j <= j_max_; ++j)
      out.push_back(inverse_transform(block_hat(fh, j)));
    return out;
  }

  double partition_defect() const {
    // max | sum_j phi_j(zeta) - 1 | over the resolved band
    const GridSpec& g = *grid_;
    double worst = 0;
    for (int i = 0; i < g.n_x; ++i)
      for (int j = 0; j < g.n_v; ++j) {
        double r = aniso_norm(g.xi(i), g.eta(j));
        if (r > resolved_band()) continue;
        double s = 0;
        for (int l = -1; l <= j_max_; ++l) s += levels_[l + 1][g.idx(i, j)];
        worst = std::max(worst, std::abs(s - 1.0));
      }
    return worst;
  }

 private:
  const GridSpec* grid_;
  int j_max_;
  std::vector<std::vector<double>> levels_;
};

}  // namespace kinlab
