#pragma once

// Bony calculus on the dyadic partition: paraproducts, resonant product,
// the trilinear commutator com(f,g,h) and the block commutator [R_j, f]g.

#include "kinlab/besov.hpp"

namespace kinlab {

// f < g = sum_{k >= 1} S_{k-1} f . R_k g   (S_{k-1} = 0 for k <= 0)
inline RealField para_lt(const RealField& f, const RealField& g,
                         const DyadicPartition& part) {
  const GridSpec& gr = part.grid();
  SpectralField fh = forward_transform(f), gh = forward_transform(g);
  RealField out(gr);
  for (int k = 1; k <= part.j_max(); ++k) {
    RealField Sf = inverse_transform(part.low_freq_hat(fh, k - 1));
    RealField Rg = inverse_transform(part.block_hat(gh, k));
    out += multiply(Sf, Rg);
  }
  return out;
}

inline RealField para_gt(const RealField& f, const RealField& g,
                         const DyadicPartition& part) {
  return para_lt(g, f, part);
}

// f o g = sum_{|i-j|<=1} R_i f . R_j g
inline RealField resonant(const RealField& f, const RealField& g,
                          const DyadicPartition& part) {
  const GridSpec& gr = part.grid();
  std::vector<RealField> bf = part.all_blocks(f), bg = part.all_blocks(g);
  RealField out(gr);
  const int J = part.j_max();
  for (int i = -1; i <= J; ++i)
    for (int j = std::max(-1, i - 1); j <= std::min(J, i + 1); ++j)
      out += multiply(bf[i + 1], bg[j + 1]);
  return out;
}

// com(f,g,h) = (f < g) o h - f (g o h)
inline RealField trilinear_com(const RealField& f, const RealField& g,
                               const RealField& h,
                               const DyadicPartition& part) {
  RealField lhs = resonant(para_lt(f, g, part), h, part);
  RealField rhs = multiply(f, resonant(g, h, part));
  return lhs - rhs;
}

// [R_j, f] g = R_j(f g) - f . R_j g
inline RealField block_commutator(const RealField& f, const RealField& g,
                                  int j, const DyadicPartition& part) {
  return part.block(multiply(f, g), j) - multiply(f, part.block(g, j));
}

// fg - (f<g + fog + g<f); zero on the resolved band up to roundoff
inline RealField bony_residual(const RealField& f, const RealField& g,
                               const DyadicPartition& part) {
  RealField sum = para_lt(f, g, part);
  sum += resonant(f, g, part);
  sum += para_lt(g, f, part);
  return multiply(f, g) - sum;
}

}  // namespace kinlab
