#pragma once

// Phase-space torus grid, real/spectral fields and the FFT bridge between
// them.  Everything downstream (dyadic blocks, semigroup, solvers) is built
// on the operations in this header.
//
// Conventions:
//   * the torus is [0,Lx) x [0,Lv); index (i,j) <-> point (i*dx, j*dv),
//     signed coordinates wrap: coord(i) = i<n/2 ? i*d : (i-n)*d.
//   * frequencies xi_k = 2*pi*k/Lx with k in {-nx/2,...,nx/2-1}, stored in
//     FFT wrap-around order, same for eta.
//   * forward transform approximates (2pi)^{-1} \int e^{-i zeta.z} f(z) dz,
//     so  fhat = FFT(f) * dx*dv/(2pi)  and  f = IFFT(fhat) * dxi*deta/(2pi).
//     With these factors round-trip and Parseval are exact.

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace kinlab {

using cplx = std::complex<double>;

inline constexpr double pi = 3.14159265358979323846;

// |z|_a with a=(3,1): |x|^{1/3} + |v|.  Same formula for frequencies.
inline double aniso_norm(double x, double v) {
  return std::cbrt(std::abs(x)) + std::abs(v);
}

struct GridSpec {
  int n_x = 0, n_v = 0;
  double L_x = 2 * pi, L_v = 2 * pi;
  bool dealias = false;

  GridSpec() = default;
  GridSpec(int nx, int nv, double lx, double lv, bool deal = false)
      : n_x(nx), n_v(nv), L_x(lx), L_v(lv), dealias(deal) {
    if (nx < 16 || nv < 16 || nx % 2 || nv % 2)
      throw std::invalid_argument("grid sizes must be even and >= 16");
    if (lx <= 0 || lv <= 0) throw std::invalid_argument("box sides must be positive");
  }

  std::size_t size() const { return std::size_t(n_x) * n_v; }
  double dx() const { return L_x / n_x; }
  double dv() const { return L_v / n_v; }
  double dxi() const { return 2 * pi / L_x; }
  double deta() const { return 2 * pi / L_v; }
  double cell() const { return dx() * dv(); }
  double cell_freq() const { return dxi() * deta(); }

  // signed coordinate of index i on an n-point circle of period L
  static double signed_coord(int i, int n, double L) {
    return (i < n / 2 ? i : i - n) * (L / n);
  }
  double x_coord(int i) const { return signed_coord(i, n_x, L_x); }
  double v_coord(int j) const { return signed_coord(j, n_v, L_v); }

  int kx(int i) const { return i < n_x / 2 ? i : i - n_x; }
  int kv(int j) const { return j < n_v / 2 ? j : j - n_v; }
  double xi(int i) const { return kx(i) * dxi(); }
  double eta(int j) const { return kv(j) * deta(); }

  double xi_max() const { return dxi() * (n_x / 2 - 1); }
  double eta_max() const { return deta() * (n_v / 2 - 1); }

  // Galilean shear moves mode (xi,eta) to (xi,eta+t*xi); it lands on the
  // frequency lattice iff t is a multiple of this quantum.
  double shear_quantum() const { return L_x / L_v; }
  double snap_time(double t) const {
    double q = shear_quantum();
    return std::round(t / q) * q;
  }

  bool same_as(const GridSpec& o) const {
    return n_x == o.n_x && n_v == o.n_v && L_x == o.L_x && L_v == o.L_v;
  }

  std::size_t idx(int i, int j) const { return std::size_t(i) * n_v + j; }
};

struct RealField {
  const GridSpec* grid = nullptr;
  std::vector<double> values;

  RealField() = default;
  explicit RealField(const GridSpec& g) : grid(&g), values(g.size(), 0.0) {}

  double& at(int i, int j) { return values[grid->idx(i, j)]; }
  double at(int i, int j) const { return values[grid->idx(i, j)]; }

  double sup() const {
    double m = 0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }
  double integral() const {
    double s = 0;
    for (double v : values) s += v;
    return s * grid->cell();
  }
  double l1() const {
    double s = 0;
    for (double v : values) s += std::abs(v);
    return s * grid->cell();
  }
  double lp(double p) const {
    if (std::isinf(p)) return sup();
    double s = 0;
    for (double v : values) s += std::pow(std::abs(v), p);
    return std::pow(s * grid->cell(), 1.0 / p);
  }

  RealField& operator+=(const RealField& o) {
    for (std::size_t k = 0; k < values.size(); ++k) values[k] += o.values[k];
    return *this;
  }
  RealField& operator-=(const RealField& o) {
    for (std::size_t k = 0; k < values.size(); ++k) values[k] -= o.values[k];
    return *this;
  }
  RealField& operator*=(double c) {
    for (double& v : values) v *= c;
    return *this;
  }
};

inline RealField operator+(RealField a, const RealField& b) { return a += b; }
inline RealField operator-(RealField a, const RealField& b) { return a -= b; }
inline RealField operator*(double c, RealField a) { return a *= c; }

struct SpectralField {
  const GridSpec* grid = nullptr;
  std::vector<cplx> coeffs;
  bool hermitian = false;

  SpectralField() = default;
  explicit SpectralField(const GridSpec& g, bool herm = false)
      : grid(&g), coeffs(g.size(), cplx(0)), hermitian(herm) {}

  cplx& at(int i, int j) { return coeffs[grid->idx(i, j)]; }
  cplx at(int i, int j) const { return coeffs[grid->idx(i, j)]; }

  double max_abs() const {
    double m = 0;
    for (const cplx& c : coeffs) m = std::max(m, std::abs(c));
    return m;
  }

  // max relative deviation from coeffs(-zeta) = conj(coeffs(zeta))
  double hermitian_defect() const {
    const GridSpec& g = *grid;
    double worst = 0, scale = std::max(max_abs(), 1e-300);
    for (int i = 0; i < g.n_x; ++i)
      for (int j = 0; j < g.n_v; ++j) {
        int im = (g.n_x - i) % g.n_x, jm = (g.n_v - j) % g.n_v;
        worst = std::max(worst,
                         std::abs(at(i, j) - std::conj(at(im, jm))) / scale);
      }
    return worst;
  }

  SpectralField& operator+=(const SpectralField& o) {
    for (std::size_t k = 0; k < coeffs.size(); ++k) coeffs[k] += o.coeffs[k];
    return *this;
  }
  SpectralField& operator*=(cplx c) {
    for (cplx& v : coeffs) v *= c;
    return *this;
  }
};

namespace detail {

// Cached FFTW plans per grid geometry.  Planning is not thread safe; the
// new-array execute calls are.
class FftEngine {
 public:
  static FftEngine& instance() {
    static FftEngine e;
    return e;
  }

  void forward(const GridSpec& g, const cplx* in, cplx* out) {
    run(g, in, out, FFTW_FORWARD);
  }
  void backward(const GridSpec& g, const cplx* in, cplx* out) {
    run(g, in, out, FFTW_BACKWARD);
  }

  // in-place 1-D transforms on a caller-owned buffer of length n
  void forward_1d(int n, cplx* data) { run_1d(n, data, FFTW_FORWARD); }
  void backward_1d(int n, cplx* data) { run_1d(n, data, FFTW_BACKWARD); }

 private:
  struct Plans {
    fftw_plan fwd = nullptr, bwd = nullptr;
  };
  std::map<std::pair<int, int>, Plans> plans_;
  std::map<int, Plans> plans_1d_;
  std::mutex mtx_;

  Plans& get_1d(int n) {
    std::lock_guard<std::mutex> lk(mtx_);
    auto it = plans_1d_.find(n);
    if (it != plans_1d_.end()) return it->second;
    std::vector<cplx> buf(n);
    auto* p = reinterpret_cast<fftw_complex*>(buf.data());
    Plans pl;
    pl.fwd = fftw_plan_dft_1d(n, p, p, FFTW_FORWARD, FFTW_ESTIMATE);
    pl.bwd = fftw_plan_dft_1d(n, p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
    return plans_1d_.emplace(n, pl).first->second;
  }

  void run_1d(int n, cplx* data, int sign) {
    Plans& pl = get_1d(n);
    auto* p = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(sign == FFTW_FORWARD ? pl.fwd : pl.bwd, p, p);
  }

  Plans& get(const GridSpec& g) {
    std::lock_guard<std::mutex> lk(mtx_);
    auto key = std::make_pair(g.n_x, g.n_v);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    std::vector<cplx> buf(g.size());
    auto* p = reinterpret_cast<fftw_complex*>(buf.data());
    Plans pl;
    pl.fwd = fftw_plan_dft_2d(g.n_x, g.n_v, p, p, FFTW_FORWARD, FFTW_ESTIMATE);
    pl.bwd = fftw_plan_dft_2d(g.n_x, g.n_v, p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
    return plans_.emplace(key, pl).first->second;
  }

  void run(const GridSpec& g, const cplx* in, cplx* out, int sign) {
    Plans& pl = get(g);
    std::vector<cplx> tmp(in, in + g.size());
    auto* t = reinterpret_cast<fftw_complex*>(tmp.data());
    fftw_execute_dft(sign == FFTW_FORWARD ? pl.fwd : pl.bwd, t, t);
    std::copy(tmp.begin(), tmp.end(), out);
  }
};

}  // namespace detail

inline SpectralField forward_transform(const RealField& f) {
  const GridSpec& g = *f.grid;
  std::vector<cplx> buf(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) buf[k] = f.values[k];
  SpectralField out(g, true);
  detail::FftEngine::instance().forward(g, buf.data(), out.coeffs.data());
  const double scale = g.cell() / (2 * pi);
  for (cplx& c : out.coeffs) c *= scale;
  return out;
}

inline SpectralField forward_transform(const SpectralField& f_phys) {
  // forward transform of an already-complex physical-space array
  const GridSpec& g = *f_phys.grid;
  SpectralField out(g);
  detail::FftEngine::instance().forward(g, f_phys.coeffs.data(),
                                        out.coeffs.data());
  const double scale = g.cell() / (2 * pi);
  for (cplx& c : out.coeffs) c *= scale;
  return out;
}

// inverse transform to a complex physical array (no realness assumption)
inline SpectralField inverse_transform_complex(const SpectralField& f) {
  const GridSpec& g = *f.grid;
  SpectralField out(g);
  detail::FftEngine::instance().backward(g, f.coeffs.data(), out.coeffs.data());
  const double scale = g.cell_freq() / (2 * pi);
  for (cplx& c : out.coeffs) c *= scale;
  return out;
}

// inverse transform; imaginary residue is reported through *imag_sup if asked
inline RealField inverse_transform(const SpectralField& f,
                                   double* imag_sup = nullptr) {
  SpectralField phys = inverse_transform_complex(f);
  const GridSpec& g = *f.grid;
  RealField out(g);
  double im = 0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    out.values[k] = phys.coeffs[k].real();
    im = std::max(im, std::abs(phys.coeffs[k].imag()));
  }
  if (imag_sup) *imag_sup = im;
  return out;
}

enum class Derivative { grad_v, grad_x, laplace_v };

inline SpectralField derivative_multiplier(const SpectralField& f,
                                           Derivative which) {
  const GridSpec& g = *f.grid;
  SpectralField out(g, f.hermitian);
  for (int i = 0; i < g.n_x; ++i) {
    const double xi = g.xi(i);
    for (int j = 0; j < g.n_v; ++j) {
      const double eta = g.eta(j);
      cplx m;
      switch (which) {
        case Derivative::grad_v: m = cplx(0, eta); break;
        case Derivative::grad_x: m = cplx(0, xi); break;
        case Derivative::laplace_v: m = cplx(-eta * eta, 0); break;
      }
      out.at(i, j) = m * f.at(i, j);
    }
  }
  return out;
}

inline RealField derivative(const RealField& f, Derivative which) {
  return inverse_transform(derivative_multiplier(forward_transform(f), which));
}

// 2/3-rule truncation: zero modes with |k| > n/3 in either direction.
inline void dealias_truncate(SpectralField& f) {
  const GridSpec& g = *f.grid;
  for (int i = 0; i < g.n_x; ++i)
    for (int j = 0; j < g.n_v; ++j)
      if (std::abs(g.kx(i)) > g.n_x / 3 || std::abs(g.kv(j)) > g.n_v / 3)
        f.at(i, j) = 0;
}

// Pointwise product honouring the grid's dealias flag.
inline RealField multiply(const RealField& f, const RealField& g) {
  const GridSpec& gr = *f.grid;
  if (!gr.dealias) {
    RealField out(gr);
    for (std::size_t k = 0; k < gr.size(); ++k)
      out.values[k] = f.values[k] * g.values[k];
    return out;
  }
  SpectralField fh = forward_transform(f), gh = forward_transform(g);
  dealias_truncate(fh);
  dealias_truncate(gh);
  RealField fp = inverse_transform(fh), gp = inverse_transform(gh);
  RealField out(gr);
  for (std::size_t k = 0; k < gr.size(); ++k)
    out.values[k] = fp.values[k] * gp.values[k];
  SpectralField oh = forward_transform(out);
  dealias_truncate(oh);
  return inverse_transform(oh);
}

inline double parseval_physical(const RealField& f) {
  double s = 0;
  for (double v : f.values) s += v * v;
  return s * f.grid->cell();
}

inline double parseval_spectral(const SpectralField& f) {
  double s = 0;
  for (const cplx& c : f.coeffs) s += std::norm(c);
  return s * f.grid->cell_freq();
}

}  // namespace kinlab
