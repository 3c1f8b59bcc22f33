#include "kinlab/noise.hpp"

#include <catch2/catch.hpp>

using namespace kinlab;

namespace {

GridSpec noise_grid() { return GridSpec(64, 128, 2 * pi / 100, 2 * pi); }

SpectralMeasureSpec product_spec() {
  SpectralMeasureSpec sp;
  sp.kind = MeasureKind::product;
  sp.gamma1 = 0.8;
  sp.gamma2 = 0.9;
  sp.beta = 0.6;
  return sp;
}

SpectralMeasureSpec v_white_spec(double gamma = 0.0) {
  SpectralMeasureSpec sp;
  sp.kind = MeasureKind::v_white_colored;
  sp.gamma1 = gamma;
  sp.beta = 0.6;
  return sp;
}

}  // namespace

TEST_CASE("measure validation") {
  GridSpec g = noise_grid();

  SECTION("product example: 3*0.8 + 0.9 > 4 - 1.2") {
    MeasureReport rep = validate_measure(product_spec(), g);
    CHECK(rep.ok);
    CHECK(rep.worst_shift_integral > 0);
  }
  SECTION("product with small gammas fails the constraint") {
    SpectralMeasureSpec sp = product_spec();
    sp.gamma1 = sp.gamma2 = 0.5;  // 2.0 < 2.8
    CHECK_FALSE(validate_measure(sp, g).ok);
  }
  SECTION("x_colored boundary gamma = d is rejected") {
    SpectralMeasureSpec sp;
    sp.kind = MeasureKind::x_colored;
    sp.gamma1 = 1.0;
    sp.beta = 0.6;
    CHECK_FALSE(validate_measure(sp, g).ok);
  }
  SECTION("x_colored with admissible gamma passes") {
    SpectralMeasureSpec sp;
    sp.kind = MeasureKind::x_colored;
    sp.gamma1 = 0.8;
    sp.beta = 0.6;
    CHECK(validate_measure(sp, g).ok);
  }
  SECTION("beta outside (1/2, 2/3) is rejected") {
    SpectralMeasureSpec sp = product_spec();
    sp.beta = 0.7;
    CHECK_FALSE(validate_measure(sp, g).ok);
  }
  SECTION("measure symmetry (S): evenness in each variable") {
    for (auto sp : {product_spec(), v_white_spec(0.3)}) {
      std::vector<double> w = measure_cell_mass(sp, g);
      for (int i = 0; i < g.n_x; ++i)
        for (int j = 0; j < g.n_v; ++j) {
          int im = (g.n_x - i) % g.n_x, jm = (g.n_v - j) % g.n_v;
          CHECK(w[g.idx(i, j)] == w[g.idx(im, j)]);
          CHECK(w[g.idx(i, j)] == w[g.idx(i, jm)]);
        }
    }
  }
}

TEST_CASE("noise sampling") {
  GridSpec g = noise_grid();
  SpectralMeasureSpec sp = product_spec();

  SECTION("deterministic for a fixed seed") {
    NoiseSample a = sample_noise(sp, g, 42), b = sample_noise(sp, g, 42);
    for (std::size_t k = 0; k < a.field.coeffs.size(); ++k)
      CHECK(a.field.coeffs[k] == b.field.coeffs[k]);
    NoiseSample c = sample_noise(sp, g, 43);
    CHECK(a.field.coeffs != c.field.coeffs);
  }

  SECTION("hermitian, hence real in physical space") {
    NoiseSample s = sample_noise(sp, g, 7);
    CHECK(s.field.hermitian_defect() < 1e-12);
    double im = 0;
    inverse_transform(s.field, &im);
    CHECK(im <= 1e-12 * s.field.max_abs());
  }

  SECTION("single-harmonic variance matches the quadrature") {
    RealField f(g);
    int j0 = 9;
    for (int i = 0; i < g.n_x; ++i)
      for (int j = 0; j < g.n_v; ++j)
        f.at(i, j) = std::cos(g.eta(j0) * (j * g.dv()));
    double expect = covariance_quadrature(sp, g, f, f);
    const int M = 2000;
    double s1 = 0, s2 = 0;
    for (int m = 0; m < M; ++m) {
      double v = test_functional(sample_noise(sp, g, 1000 + m).field, f);
      s1 += v * v;
      s2 += v * v * v * v;
    }
    double mean = s1 / M;
    double se = std::sqrt((s2 / M - mean * mean) / M);
    CHECK(std::abs(mean - expect) <= 3 * se);
  }

  SECTION("independent components decorrelate") {
    RealField f(g);
    for (int i = 0; i < g.n_x; ++i)
      for (int j = 0; j < g.n_v; ++j)
        f.at(i, j) = std::cos(g.eta(5) * (j * g.dv())) +
                     0.4 * std::sin(g.eta(11) * (j * g.dv()));
    const int M = 1500;
    double cross = 0, v1 = 0, v2 = 0;
    for (int m = 0; m < M; ++m) {
      double a = test_functional(sample_noise(sp, g, 50 + m, 0).field, f);
      double b = test_functional(sample_noise(sp, g, 50 + m, 1).field, f);
      cross += a * b;
      v1 += a * a;
      v2 += b * b;
    }
    double se = std::sqrt(v1 / M * (v2 / M) / M);
    CHECK(std::abs(cross / M) <= 3 * se);
  }

  SECTION("fitted block slope of a pure-eta measure sample") {
    // white-in-v noise has sharp regularity -1/2 on the eta scale; blocks
    // grow ~ 2^{j/2}, inside the beta + 0.25 window of the decay condition
    GridSpec gg(32, 256, 2 * pi / 100, 2 * pi);
    DyadicPartition part(gg);
    NoiseSample s = sample_noise(v_white_spec(0.0), gg, 11);
    RealField x = inverse_transform(s.field);
    BesovReport rep = besov_norm(x, BesovIndex{}, part);
    CHECK(rep.fitted_slope > 0.25);
    CHECK(rep.fitted_slope < v_white_spec(0.0).beta + 0.25);
  }
}

TEST_CASE("mollifier") {
  GridSpec g = noise_grid();
  SpectralMeasureSpec sp = product_spec();

  SECTION("transform normalisation and bounds") {
    CHECK(hann_hat(0.0) == 1.0);
    CHECK(hann_hat(pi) == Approx(0.5).margin(1e-6));
    for (double w = -40; w <= 40; w += 0.37) {
      CHECK(std::abs(hann_hat(w)) <= 1.0 + 1e-12);
    }
    Mollifier m;
    m.epsilon = 1.0 / 8.0;
    CHECK(m.hat(0, 0) == 1.0);
  }

  SECTION("identity mollifier is the identity") {
    Mollifier m;
    m.identity = true;
    NoiseSample s = sample_noise(sp, g, 3);
    SpectralField mh = mollify_hat(s, m);
    for (std::size_t k = 0; k < mh.coeffs.size(); ++k)
      CHECK(mh.coeffs[k] == s.field.coeffs[k]);
  }

  SECTION("v-even fields stay v-even") {
    NoiseSample s = sample_noise(sp, g, 5);
    SpectralField sym(g, true);
    for (int i = 0; i < g.n_x; ++i)
      for (int j = 0; j < g.n_v; ++j) {
        int jm = (g.n_v - j) % g.n_v;
        sym.at(i, j) = (s.field.at(i, j) + s.field.at(i, jm)) / 2.0;
      }
    s.field = sym;
    Mollifier m;
    m.epsilon = 1.0 / 8.0;
    RealField r = mollify(s, m);
    double worst = 0;
    for (int i = 0; i < g.n_x; ++i)
      for (int j = 0; j < g.n_v; ++j) {
        int jm = (g.n_v - j) % g.n_v;
        worst = std::max(worst, std::abs(r.at(i, j) - r.at(i, jm)));
      }
    CHECK(worst < 1e-11 * r.sup());
  }

  SECTION("mollification error decreases along the eps ladder") {
    NoiseSample s = sample_noise(sp, g, 9);
    RealField x = inverse_transform(s.field);
    double prev = 1e300;
    for (double eps : {1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0}) {
      Mollifier m;
      m.epsilon = eps;
      double err = (mollify(s, m) - x).sup();
      CHECK(err < prev);
      prev = err;
    }
  }
}

TEST_CASE("pair functionals") {
  GridSpec g = noise_grid();
  SpectralMeasureSpec sp = product_spec();
  Mollifier m1, m2;
  m1.epsilon = 1.0 / 8.0;
  m2.epsilon = 1.0 / 16.0;

  SECTION("zero symbol") {
    BiSymbol zero = [](double, double, double, double) { return cplx(0); };
    CHECK(std::abs(pair_expectation(sp, g, zero, m1, m2)) == 0.0);
    CHECK(pair_variance(sp, g, zero, m1, m2) == 0.0);
  }

  SECTION("unit symbol with identity mollifiers gives the total mass") {
    BiSymbol one = [](double, double, double, double) { return cplx(1); };
    Mollifier id;
    id.identity = true;
    std::vector<double> w = measure_cell_mass(sp, g);
    double total = 0;
    for (double x : w) total += x;
    CHECK(pair_expectation(sp, g, one, id, id).real() ==
          Approx(total).epsilon(1e-12));
  }

  SECTION("rank-one symbol: variance reduces to twice the square") {
    auto a = [](double xi, double eta) {
      return std::exp(-0.03 * (xi * xi / 1e4 + eta * eta));
    };
    BiSymbol H = [&](double x1, double e1, double x2, double e2) {
      return cplx(a(x1, e1) * a(x2, e2));
    };
    double radius = 12.0;
    double var = pair_variance(sp, g, H, m1, m1, radius);
    std::vector<double> w = measure_cell_mass(sp, g);
    double s = 0;
    for (int i = 0; i < g.n_x; ++i)
      for (int j = 0; j < g.n_v; ++j) {
        double mw = w[g.idx(i, j)];
        double xi = g.xi(i), eta = g.eta(j);
        if (mw == 0 || aniso_norm(xi, eta) > radius) continue;
        double h = a(xi, eta) * m1.hat(xi, eta);
        s += h * h * mw;
      }
    CHECK(var == Approx(2 * s * s).epsilon(1e-10));
  }

  SECTION("expectation and variance against the Monte Carlo oracle") {
    // rank-one observable S = X_phi(h1) X_phi'(h2)
    GridSpec gg(32, 64, 2 * pi / 100, 2 * pi);
    RealField h1(gg), h2(gg);
    for (int i = 0; i < gg.n_x; ++i)
      for (int j = 0; j < gg.n_v; ++j) {
        double vv = j * gg.dv();
        h1.at(i, j) = std::cos(2 * vv) + 0.3 * std::cos(5 * vv);
        h2.at(i, j) = std::sin(3 * vv);
      }
    SpectralField h1h = forward_transform(h1), h2h = forward_transform(h2);
    // rank-one kernel H(z,z') = h1(z) h2(z') has Hhat(z,z') = h1hat h2hat
    // in the per-factor transform convention, and
    // (X_phi (x) X_phi')(H) = X_phi(h1) X_phi'(h2)
    auto look = [&](const SpectralField& hh, double xi, double eta) {
      int ki = int(std::llround(xi / gg.dxi()));
      int kj = int(std::llround(eta / gg.deta()));
      int i = (ki % gg.n_x + gg.n_x) % gg.n_x;
      int j = (kj % gg.n_v + gg.n_v) % gg.n_v;
      return hh.at(i, j);
    };
    BiSymbol H = [&](double x1, double e1, double x2, double e2) {
      return look(h1h, x1, e1) * look(h2h, x2, e2);
    };
    SpectralMeasureSpec vsp = v_white_spec(0.3);
    double mean_q = pair_expectation(vsp, gg, H, m1, m2).real();
    double var_q = pair_variance(vsp, gg, H, m1, m2);
    const int M = 4000;
    double s1 = 0, s2 = 0;
    for (int m = 0; m < M; ++m) {
      NoiseSample s = sample_noise(vsp, gg, 900 + m);
      double a = test_functional(mollify_hat(s, m1), h1);
      double b = test_functional(mollify_hat(s, m2), h2);
      s1 += a * b;
      s2 += (a * b) * (a * b);
    }
    double mean_mc = s1 / M;
    double var_mc = s2 / M - mean_mc * mean_mc;
    double se = std::sqrt(var_mc / M);
    CHECK(std::abs(mean_mc - mean_q) <= 3 * se);
    CHECK(var_mc == Approx(var_q).epsilon(0.10));
  }
}
