#include "kinlab/semigroup.hpp"

#include <catch2/catch.hpp>

using namespace kinlab;

namespace {

// thin-box anisotropic grid; shear quantum = 0.01
GridSpec lp_grid() { return GridSpec(64, 128, 2 * pi / 100, 2 * pi); }

// isotropic box for physical-kernel and smooth-field experiments
GridSpec box_grid(int nx = 256, int nv = 256) {
  return GridSpec(nx, nv, 16.0, 16.0);
}

// smooth bump well inside the box, centred at (x0,v0)
RealField bump(const GridSpec& g, double x0, double v0, double sx, double sv) {
  RealField f(g);
  for (int i = 0; i < g.n_x; ++i)
    for (int j = 0; j < g.n_v; ++j) {
      double dx = std::remainder(g.x_coord(i) - x0, g.L_x);
      double dv = g.v_coord(j) - v0;
      f.at(i, j) = std::exp(-dx * dx / (2 * sx * sx) - dv * dv / (2 * sv * sv));
    }
  return f;
}

}  // namespace

TEST_CASE("galilean shift basics") {
  GridSpec g = box_grid(64, 64);
  RealField f = bump(g, 1.0, -0.5, 1.0, 0.8);

  SECTION("t = 0 is the identity") {
    CHECK((galilean_shift(f, 0.0) - f).sup() == 0.0);
  }
  SECTION("x-independent fields are invariant") {
    RealField h(g);
    for (int i = 0; i < g.n_x; ++i)
      for (int j = 0; j < g.n_v; ++j)
        h.at(i, j) = std::sin(2 * pi * g.v_coord(j) / g.L_v);
    CHECK((galilean_shift(h, 0.37) - h).sup() < 1e-12);
  }
  SECTION("group law: shift then unshift") {
    RealField b = galilean_shift(galilean_shift(f, 0.37), -0.37);
    CHECK((b - f).sup() < 1e-10 * f.sup());
  }
  SECTION("lattice times use the exact lattice shear") {
    GridSpec tg = lp_grid();
    DyadicPartition part(tg);
    RealField r = random_resolved_field(tg, part, RandomStream(5, "gal"));
    RealField b = galilean_shift(galilean_shift(r, 0.05), -0.05);
    CHECK((b - r).sup() < 1e-13);
  }
}

TEST_CASE("heat multiplier formula") {
  // hat p_s = exp(-s eta^2 - s^3 xi^2 / 3 - s^2 xi eta)
  CHECK(heat_symbol(1.0, 0.0, 0.0) == 1.0);
  CHECK(heat_symbol(1.0, 0.0, 1.0) == Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(heat_symbol(1.0, 1.0, 0.0) ==
        Approx(std::exp(-1.0 / 3.0)).epsilon(1e-14));
  CHECK_THROWS(heat_kernel_hat(box_grid(64, 64), 0.0));

  GridSpec g = box_grid(64, 64);
  SpectralField m = heat_kernel_hat(g, 0.3);
  const double c0 = 0.06;
  for (int i = 0; i < g.n_x; ++i)
    for (int j = 0; j < g.n_v; ++j) {
      double val = m.at(i, j).real();
      CHECK(val > 0.0);
      CHECK(val <= 1.0);
      double s = 0.3, xi = g.xi(i), eta = g.eta(j);
      CHECK(val <=
            std::exp(-c0 * (s * s * s * xi * xi + s * eta * eta)) + 1e-15);
    }
}

TEST_CASE("kinetic kernel") {
  SECTION("mass, positivity and spectral consistency at t = 0.25") {
    // the kernel's narrowest principal axis is sqrt(t^3/6); n_x must
    // resolve it or the tilted symbol ridge aliases
    GridSpec g(1024, 128, 16.0, 16.0);
    RealField p = kinetic_kernel(g, 0.25);
    CHECK(p.integral() == Approx(1.0).margin(1e-8));
    for (double v : p.values) CHECK(v >= 0.0);

    // (2 pi)^{N/2} * forward(p_t) should equal the multiplier array
    SpectralField ph = forward_transform(p);
    double worst = 0;
    for (int i = 0; i < g.n_x; ++i)
      for (int j = 0; j < g.n_v; ++j)
        worst = std::max(worst,
                         std::abs(2 * pi * ph.at(i, j) -
                                  cplx(heat_symbol(0.25, g.xi(i), g.eta(j)))));
    CHECK(worst < 1e-8);
  }

  SECTION("closed form at the origin for t = 1") {
    GridSpec g = box_grid(128, 128);
    RealField p = kinetic_kernel(g, 1.0);
    CHECK(p.at(0, 0) == Approx(std::sqrt(3.0) / (2.0 * pi)).epsilon(1e-12));
  }

  SECTION("anisotropic self-similarity p_t(z) = t^{-2} p_1(t^{-3/2}x, t^{-1/2}v)") {
    auto p_formula = [](double t, double x, double v) {
      return std::sqrt(3.0) / (2.0 * pi * t * t) *
             std::exp(-(3 * x * x + (3 * x - 2 * t * v) * (3 * x - 2 * t * v)) /
                      (4 * t * t * t));
    };
    RandomStream rng(3, "scaling");
    for (int k = 0; k < 100; ++k) {
      double t = 0.3 + rng.uniform(3 * k);
      double x = rng.normal(3 * k + 1) * 0.3, v = rng.normal(3 * k + 2);
      double lhs = p_formula(t, x, v);
      double rhs =
          p_formula(1.0, x / std::pow(t, 1.5), v / std::sqrt(t)) / (t * t);
      CHECK(lhs == Approx(rhs).epsilon(1e-6));
    }
  }

  SECTION("box too small raises") {
    GridSpec g(32, 32, 0.5, 0.5);
    CHECK_THROWS(kinetic_kernel(g, 1.0));
  }
}

TEST_CASE("semigroup properties") {
  GridSpec g = box_grid();
  RealField f = bump(g, 0.0, 0.7, 1.1, 0.9);

  SECTION("t = 0 identity and constant invariance") {
    CHECK((apply_semigroup(f, 0.0) - f).sup() == 0.0);
    RealField c(g);
    for (double& v : c.values) v = 1.4;
    CHECK((apply_semigroup(c, 0.35) - c).sup() < 1e-11);
  }

  SECTION("mass invariance") {
    double m0 = f.integral();
    for (double t : {0.05, 0.1, 0.2})
      CHECK(apply_semigroup(f, t).integral() == Approx(m0).margin(1e-10));
  }

  SECTION("semigroup law on the shear lattice") {
    GridSpec tg = lp_grid();
    DyadicPartition part(tg);
    RealField r = random_resolved_field(tg, part, RandomStream(8, "law"));
    for (double t : {0.05, 0.1, 0.2})
      for (double s : {0.05, 0.1, 0.2}) {
        RealField a = apply_semigroup(apply_semigroup(r, s), t);
        RealField b = apply_semigroup(r, t + s);
        CHECK((a - b).sup() < 1e-8);
      }
  }

  SECTION("positivity up to spectral ringing") {
    for (double t : {0.05, 0.1, 0.2}) {
      RealField u = apply_semigroup(f, t);
      double mn = 0;
      for (double v : u.values) mn = std::min(mn, v);
      CHECK(mn >= -1e-10 * f.sup());
    }
  }

  SECTION("generator residual is O(dt): halving dt halves it") {
    auto residual = [&](double dt) {
      RealField Pf = apply_semigroup(f, dt);
      RealField gen = derivative(f, Derivative::laplace_v);
      RealField gx = derivative(f, Derivative::grad_x);
      for (int i = 0; i < g.n_x; ++i)
        for (int j = 0; j < g.n_v; ++j)
          gen.at(i, j) += g.v_coord(j) * gx.at(i, j);
      double worst = 0;
      for (std::size_t k = 0; k < g.size(); ++k)
        worst = std::max(worst, std::abs((Pf.values[k] - f.values[k]) / dt -
                                         gen.values[k]));
      return worst;
    };
    double r1 = residual(0.02), r2 = residual(0.01);
    CHECK(r1 / r2 == Approx(2.0).epsilon(0.2));
  }
}

TEST_CASE("duhamel integral") {
  GridSpec g = box_grid(128, 128);
  RealField f = bump(g, 0.0, 0.0, 1.2, 1.0);

  SECTION("zero source") {
    SemigroupParams par;
    RealField z(g);
    CHECK(duhamel(PathField::constant(z, 0, 1), par, 0.7).sup() == 0.0);
  }

  SECTION("constant source, lambda = 0, gives t * c") {
    RealField c(g);
    for (double& v : c.values) v = 0.8;
    SemigroupParams par;
    par.t_substeps = 8;
    RealField I = duhamel(PathField::constant(c, 0, 1), par, 0.6);
    CHECK((I - 0.6 * c).sup() < 1e-10);
  }

  SECTION("large lambda behaves like the scalar ODE") {
    // du/dt = -lambda u + c  =>  u(t) = c(1-e^{-lambda t})/lambda
    for (double lambda : {10.0, 100.0}) {
      SemigroupParams par;
      par.lambda = lambda;
      par.t_substeps = 512;
      RealField I = duhamel(PathField::constant(f, 0, 1), par, 1.0);
      double expect = (1.0 - std::exp(-lambda)) / lambda;
      CHECK(I.sup() == Approx(expect * f.sup()).epsilon(0.15));
    }
  }

  SECTION("second-order self convergence") {
    SemigroupParams c1, c2, c3;
    c1.t_substeps = 8;
    c2.t_substeps = 16;
    c3.t_substeps = 32;
    PathField src = PathField::constant(f, 0, 0.4);
    // a time-varying source exercises the quadrature
    src.fields[1] *= 0.25;
    double t = 0.4;
    RealField a = duhamel(src, c1, t), b = duhamel(src, c2, t),
              c = duhamel(src, c3, t);
    double e1 = (a - c).sup(), e2 = (b - c).sup();
    CHECK(e1 / e2 > 3.0);  // ~4 for second order
  }

  SECTION("t outside the stored range throws") {
    SemigroupParams par;
    CHECK_THROWS(duhamel(PathField::constant(f, 0, 1), par, 1.5));
  }
}

TEST_CASE("theta interaction sets") {
  SECTION("t = 0 reduces to a +-4 band") {
    for (int j : {0, 3, 7}) {
      std::set<int> th = theta_set(j, 0.0, 32);
      for (int l = -1; l <= 32; ++l) {
        bool in = th.count(l) > 0;
        CHECK(in == (std::abs(l - j) <= 4));
      }
    }
  }
  SECTION("direct arithmetic at j=5, t=1") {
    std::set<int> th = theta_set(5, 1.0, 64);
    for (int l = -1; l <= 64; ++l) {
      double tl = std::ldexp(1.0, l), el = std::ldexp(1.0, 3 * l);
      bool expect = (tl <= 16 * (32 + 32768.0)) && (32 <= 16 * (tl + el));
      CHECK((th.count(l) > 0) == expect);
    }
  }
  SECTION("support identity: R_j Gamma_t R_l = 0 outside theta") {
    GridSpec g = lp_grid();
    DyadicPartition part(g);
    RealField f = random_resolved_field(g, part, RandomStream(7, "em3"));
    for (double t : {0.0, 0.01, 0.05}) {
      for (int j = 0; j <= part.j_max(); ++j) {
        std::set<int> th = theta_set(j, t, part.j_max());
        for (int l = -1; l <= part.j_max(); ++l) {
          if (th.count(l)) continue;
          RealField r = part.block(galilean_shift(part.block(f, l), t), j);
          CHECK(r.sup() <= 1e-12 * f.sup());
        }
      }
    }
  }
}

TEST_CASE("schauder regularity gain") {
  GridSpec g = lp_grid();
  DyadicPartition part(g);

  SECTION("zero probe reports degenerate") {
    CHECK(schauder_gain(RealField(g), part, 0.25).degenerate);
  }

  SECTION("band probe gains about two orders") {
    RealField f = synthesize_slope_field(g, part, -0.6, 1, part.j_max(),
                                         RandomStream(11, "sch"), 0);
    SchauderReport rep = schauder_gain(f, part, 0.25);
    // unit-scale smoke check; the calibrated interval is acceptance work
    CHECK(rep.gain > 1.4);
    CHECK(rep.gain < 2.6);
  }

  SECTION("single-level decay respects the heat time scale") {
    // || R_j I_0 f || ~ min(t, 4^{-j}) || R_j f ||
    RealField f = synthesize_slope_field(g, part, -0.6, 1, part.j_max(),
                                         RandomStream(12, "lev"), 0);
    SchauderReport rep = schauder_gain(f, part, 0.25);
    for (auto [j, ratio] : rep.level_ratios) {
      if (j < 1 || ratio == 0) continue;
      double envelope = std::min(0.25, std::ldexp(1.0, -2 * j));
      CHECK(ratio <= 8.0 * envelope);
      CHECK(ratio >= envelope / 8.0);
    }
  }
}

TEST_CASE("semigroup commutator") {
  GridSpec g = lp_grid();
  DyadicPartition part(g);

  SECTION("zero g") {
    RealField f = random_resolved_field(g, part, RandomStream(1, "scf"));
    CHECK(semigroup_commutator(f, RealField(g), 0.05, 2, part).sup() == 0.0);
  }

  SECTION("constant f on a high band g") {
    RealField c(g);
    for (double& v : c.values) v = 1.7;
    RealField h = synthesize_slope_field(g, part, -0.4, 2, part.j_max() - 1,
                                         RandomStream(2, "scg"));
    for (int j = 2; j <= 4; ++j)
      CHECK(semigroup_commutator(c, h, 0.05, j, part).sup() <
            1e-8 * std::max(1.0, h.sup()));
  }

  SECTION("commutator decays faster than the plain paraproduct") {
    RealField f = synthesize_slope_field(g, part, -0.6, 0, part.j_max(),
                                         RandomStream(3, "cpf"), 1);
    RealField h = synthesize_slope_field(g, part, -0.4, 0, part.j_max(),
                                         RandomStream(4, "cpg"), 1);
    double t = 0.05;
    std::vector<std::pair<int, double>> com_lv, ref_lv;
    RealField fg = para_lt(f, h, part);
    for (int j = 2; j <= part.j_max(); ++j) {
      com_lv.emplace_back(j, semigroup_commutator(f, h, t, j, part).sup());
      ref_lv.emplace_back(j, part.block(fg, j).sup());
    }
    double s_com = fit_slope(com_lv, 2, part.j_max() - 1);
    double s_ref = fit_slope(ref_lv, 2, part.j_max() - 1);
    CHECK(s_com <= s_ref - 0.5);
  }
}

TEST_CASE("kinetic Holder seminorm") {
  GridSpec g = box_grid(128, 128);
  RealField f = bump(g, 0.5, -0.3, 1.0, 0.8);

  SECTION("constant-in-time x-independent path") {
    RealField h(g);
    for (int i = 0; i < g.n_x; ++i)
      for (int j = 0; j < g.n_v; ++j)
        h.at(i, j) = std::cos(2 * pi * g.v_coord(j) / g.L_v);
    PathField p;
    p.times = {0.0, 0.1, 0.2};
    p.fields = {h, h, h};
    CHECK(kinetic_holder_seminorm(p, 0.5) == Approx(h.sup()).margin(1e-9));
  }

  SECTION("pure transport path has no increment part") {
    PathField p;
    p.times = {0.0, 0.07, 0.19};
    p.fields = {f, galilean_shift(f, 0.07), galilean_shift(f, 0.19)};
    CHECK(kinetic_holder_seminorm(p, 0.5) ==
          Approx(f.sup()).margin(1e-10 * f.sup()));
  }

  SECTION("linear-in-time path is finite and scales") {
    PathField p;
    p.times = {0.0, 0.5, 1.0};
    p.fields = {RealField(g), 0.5 * f, f};
    double b = 0.4;
    double got = kinetic_holder_seminorm(p, b);
    CHECK(std::isfinite(got));
    CHECK(got > f.sup());
  }

  SECTION("needs two times") {
    PathField p;
    p.times = {0.0};
    p.fields = {f};
    CHECK_THROWS(kinetic_holder_seminorm(p, 0.5));
  }
}
