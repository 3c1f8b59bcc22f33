#include "kinlab/particles.hpp"

#include <catch2/catch.hpp>

using namespace kinlab;

namespace {

GridSpec box_grid(int n = 64) { return GridSpec(n, n, 16.0, 16.0); }

RealField bump_density(const GridSpec& g, double x0 = 0, double v0 = 0,
                       double sx = 1.2, double sv = 0.8) {
  RealField f(g);
  for (int i = 0; i < g.n_x; ++i)
    for (int j = 0; j < g.n_v; ++j) {
      double dx = std::remainder(g.x_coord(i) - x0, g.L_x);
      double dv = g.v_coord(j) - v0;
      f.at(i, j) = std::exp(-dx * dx / (2 * sx * sx) - dv * dv / (2 * sv * sv));
    }
  f *= 1.0 / f.integral();
  return f;
}

}  // namespace

TEST_CASE("ensemble sampling") {
  GridSpec g = box_grid();
  RealField phi = bump_density(g);

  SECTION("empty ensembles are rejected") {
    CHECK_THROWS(sample_ensemble(phi, 0, 1));
  }
  SECTION("deterministic and seed dependent") {
    ParticleEnsemble a = sample_ensemble(phi, 100, 5);
    ParticleEnsemble b = sample_ensemble(phi, 100, 5);
    ParticleEnsemble c = sample_ensemble(phi, 100, 6);
    CHECK(a.X == b.X);
    CHECK(a.V == b.V);
    CHECK(a.X != c.X);
  }
  SECTION("positions live on the circle") {
    ParticleEnsemble e = sample_ensemble(phi, 2000, 9);
    for (double x : e.X) {
      CHECK(x >= 0.0);
      CHECK(x < g.L_x);
    }
  }
}

TEST_CASE("free diffusion matches Brownian moments") {
  GridSpec g = box_grid();
  RealField phi = bump_density(g);
  SdeConfig c;
  c.grid = &g;
  c.h = 1e-3;
  c.T = 0.2;
  c.seed = 31;
  ParticleEnsemble e = sample_ensemble(phi, 10000, 17);
  std::vector<double> v0 = e.V;
  TrajectoryRecord rec = run_sde(e, c, {0.0, 0.1, 0.2});
  REQUIRE(rec.times.size() == 3);

  SECTION("variance of the increment is 2t within 3 SE") {
    for (std::size_t snap = 1; snap < rec.times.size(); ++snap) {
      double t = rec.times[snap];
      double m = 0, m2 = 0;
      int N = int(v0.size());
      for (int i = 0; i < N; ++i) {
        double d = rec.V[snap][i] - v0[i];
        m += d * d;
        m2 += d * d * d * d;
      }
      m /= N;
      m2 /= N;
      double se = std::sqrt((m2 - m * m) / N);
      CHECK(std::abs(m - 2 * t) <= 3 * se);
    }
  }

  SECTION("p = 2 and p = 4 moment ratios") {
    MomentReport r2 = moment_check(rec, 2);
    CHECK(std::abs(r2.max_ratio - 2.0) <= 3 * r2.se_at_max);
    MomentReport r4 = moment_check(rec, 4);
    CHECK(std::abs(r4.max_ratio - 12.0) <= 3 * r4.se_at_max);
    CHECK_THROWS(moment_check(rec, 3));
  }

  SECTION("no excursions in a valid run") {
    for (long x : rec.excursions) CHECK(x == 0);
  }
}

TEST_CASE("two-body constant kernel force") {
  GridSpec g = box_grid();
  std::vector<double> K(g.n_x, 1.3);
  std::vector<double> X = {2.0, 9.5};
  std::vector<double> F = mean_field_force(X, K, g);
  // (1/N) sum_{j != i} c = c (N-1)/N = c/2 for N = 2
  CHECK(F[0] == Approx(1.3 / 2).margin(1e-12));
  CHECK(F[1] == Approx(1.3 / 2).margin(1e-12));
}

TEST_CASE("pairwise and mode-sum forces agree") {
  GridSpec g = box_grid();
  std::vector<double> K(g.n_x);
  for (int i = 0; i < g.n_x; ++i)
    K[i] = 0.7 * std::sin(2 * pi * i / g.n_x) +
           0.2 * std::cos(4 * pi * i / g.n_x);
  RealField phi = bump_density(g);
  ParticleEnsemble e = sample_ensemble(phi, 500, 3);
  std::vector<double> fast = mean_field_force(e.X, K, g);
  std::vector<double> slow = mean_field_force_pairwise(e.X, K, g);
  double worst = 0;
  for (int i = 0; i < 500; ++i)
    worst = std::max(worst, std::abs(fast[i] - slow[i]));
  CHECK(worst <= 1e-8);
}

TEST_CASE("stepping is deterministic") {
  GridSpec g = box_grid();
  RealField phi = bump_density(g);
  RealField W(g);
  for (int i = 0; i < g.n_x; ++i)
    for (int j = 0; j < g.n_v; ++j)
      W.at(i, j) = 0.4 * std::cos(2 * pi * i / g.n_x);
  SdeConfig c;
  c.grid = &g;
  c.W_field = &W;
  c.h = 1e-3;
  c.T = 0.05;
  c.seed = 77;
  c.K.assign(g.n_x, 0.1);
  ParticleEnsemble e = sample_ensemble(phi, 200, 8);
  TrajectoryRecord a = run_sde(e, c, {0.05});
  TrajectoryRecord b = run_sde(e, c, {0.05});
  CHECK(a.V[0] == b.V[0]);
}

TEST_CASE("empirical density") {
  GridSpec g = box_grid();
  SdeConfig c;
  c.grid = &g;

  SECTION("single particle gives a unit-mass bump at its location") {
    ParticleEnsemble e;
    e.X = {g.dx() * 10};
    e.V = {g.v_coord(20)};
    RealField d = empirical_density(e, c);
    CHECK(d.integral() == Approx(1.0).margin(1e-12));
    double best = -1;
    int bi = -1, bj = -1;
    for (int i = 0; i < g.n_x; ++i)
      for (int j = 0; j < g.n_v; ++j)
        if (d.at(i, j) > best) {
          best = d.at(i, j);
          bi = i;
          bj = j;
        }
    CHECK(bi == 10);
    CHECK(bj == 20);
  }

  SECTION("mass is one for any ensemble") {
    RealField phi = bump_density(g);
    for (int n : {37, 512}) {
      ParticleEnsemble e = sample_ensemble(phi, n, 11);
      CHECK(empirical_density(e, c).integral() == Approx(1.0).margin(1e-8));
    }
  }

  SECTION("density estimate improves with N") {
    RealField phi = bump_density(g);
    double prev = 1e300;
    for (int n : {1000, 10000}) {
      ParticleEnsemble e = sample_ensemble(phi, n, 13);
      double err = (empirical_density(e, c) - phi).l1();
      CHECK(err < prev);
      prev = err;
    }
  }
}

TEST_CASE("mean-field comparison on the free flow") {
  GridSpec g = box_grid();
  RealField phi = bump_density(g);
  NonlinearProblem p;
  p.phi = phi;
  p.T = 0.2;
  p.dt = 2e-3;
  p.save_every = 50;
  SolveReport pde = solve_mean_field(p);

  SdeConfig c;
  c.grid = &g;
  c.h = 1e-3;
  c.T = 0.2;
  c.seed = 5;

  SECTION("zero ensemble is rejected") {
    CHECK_THROWS(compare_mean_field(c, phi, {0}, pde, 1));
  }

  SECTION("distance decreases with N") {
    std::vector<MeanFieldDistance> table =
        compare_mean_field(c, phi, {200, 2000}, pde, 3);
    REQUIRE(table.size() == 2);
    double d0 = table[0].l1.back(), d1 = table[1].l1.back();
    CHECK(d1 < d0);
  }
}
