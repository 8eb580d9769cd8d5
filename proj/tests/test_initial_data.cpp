#include <gtest/gtest.h>

#include <cmath>

#include "viscid/initial_data.hpp"

using namespace viscid;

TEST(InitialData, Dirac) {
  auto d = dirac(1, 0);
  ASSERT_EQ(d.atoms.size(), 1u);
  EXPECT_EQ(d.atoms[0].x, 0);
  EXPECT_EQ(d.mass(), 1);
  auto e = dirac(2.5, -1);
  EXPECT_EQ(e.atoms[0].x, -1);
  EXPECT_EQ(e.mass(), 2.5);
  EXPECT_EQ((dirac(1, 0) + dirac(1, 1)).mass(), 2);
  EXPECT_THROW(dirac(0, 0), DomainError);
  EXPECT_THROW(dirac(-1, 0), DomainError);
}

TEST(InitialData, MassOfGridFunctions) {
  Grid g(0, 1, 100);
  EXPECT_EQ(mass(GridFunction::zeros(g)), 0);
  EXPECT_NEAR(mass(GridFunction(g, std::vector<double>(100, 1.0))), 1.0, 1e-15);
}

TEST(InitialData, BumpNormalization) {
  // Independent composite Simpson on the unit bump.
  const int m = 200000;
  double s = 0;
  for (int i = 0; i <= m; ++i) {
    double x = -1 + 2.0 * i / m;
    double w = (i == 0 || i == m) ? 1 : (i % 2 ? 4 : 2);
    s += w * (std::abs(x) < 1 ? std::exp(-1 / (1 - x * x)) : 0.0);
  }
  s *= 2.0 / m / 3;
  for (auto shape : {MollifierShape::bump, MollifierShape::hat, MollifierShape::cosine}) {
    double tot = 0;
    for (int i = 0; i <= m; ++i) {
      double x = -0.3 + 0.6 * i / m;
      double w = (i == 0 || i == m) ? 1 : (i % 2 ? 4 : 2);
      tot += w * mollifier(shape, x, 0.3);
    }
    EXPECT_NEAR(tot * 0.6 / m / 3, 1.0, 1e-9);
  }
  EXPECT_NEAR(mollifier(MollifierShape::bump, 0, 1), std::exp(-1.0) / s, 1e-12);
}

TEST(InitialData, MollifiedMassIsExact) {
  Grid g(-2, 2, 400);
  for (int k = 0; k < 5; ++k) {
    double h = mollifier_width(0.4, k);
    auto u = mollify(dirac(3.0, 0.013), h, g);
    EXPECT_NEAR(mass(u), 3.0, 3.0 * 1e-14) << h;
    for (double v : u.values) EXPECT_GE(v, 0.0);
  }
}

TEST(InitialData, PeakScalesInverselyWithWidth) {
  Grid g(-1, 1, 20000);
  double c = mollifier(MollifierShape::bump, 0, 1);
  for (double h : {0.2, 0.1, 0.05}) {
    auto u = mollify(dirac(1.0, 0.0), h, g);
    double peak = *std::max_element(u.values.begin(), u.values.end());
    EXPECT_NEAR(peak * h, c, 1e-3 * c);
  }
}

TEST(InitialData, SupportGrowsByAtMostH) {
  Grid g(-2, 2, 800);
  double h = 0.25;
  auto u = mollify(dirac(1.0, 0.3) + dirac(0.5, -0.8), h, g);
  for (std::size_t j = 0; j < g.n; ++j) {
    double a = g.node(j), b = g.node(j + 1);
    bool touches = (b > 0.3 - h && a < 0.3 + h) || (b > -0.8 - h && a < -0.8 + h);
    if (!touches) {
      EXPECT_EQ(u[j], 0.0) << j;
    }
  }
}

TEST(InitialData, MollifiedIndicator) {
  Grid g(-0.5, 1.5, 4000);
  double h = 0.01;
  auto u = mollify(density_measure(PiecewisePolynomial::constant(0, 1, 1)), h, g);
  EXPECT_NEAR(mass(u), 1.0, 1e-14);
  for (std::size_t j = 0; j < g.n; ++j) {
    double x = g.center(j);
    if (std::abs(x) < h + g.dx() || std::abs(x - 1) < h + g.dx()) continue;
    double ref = (x > 0 && x < 1) ? 1.0 : 0.0;
    EXPECT_NEAR(u[j], ref, 1e-3) << x;
  }
}

TEST(InitialData, WeakConvergence) {
  Grid g(-3, 3, 12000);
  auto mu = dirac(0.7, 0.21) + density_measure(PiecewisePolynomial({-1, 0, 1}, {{0, 1}, {1, -1}}));
  auto zeta = [](double x) { double y = std::clamp(1 - x * x / 4, 0.0, 1.0); return y * y * (1 + x); };
  double exact = 0.7 * zeta(0.21);
  {
    // hat density on [-1, 1]
    const int m = 100000;
    double s = 0;
    for (int i = 0; i < m; ++i) {
      double x = -1 + 2.0 * (i + 0.5) / m;
      s += (1 - std::abs(x)) * zeta(x);
    }
    exact += s * 2.0 / m;
  }
  double prev = INFINITY;
  for (double h : {0.4, 0.2, 0.1, 0.05, 0.025}) {
    auto u = mollify(mu, h, g);
    double pair = 0;
    for (std::size_t j = 0; j < g.n; ++j) pair += g.dx() * u[j] * zeta(g.center(j));
    double err = std::abs(pair - exact);
    EXPECT_LT(err, prev) << h;
    prev = err;
  }
  EXPECT_LT(prev, 1e-3);
}

TEST(InitialData, RejectsTooSmallGrid) {
  Grid g(-1, 1, 100);
  EXPECT_THROW(mollify(dirac(1, 0.95), 0.1, g), ConfigError);
  EXPECT_THROW(mollify(dirac(1, 0), 0.0, g), DomainError);
}

TEST(InitialData, SpikeMode) {
  Grid g(-1, 1, 100);
  auto u = spike(dirac(2, 0.005), g);
  EXPECT_NEAR(u[g.cell_of(0.005)], 2 / g.dx(), 1e-12);
  EXPECT_NEAR(mass(u), 2, 1e-14);
  int nonzero = 0;
  for (double v : u.values) nonzero += v != 0;
  EXPECT_EQ(nonzero, 1);
}

TEST(InitialData, PiecewisePolynomialIntegral) {
  PiecewisePolynomial p({0, 1, 3}, {{1, 2, 3}, {6, 1}});
  // piece 1: 1 + 2t + 3t^2 on [0,1] -> 3; piece 2: 6 + t on [0,2] -> 14
  EXPECT_NEAR(p.total(), 17, 1e-14);
  EXPECT_NEAR(p.integral(0.5, 2), (0.5 + 0.75 + 0.875) + (6 + 0.5), 1e-14);
  EXPECT_NEAR(p(2), 7, 1e-15);
  EXPECT_THROW(PiecewisePolynomial({0, 1}, {{-1}}), DomainError);
}

TEST(InitialData, DensityProjectionIsExactCellAverage) {
  Grid g(-1, 2, 30);
  auto u = spike(density_measure(PiecewisePolynomial({0, 1}, {{0, 0, 3}})), g);  // 3x^2, mass 1
  for (std::size_t j = 0; j < g.n; ++j) {
    double a = std::clamp(g.node(j), 0.0, 1.0), b = std::clamp(g.node(j + 1), 0.0, 1.0);
    EXPECT_NEAR(u[j], (b * b * b - a * a * a) / g.dx(), 1e-13);
  }
}
