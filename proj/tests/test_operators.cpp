#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "tessdiff/operators.hpp"

using namespace tessdiff;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Scheme-D value of a cell whose volume scales by `ratio` over dt.
double scheme_d_of_ratio(double ratio, double dt) { return (2.0 / dt) * (ratio - 1.0) / (ratio + 1.0); }

template <int D>
Mat<D> random_matrix(std::uint64_t seed, double scale) {
  auto rng = make_rng(seed, Stream::aux);
  Mat<D> a;
  for (auto& x : a.a) x = scale * (2.0 * uniform01(rng) - 1.0);
  return a;
}

template <int D>
double rel_l2(const OperatorField<D>& f, int c, const std::vector<double>& exact) {
  double num = 0.0, den = 0.0;
  for (std::size_t p = 0; p < f.size(); ++p) {
    if (!f.valid[p]) continue;
    num += (f.at(p, c) - exact[p]) * (f.at(p, c) - exact[p]);
    den += exact[p] * exact[p];
  }
  return std::sqrt(num / den);
}

template <int D>
double pearson_valid(const OperatorField<D>& f, const std::vector<double>& b) {
  double ma = 0, mb = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < b.size(); ++i)
    if (f.valid[i]) {
      ma += f.at(i);
      mb += b[i];
      ++n;
    }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < b.size(); ++i)
    if (f.valid[i]) {
      sab += (f.at(i) - ma) * (b[i] - mb);
      saa += (f.at(i) - ma) * (f.at(i) - ma);
      sbb += (b[i] - mb) * (b[i] - mb);
    }
  return sab / std::sqrt(saa * sbb);
}

template <int D>
ParticleCloud<D> linear_cloud(std::size_t n, const Mat<D>& a, std::uint64_t seed, const Vec<D>& b = {}) {
  return sample_field(fields::linear<D>(a, b), seed_uniform<D>(n, Domain<D>::open_box(), seed));
}

}  // namespace

TEST(Operators, VolumeRateSchemes) {
  EXPECT_DOUBLE_EQ(volume_rate(Scheme::D, 1.0, 1.21, 0.1), (2.0 / 0.1) * 0.21 / 2.21);
  EXPECT_DOUBLE_EQ(volume_rate(Scheme::D_lin, 2.0, 3.0, 0.5), (1.0 / 1.0) * (1.0 / 3.0 + 0.5) * 1.0);
  EXPECT_DOUBLE_EQ(volume_rate(Scheme::D_log, 1.0, std::exp(0.2), 0.1), 2.0);
  EXPECT_EQ(parse_scheme("D_log"), Scheme::D_log);
  EXPECT_THROW(parse_scheme("X"), ConfigError);
}

TEST(Operators, UniformTranslationVanishes) {
  const auto dom = Domain<2>::periodic_box();
  const auto c = sample_field(fields::uniform<2>(Vec2{{1.0, 0.0}}), seed_uniform<2>(3000, dom, 1));
  for (auto mode : {RetessellationMode::frozen_connectivity, RetessellationMode::retessellate})
    for (auto scheme : {Scheme::D, Scheme::D_lin, Scheme::D_log}) {
      const LagrangianOperators<2> ops(advect_euler(c, 0.1, dom, mode), DualKind::modified_centroid, scheme);
      for (const auto& f : {ops.divergence(), ops.curl(), ops.gradient()})
        for (std::size_t i = 0; i < f.values.size(); ++i) ASSERT_NEAR(f.values[i], 0.0, 1e-10);
    }
  const auto t = build_delaunay<2>(c, dom);
  for (const auto& f : {divergence_eulerian(t, c), curl_eulerian(t, c), gradient_eulerian(t, c)})
    for (double v : f.values) EXPECT_EQ(v, 0.0);

  const auto d3 = Domain<3>::periodic_box();
  const auto c3 = sample_field(fields::uniform<3>(Vec3{{0.2, -0.5, 1.0}}), seed_uniform<3>(2000, d3, 2));
  const LagrangianOperators<3> ops3(advect_euler(c3, 0.1, d3));
  for (const auto& f : {ops3.divergence(), ops3.curl(), ops3.gradient()})
    for (double v : f.values) ASSERT_NEAR(v, 0.0, 1e-10);
}

TEST(Operators, IsotropicExpansionClosedForm) {
  const auto c = linear_cloud<2>(2000, Mat<2>::identity(), 3);
  const auto f = divergence_lagrangian(advect_euler(c, 0.1, Domain<2>::open_box()));
  const double expect = (2.0 / 0.1) * (0.21 / 2.21);
  EXPECT_NEAR(expect, 1.9004524886877827, 1e-15);
  std::size_t valid = 0;
  for (std::size_t p = 0; p < f.size(); ++p)
    if (f.valid[p]) {
      ++valid;
      EXPECT_NEAR(f.at(p), expect, 1e-10 * expect);
    }
  EXPECT_GT(valid, 1800u);
}

TEST(Operators, AffineOracleBothDualKinds) {
  for (int trial = 0; trial < 3; ++trial) {
    const double dt = 0.05;
    const auto a2 = random_matrix<2>(100 + trial, 1.0);
    const auto c2 = linear_cloud<2>(1500, a2, 10 + trial, Vec2{{0.3, -0.1}});
    const double e2 = scheme_d_of_ratio(det(Mat<2>::identity() + dt * a2), dt);
    for (auto kind : {DualKind::modified_centroid, DualKind::incident_simplex_sum}) {
      const auto f = divergence_lagrangian(advect_euler(c2, dt, Domain<2>::open_box()), kind);
      EXPECT_GT(f.num_valid(), 1300u);
      for (std::size_t p = 0; p < f.size(); ++p)
        if (f.valid[p]) ASSERT_NEAR(f.at(p), e2, 1e-10 * std::fabs(e2));
    }
    const auto a3 = random_matrix<3>(200 + trial, 1.0);
    const auto c3 = linear_cloud<3>(1500, a3, 20 + trial);
    const double e3 = scheme_d_of_ratio(det(Mat<3>::identity() + dt * a3), dt);
    for (auto kind : {DualKind::modified_centroid, DualKind::incident_simplex_sum}) {
      const auto f = divergence_lagrangian(advect_euler(c3, dt, Domain<3>::open_box()), kind);
      EXPECT_GT(f.num_valid(), 700u);
      for (std::size_t p = 0; p < f.size(); ++p)
        if (f.valid[p]) ASSERT_NEAR(f.at(p), e3, 1e-10 * std::fabs(e3));
    }
  }
}

TEST(Operators, CurlOfRigidRotation2D) {
  const double dt = 0.01;
  Mat<2> rot;
  rot(0, 1) = -1.0;
  rot(1, 0) = 1.0;
  const auto c = linear_cloud<2>(2000, rot, 4);
  const auto f = curl_lagrangian(advect_euler(c, dt, Domain<2>::open_box()));
  // The auxiliary field -v_perp = (x, y) scales cell volumes by (1 + dt)^2.
  const double expect = scheme_d_of_ratio((1 + dt) * (1 + dt), dt);
  for (std::size_t p = 0; p < f.size(); ++p)
    if (f.valid[p]) {
      EXPECT_NEAR(f.at(p), expect, 1e-10 * expect);
      EXPECT_NEAR(f.at(p), 2.0, 0.02 * 2.0);
    }
}

TEST(Operators, CurlOfIrrotationalField2D) {
  const double dt = 0.01;
  const auto c = linear_cloud<2>(2000, Mat<2>::identity(), 5);
  const auto f = curl_lagrangian(advect_euler(c, dt, Domain<2>::open_box()));
  // -v_perp = (y, -x): det(I + dt R) = 1 + dt^2.
  const double expect = (2.0 / dt) * (dt * dt / (2.0 + dt * dt));
  for (std::size_t p = 0; p < f.size(); ++p)
    if (f.valid[p]) {
      EXPECT_NEAR(f.at(p), expect, 1e-9 * expect);
      EXPECT_LE(std::fabs(f.at(p)), 0.01);
    }
}

TEST(Operators, CurlOfRotation3D) {
  const double dt = 0.01;
  Mat<3> rot;
  rot(0, 1) = -1.0;
  rot(1, 0) = 1.0;
  const auto c = linear_cloud<3>(2000, rot, 6);
  const auto f = curl_lagrangian(advect_euler(c, dt, Domain<3>::open_box()));
  const double ez = scheme_d_of_ratio((1 + dt) * (1 + dt), dt);
  for (std::size_t p = 0; p < f.size(); ++p)
    if (f.valid[p]) {
      EXPECT_NEAR(f.at(p, 0), 0.0, 1e-10);
      EXPECT_NEAR(f.at(p, 1), 0.0, 1e-10);
      EXPECT_NEAR(f.at(p, 2), ez, 1e-10 * ez);
    }
}

TEST(Operators, GradientOfLinearField) {
  Mat<2> a;
  a(0, 0) = 1.0;
  a(0, 1) = 2.0;
  a(1, 1) = -1.0;
  const double dt = 1e-3;
  const auto c = linear_cloud<2>(100000, a, 7);
  const LagrangianOperators<2> ops(advect_euler(c, dt, Domain<2>::open_box()));
  const auto g = ops.gradient();
  const auto d = ops.divergence();
  double worst = 0.0;
  const double norm2 = 1.0 + 4.0 + 1.0;
  for (std::size_t p = 0; p < g.size(); ++p) {
    if (!g.valid[p]) continue;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        // Entry (i, j) advects with a rank-one field: det(I + dt B) = 1 + dt a_ij. Cells are
        // ~3e-3 wide here, so round-off in the volume difference is amplified by 1/dt.
        EXPECT_NEAR(g.at(p, i * 2 + j), scheme_d_of_ratio(1.0 + dt * a(i, j), dt), 1e-7);
        worst = std::max(worst, std::fabs(g.at(p, i * 2 + j) - a(i, j)));
      }
    EXPECT_LE(std::fabs(trace(g.gradient(p)) - d.at(p)), 5.0 * dt * norm2);
  }
  EXPECT_LE(worst, 0.05);
}

TEST(Operators, EulerianExactOnLinearFields) {
  for (int trial = 0; trial < 3; ++trial) {
    const auto a2 = random_matrix<2>(300 + trial, 2.0);
    const auto c2 = linear_cloud<2>(800, a2, 30 + trial, Vec2{{1.0, -2.0}});
    const auto t2 = build_delaunay<2>(c2, Domain<2>::open_box());
    const EulerianOperators<2> e2(t2, c2.velocities);
    for (double d : e2.simplex_divergences(c2.velocities)) ASSERT_NEAR(d, trace(a2), 1e-10 * std::fabs(trace(a2)));
    const auto g2 = e2.gradient();
    const auto c2f = e2.curl();
    const auto d2 = e2.divergence();
    for (std::size_t p = 0; p < g2.size(); ++p) {
      if (!g2.valid[p]) continue;
      for (int k = 0; k < 4; ++k) ASSERT_NEAR(g2.at(p, k), a2.a[k], 1e-10 * std::max(1.0, std::fabs(a2.a[k])));
      ASSERT_NEAR(c2f.at(p), a2(1, 0) - a2(0, 1), 1e-10);
      ASSERT_NEAR(trace(g2.gradient(p)), d2.at(p), 1e-12 * std::max(1.0, std::fabs(d2.at(p))));
    }

    const auto a3 = random_matrix<3>(400 + trial, 2.0);
    const auto c3 = linear_cloud<3>(800, a3, 40 + trial, Vec3{{1.0, 0.5, -2.0}});
    const auto t3 = build_delaunay<3>(c3, Domain<3>::open_box());
    const EulerianOperators<3> e3(t3, c3.velocities);
    for (double d : e3.simplex_divergences(c3.velocities)) ASSERT_NEAR(d, trace(a3), 1e-10 * std::max(1.0, std::fabs(trace(a3))));
    const auto g3 = e3.gradient();
    const auto c3f = e3.curl();
    const auto d3 = e3.divergence();
    const Vec3 curl_exact{{a3(2, 1) - a3(1, 2), a3(0, 2) - a3(2, 0), a3(1, 0) - a3(0, 1)}};
    for (std::size_t p = 0; p < g3.size(); ++p) {
      if (!g3.valid[p]) continue;
      for (int k = 0; k < 9; ++k) ASSERT_NEAR(g3.at(p, k), a3.a[k], 1e-10 * std::max(1.0, std::fabs(a3.a[k])));
      for (int k = 0; k < 3; ++k) ASSERT_NEAR(c3f.at(p, k), curl_exact[k], 1e-10 * std::max(1.0, std::fabs(curl_exact[k])));
      ASSERT_NEAR(trace(g3.gradient(p)), d3.at(p), 1e-12 * std::max(1.0, std::fabs(d3.at(p))));
    }
  }
}

TEST(Operators, EulerianAntisymmetricCurl3D) {
  // v = w x x has curl 2 w.
  const Vec3 w{{0.3, -1.2, 0.7}};
  Mat<3> a;
  a(0, 1) = -w[2];
  a(0, 2) = w[1];
  a(1, 0) = w[2];
  a(1, 2) = -w[0];
  a(2, 0) = -w[1];
  a(2, 1) = w[0];
  const auto c = linear_cloud<3>(600, a, 50);
  const auto t = build_delaunay<3>(c, Domain<3>::open_box());
  const auto f = curl_eulerian(t, c);
  for (std::size_t p = 0; p < f.size(); ++p)
    if (f.valid[p])
      for (int k = 0; k < 3; ++k) ASSERT_NEAR(f.at(p, k), 2.0 * w[k], 1e-10);
}

TEST(Operators, EulerianLinearInVelocityData) {
  const auto dom = Domain<3>::periodic_box();
  const auto cloud = seed_uniform<3>(3000, dom, 51);
  const auto u = sample_field(fields::divergence_field<3>(), cloud).velocities;
  const auto w = sample_field(SyntheticSpectrumField<3>(8, -5.0 / 3.0, 3).as_field(), cloud).velocities;
  const double alpha = 1.7, beta = -0.4;
  std::vector<Vec3> mix(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) mix[i] = alpha * u[i] + beta * w[i];
  const auto t = build_delaunay<3>(cloud, dom);
  const EulerianOperators<3> eu(t, u), ew(t, w), em(t, mix);
  const auto gu = eu.gradient(), gw = ew.gradient(), gm = em.gradient();
  const auto cu = eu.curl(), cw = ew.curl(), cm = em.curl();
  for (std::size_t p = 0; p < gu.size(); ++p) {
    for (int k = 0; k < 9; ++k) {
      const double e = alpha * gu.at(p, k) + beta * gw.at(p, k);
      ASSERT_NEAR(gm.at(p, k), e, 1e-12 * std::max(1.0, std::fabs(e)));
    }
    for (int k = 0; k < 3; ++k) {
      const double e = alpha * cu.at(p, k) + beta * cw.at(p, k);
      ASSERT_NEAR(cm.at(p, k), e, 1e-12 * std::max(1.0, std::fabs(e)));
    }
  }
}

TEST(Operators, EulerianMatchesLagrangianLimit) {
  const auto dom = Domain<2>::periodic_box();
  const auto fld = fields::divergence_field<2>();
  const auto c = sample_field(fld, seed_uniform<2>(20000, dom, 52));
  std::vector<double> exact(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) exact[i] = fld.divergence(c.positions[i]);
  const double el = rel_l2(divergence_lagrangian(advect_euler(c, 1e-4, dom)), 0, exact);
  const double ee = rel_l2(divergence_eulerian(build_delaunay<2>(c, dom), c), 0, exact);
  EXPECT_NEAR(ee / el, 1.0, 0.1);
}

TEST(Operators, SchemesAgreeToFirstOrder) {
  const auto dom = Domain<2>::periodic_box();
  const auto c = sample_field(fields::divergence_field<2>(), seed_uniform<2>(5000, dom, 53));
  std::vector<double> gap_lin, gap_log;
  for (double dt : {1e-3, 1e-4, 1e-5}) {
    const auto tp = advect_euler(c, dt, dom);
    const auto d = divergence_lagrangian(tp, DualKind::modified_centroid, Scheme::D);
    const auto dl = divergence_lagrangian(tp, DualKind::modified_centroid, Scheme::D_lin);
    const auto dg = divergence_lagrangian(tp, DualKind::modified_centroid, Scheme::D_log);
    double a = 0.0, b = 0.0;
    for (std::size_t p = 0; p < d.size(); ++p) {
      a = std::max(a, std::fabs(d.at(p) - dl.at(p)));
      b = std::max(b, std::fabs(d.at(p) - dg.at(p)));
    }
    gap_lin.push_back(a / dt);
    gap_log.push_back(b / dt);
  }
  // max |D - D_lin| <= C dt with C fitted at dt = 1e-3 (and similarly for D_log).
  for (std::size_t i = 1; i < 3; ++i) {
    EXPECT_LE(gap_lin[i], 1.1 * gap_lin[0]);
    EXPECT_LE(gap_log[i], 1.1 * gap_log[0]);
  }
}

TEST(Operators, SchemeOrderingAtLargeStep) {
  const auto dom = Domain<2>::periodic_box();
  const auto fld = fields::cos_cos_2d();
  const auto c = sample_field(fld, seed_uniform<2>(20000, dom, 54));
  std::vector<double> exact(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) exact[i] = fld.gradient(c.positions[i])(0, 0);
  const auto tp = advect_euler(c, 0.5, dom);
  const double e = rel_l2(divergence_lagrangian(tp, DualKind::modified_centroid, Scheme::D), 0, exact);
  const double el = rel_l2(divergence_lagrangian(tp, DualKind::modified_centroid, Scheme::D_lin), 0, exact);
  const double eg = rel_l2(divergence_lagrangian(tp, DualKind::modified_centroid, Scheme::D_log), 0, exact);
  EXPECT_LT(e, eg);
  EXPECT_LT(eg, el);
}

TEST(Operators, ClassicSaturatesModifiedConverges) {
  const auto dom = Domain<2>::periodic_box();
  const auto fld = fields::divergence_field<2>();
  for (std::size_t n : {2000u, 20000u}) {
    const auto c = sample_field(fld, seed_uniform<2>(n, dom, 55));
    std::vector<double> exact(n);
    for (std::size_t i = 0; i < n; ++i) exact[i] = fld.divergence(c.positions[i]);
    const auto tp = advect_euler(c, 1e-3, dom);
    EXPECT_LT(pearson_valid(divergence_lagrangian(tp, DualKind::classic_circumcenter), exact), 0.95);
    if (n == 20000u) EXPECT_GT(pearson_valid(divergence_lagrangian(tp, DualKind::modified_centroid), exact), 0.995);
  }
}

TEST(Operators, RetessellationOfVoronoiCellsIsContinuous) {
  // Voronoi volumes are continuous in the particle positions, so flips do not matter for them.
  const auto dom = Domain<2>::periodic_box();
  const auto c = sample_field(fields::divergence_field<2>(), seed_uniform<2>(5000, dom, 56));
  const auto a = divergence_lagrangian(advect_euler(c, 1e-3, dom, RetessellationMode::frozen_connectivity),
                                       DualKind::classic_circumcenter);
  const auto b = divergence_lagrangian(advect_euler(c, 1e-3, dom, RetessellationMode::retessellate),
                                       DualKind::classic_circumcenter);
  double diff = 0.0, scale = 0.0;
  for (std::size_t p = 0; p < a.size(); ++p) {
    diff += (a.at(p) - b.at(p)) * (a.at(p) - b.at(p));
    scale += a.at(p) * a.at(p);
  }
  EXPECT_LT(std::sqrt(diff / scale), 0.02);
  EXPECT_EQ(b.meta.mode, RetessellationMode::retessellate);
}

TEST(Operators, WtliExactOnLinearFields) {
  Mat<2> a;
  a(0, 0) = 0.7;
  a(0, 1) = -1.3;
  a(1, 0) = 2.1;
  a(1, 1) = 0.4;
  const auto c = linear_cloud<2>(1500, a, 57, Vec2{{3.0, -1.0}});
  const auto t = build_delaunay<2>(c, Domain<2>::open_box());
  const auto g = wtli_gradient_2d(t, c.velocities);
  std::size_t valid = 0;
  for (std::size_t p = 0; p < g.size(); ++p) {
    if (!g.valid[p]) continue;
    ++valid;
    for (int k = 0; k < 4; ++k) ASSERT_NEAR(g.at(p, k), a.a[k], 1e-10 * std::max(1.0, std::fabs(a.a[k])));
  }
  EXPECT_GT(valid, 1300u);
  const auto z = wtli_gradient_2d(t, std::vector<Vec2>(c.size(), Vec2{{2.0, -5.0}}));
  for (std::size_t p = 0; p < z.size(); ++p)
    if (z.valid[p])
      for (int k = 0; k < 4; ++k) ASSERT_NEAR(z.at(p, k), 0.0, 1e-10);
}

TEST(Operators, WtliPeriodicTracksEulerian) {
  const auto dom = Domain<2>::periodic_box();
  const auto fld = fields::cos_cos_2d();
  const auto c = sample_field(fld, seed_uniform<2>(20000, dom, 58));
  const auto t = build_delaunay<2>(c, dom);
  std::vector<double> exact(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) exact[i] = fld.gradient(c.positions[i])(0, 0);
  const auto w = wtli_gradient_2d(t, c.velocities);
  EXPECT_EQ(w.num_valid(), c.size());
  const double ew = rel_l2(w, 0, exact);
  const double ee = rel_l2(gradient_eulerian(t, c), 0, exact);
  EXPECT_LT(std::max(ew, ee) / std::min(ew, ee), 2.0);
}

TEST(Operators, HelicitySpotChecks) {
  std::vector<Vec3> v{Vec3{{1, 2, 3}}, Vec3{{1, 2, 3}}, Vec3{{1, 0, 0}}, Vec3{{0, 0, 0}}, Vec3{{0, 1, 0}}};
  auto curl = OperatorField<3>::make(OperatorKind::curl, 3, 5);
  const double w[5][3] = {{2, 4, 6}, {-0.5, -1, -1.5}, {0, 3, -2}, {1, 1, 1}, {0, 0, 0}};
  for (int p = 0; p < 5; ++p)
    for (int k = 0; k < 3; ++k) curl.at(static_cast<std::size_t>(p), k) = w[p][k];
  const auto h = relative_helicity(v, curl);
  EXPECT_EQ(h.at(0), 1.0);
  EXPECT_EQ(h.at(1), -1.0);
  EXPECT_NEAR(h.at(2), 0.0, 1e-12);
  EXPECT_FALSE(h.valid[3]);
  EXPECT_FALSE(h.valid[4]);
  EXPECT_TRUE(h.valid[0] && h.valid[1] && h.valid[2]);
}

TEST(Operators, HelicityBoundedOnRandomField) {
  const auto dom = Domain<3>::periodic_box();
  const auto c = sample_field(SyntheticSpectrumField<3>(6, -5.0 / 3.0, 4).as_field(), seed_uniform<3>(4000, dom, 59));
  const LagrangianOperators<3> ops(advect_euler(c, 1e-3, dom));
  const auto h = relative_helicity(ops.velocities(), ops.curl());
  EXPECT_GT(h.num_valid(), 3900u);
  for (std::size_t p = 0; p < h.size(); ++p)
    if (h.valid[p]) {
      EXPECT_GE(h.at(p), -1.0);
      EXPECT_LE(h.at(p), 1.0);
    }
}

TEST(Operators, OpenBoxHullParticlesInvalid) {
  const auto c = linear_cloud<2>(500, Mat<2>::identity(), 60);
  const LagrangianOperators<2> ops(advect_euler(c, 0.01, Domain<2>::open_box()));
  const auto d = ops.divergence();
  for (int p = 0; p < 500; ++p)
    if (!ops.tessellation().closed(p)) EXPECT_FALSE(d.valid[static_cast<std::size_t>(p)]);
  EXPECT_LT(d.num_valid(), 500u);
}

TEST(Operators, SharedTessellationMatchesFreshBuild) {
  const auto dom = Domain<3>::periodic_box();
  const auto c = sample_field(fields::divergence_field<3>(), seed_uniform<3>(3000, dom, 91));
  const auto tess = build_delaunay<3>(c, dom);
  const auto vol = dual_cells(tess, DualKind::modified_centroid);
  const std::array<Scheme, 3> schemes{Scheme::D, Scheme::D_lin, Scheme::D_log};
  for (double dt : {0.1, 0.01}) {
    const auto tp = advect_euler(c, dt, dom);
    const LagrangianOperators<3> shared(tp, tess, DualKind::modified_centroid, Scheme::D, vol);
    const auto all = shared.divergence(schemes);
    ASSERT_EQ(all.size(), 3u);
    for (std::size_t s = 0; s < schemes.size(); ++s) {
      const auto fresh = divergence_lagrangian(tp, DualKind::modified_centroid, schemes[s]);
      EXPECT_EQ(all[s].meta.scheme, schemes[s]);
      EXPECT_EQ(all[s].values, fresh.values);
      EXPECT_EQ(all[s].valid, fresh.valid);
    }
  }
  const auto small = seed_uniform<3>(100, dom, 1);
  EXPECT_THROW(LagrangianOperators<3>(advect_euler(sample_field(fields::divergence_field<3>(), small), 0.1, dom), tess,
                                      DualKind::modified_centroid, Scheme::D),
               ConfigError);
}
