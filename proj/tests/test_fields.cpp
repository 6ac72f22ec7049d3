#include <gtest/gtest.h>

#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <numbers>
#include <vector>

#include "tessdiff/fields.hpp"
#include "tessdiff/core/tessellation.hpp"

using namespace tessdiff;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

template <int D>
void check_gradient_by_finite_differences(const AnalyticField<D>& f, std::uint64_t seed, double tol = 1e-6) {
  auto rng = make_rng(seed, Stream::aux);
  const double h = 1e-5;
  for (int trial = 0; trial < 10; ++trial) {
    Vec<D> x;
    for (int i = 0; i < D; ++i) x[i] = kTwoPi * uniform01(rng);
    const Mat<D> g = f.gradient(x);
    for (int j = 0; j < D; ++j) {
      Vec<D> xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      const Vec<D> d = (f.velocity(xp) - f.velocity(xm)) * (0.5 / h);
      for (int i = 0; i < D; ++i) EXPECT_NEAR(g(i, j), d[i], tol * std::max(1.0, std::fabs(d[i]))) << f.id;
    }
  }
}

// Direct evaluation of the synthetic field with std::sin per term.
template <int D>
Vec<D> synthetic_direct(const SyntheticSpectrumField<D>& s, const Vec<D>& x) {
  Vec<D> u{};
  for (int k = 1; k <= s.k_max(); ++k)
    for (int i = 0; i < D; ++i)
      for (int a = 0; a < D; ++a) u[i] += std::pow(k, 0.5 * s.exponent()) * std::sin(k * x[a] + s.phase(k, i * D + a));
  return u;
}

}  // namespace

TEST(Fields, AnalyticGradientsMatchFiniteDifferences) {
  check_gradient_by_finite_differences(fields::cos_cos_2d(), 1);
  check_gradient_by_finite_differences(fields::sin_cos_cos_3d(), 2);
  check_gradient_by_finite_differences(fields::divergence_field<2>(), 3);
  check_gradient_by_finite_differences(fields::divergence_field<3>(), 4);
  check_gradient_by_finite_differences(fields::shear<2>(), 5);
  check_gradient_by_finite_differences(fields::sine_wave<2>(4.0), 6);
  check_gradient_by_finite_differences(fields::sine_wave<3>(8.0), 7);
  Mat<3> a;
  for (int i = 0; i < 9; ++i) a.a[i] = 0.1 * (i - 4);
  check_gradient_by_finite_differences(fields::linear<3>(a, Vec3{{1, 2, 3}}), 8);
  check_gradient_by_finite_differences(SyntheticSpectrumField<2>(16, -3.0, 9).as_field(), 9, 1e-5);
  check_gradient_by_finite_differences(SyntheticSpectrumField<3>(16, -5.0 / 3.0, 10).as_field(), 10, 1e-5);
}

TEST(Fields, DivergenceFieldFormulas) {
  const auto f2 = fields::divergence_field<2>();
  const auto f3 = fields::divergence_field<3>();
  auto rng = make_rng(11, Stream::aux);
  for (int t = 0; t < 20; ++t) {
    const double x = kTwoPi * uniform01(rng), y = kTwoPi * uniform01(rng), z = kTwoPi * uniform01(rng);
    EXPECT_NEAR(f2.divergence(Vec2{{x, y}}), -2.0 * std::sin(x) * std::cos(y), 1e-14);
    EXPECT_NEAR(f3.divergence(Vec3{{x, y, z}}), 3.0 * std::cos(x) * std::cos(y) * std::cos(z), 1e-14);
  }
}

TEST(Fields, SyntheticRecurrenceMatchesDirectSum) {
  const SyntheticSpectrumField<3> s(256, -5.0 / 3.0, 12);
  auto rng = make_rng(12, Stream::aux);
  for (int t = 0; t < 20; ++t) {
    Vec3 x;
    for (int i = 0; i < 3; ++i) x[i] = kTwoPi * uniform01(rng);
    Vec3 u;
    s.eval(x, &u, nullptr);
    const Vec3 d = synthetic_direct(s, x);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(u[i], d[i], 1e-11);
  }
}

TEST(Fields, SyntheticAmplitudes) {
  const SyntheticSpectrumField<2> s2(64, SyntheticSpectrumField<2>::default_exponent(), 1);
  const SyntheticSpectrumField<3> s3(64, SyntheticSpectrumField<3>::default_exponent(), 1);
  for (int k : {1, 2, 7, 64}) {
    EXPECT_DOUBLE_EQ(s2.amplitude(k), std::pow(k, -1.5));
    EXPECT_DOUBLE_EQ(s3.amplitude(k), std::pow(k, -5.0 / 6.0));
    for (int j = 0; j < 9; ++j) {
      EXPECT_GE(s3.phase(k, j), 0.0);
      EXPECT_LT(s3.phase(k, j), kTwoPi);
    }
  }
  EXPECT_THROW(SyntheticSpectrumField<2>(0, -3.0, 1), ConfigError);
}

TEST(Fields, SeedUniformDeterministicAndInBox) {
  const auto dom = Domain<2>::periodic_box();
  const auto a = seed_uniform<2>(4, dom, 42);
  const auto b = seed_uniform<2>(4, dom, 42);
  const auto c = seed_uniform<2>(4, dom, 43);
  EXPECT_EQ(a.positions, b.positions);
  EXPECT_NE(a.positions, c.positions);
  for (const auto& x : a.positions)
    for (int i = 0; i < 2; ++i) {
      EXPECT_GE(x[i], 0.0);
      EXPECT_LT(x[i], kTwoPi);
    }
  EXPECT_THROW(seed_uniform<3>(3, Domain<3>::periodic_box(), 1), ConfigError);
}

TEST(Fields, SeedUniformChiSquare) {
  const std::size_t n = 1000000;
  for (int d : {2, 3}) {
    const int m = 16;
    const std::size_t boxes = d == 2 ? m * m : m * m * m;
    std::vector<double> count(boxes, 0.0);
    if (d == 2) {
      const auto c = seed_uniform<2>(n, Domain<2>::periodic_box(), 5);
      for (const auto& x : c.positions)
        count[static_cast<std::size_t>(static_cast<int>(x[0] / kTwoPi * m) * m + static_cast<int>(x[1] / kTwoPi * m))] += 1;
    } else {
      const auto c = seed_uniform<3>(n, Domain<3>::periodic_box(), 5);
      for (const auto& x : c.positions)
        count[static_cast<std::size_t>((static_cast<int>(x[0] / kTwoPi * m) * m + static_cast<int>(x[1] / kTwoPi * m)) * m +
                                       static_cast<int>(x[2] / kTwoPi * m))] += 1;
    }
    const double expect = static_cast<double>(n) / static_cast<double>(boxes);
    double chi2 = 0.0;
    for (double k : count) chi2 += (k - expect) * (k - expect) / expect;
    const boost::math::chi_squared dist(static_cast<double>(boxes - 1));
    EXPECT_LT(chi2, boost::math::quantile(dist, 0.99)) << "d=" << d;
  }
}

TEST(Fields, MeanSpacing) {
  EXPECT_NEAR(Domain<2>::periodic_box().mean_spacing(10000), kTwoPi / 100.0, 1e-15);
  EXPECT_NEAR(Domain<3>::periodic_box().mean_spacing(1000000), kTwoPi / 100.0, 1e-14);
  ParticleCloud<3> c;
  c.positions.resize(8000);
  EXPECT_NEAR(c.delta(Domain<3>::periodic_box()), kTwoPi / 20.0, 1e-14);
}

TEST(Fields, SampleField) {
  const auto dom = Domain<2>::periodic_box();
  const auto c = seed_uniform<2>(100, dom, 3);
  const auto s = sample_field(fields::uniform<2>(Vec2{{0.5, -2.0}}), c);
  for (const auto& v : s.velocities) EXPECT_EQ(v, (Vec2{{0.5, -2.0}}));
  const double k = 4.0;
  ParticleCloud<2> one;
  one.positions = {Vec2{{std::numbers::pi / (2 * k), 1.0}}};
  EXPECT_NEAR(sample_field(fields::sine_wave<2>(k), one).velocities[0][0], 1.0, 1e-15);
}

TEST(Fields, SyntheticMeanWithinCltBound) {
  const std::size_t n = 1000000;
  const int kmax = 32;
  const SyntheticSpectrumField<2> s(kmax, -3.0, 7);
  const auto c = sample_field(s.as_field(), seed_uniform<2>(n, Domain<2>::periodic_box(), 7));
  // Per-component variance: sum over k and the two axes of E(k)/2.
  double var = 0.0;
  for (int k = 1; k <= kmax; ++k) var += 2.0 * std::pow(k, -3.0) / 2.0;
  for (int i = 0; i < 2; ++i) {
    double mean = 0.0;
    for (const auto& v : c.velocities) mean += v[i];
    mean /= static_cast<double>(n);
    EXPECT_LT(std::fabs(mean), 3.0 * std::sqrt(var / static_cast<double>(n)));
  }
}

TEST(Fields, AdvectEuler) {
  const auto dom = Domain<2>::periodic_box();
  auto c = seed_uniform<2>(50, dom, 9);
  c.velocities.assign(50, Vec2{});
  const auto still = advect_euler(c, 0.3, dom);
  EXPECT_EQ(still.after, c.positions);
  c.velocities.assign(50, Vec2{{1.0, 0.0}});
  const auto wrapped = advect_euler(c, kTwoPi, dom);
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_NEAR(wrapped.after[i][0], c.positions[i][0], 1e-12);
    EXPECT_EQ(wrapped.after[i][1], c.positions[i][1]);
  }
  ParticleCloud<2> bare;
  bare.positions = c.positions;
  EXPECT_THROW(advect_euler(bare, 0.1, dom), ConfigError);
}

TEST(Fields, AdvectLinearFieldScalesSimplexVolumes) {
  const auto dom = Domain<3>::open_box();
  Mat<3> a;
  const double vals[9] = {0.5, -0.3, 0.2, 0.1, -0.4, 0.7, -0.2, 0.3, 0.1};
  for (int i = 0; i < 9; ++i) a.a[i] = vals[i];
  const auto c = sample_field(fields::linear<3>(a), seed_uniform<3>(300, dom, 4));
  const double dt = 0.05;
  const auto tp = advect_euler(c, dt, dom);
  const auto t0 = build_delaunay<3>(c, dom);
  const auto t1 = t0.with_positions(tp.unwrapped_after());
  const double ratio = det(Mat<3>::identity() + dt * a);
  for (std::size_t s = 0; s < t0.num_simplices(); ++s)
    EXPECT_NEAR(simplex_volume<3>(t1.simplex_points(s)) / simplex_volume<3>(t0.simplex_points(s)), ratio, 1e-10);
}

TEST(Fields, InertialRelaxationInStillFluid) {
  InertialState<2> s;
  s.positions = {Vec2{{1.0, 1.0}}};
  s.velocities = {Vec2{{2.0, -1.0}}};
  s.tau_p = 0.5;
  const double dt = 0.01;
  const int steps = 100;
  const auto tr = integrate_inertial<2>(s, fields::uniform<2>(Vec2{}), Domain<2>::periodic_box(), dt, steps);
  EXPECT_FALSE(tr.unstable_step);
  ASSERT_EQ(tr.states.size(), static_cast<std::size_t>(steps + 1));
  const double discrete = std::pow(1.0 - dt / s.tau_p, steps);
  const double exact = std::exp(-steps * dt / s.tau_p);
  EXPECT_NEAR(tr.states.back().velocities[0][0], 2.0 * discrete, 1e-12);
  EXPECT_NEAR(tr.states.back().velocities[0][0] / 2.0, exact, 2.0 * dt / s.tau_p * exact * steps * dt / s.tau_p);
  EXPECT_NEAR(tr.states.back().time, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(s.stokes(0.25), 2.0);
}

TEST(Fields, InertialApproachesConstantCarrier) {
  InertialState<3> s;
  s.positions = {Vec3{{1, 2, 3}}};
  s.velocities = {Vec3{}};
  s.tau_p = 0.1;
  const Vec3 u{{0.3, -0.2, 0.5}};
  const auto tr = integrate_inertial<3>(s, fields::uniform<3>(u), Domain<3>::periodic_box(), 0.02, 500);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(tr.states.back().velocities[0][i], u[i], 1e-12);
}

TEST(Fields, InertialBallisticBound) {
  InertialState<2> s;
  s.positions = {Vec2{{3.0, 3.0}}};
  s.velocities = {Vec2{}};
  s.tau_p = 100.0;
  const auto carrier = fields::divergence_field<2>();
  const double dt = 0.01;
  const int steps = 200;
  const auto tr = integrate_inertial<2>(s, carrier, Domain<2>::open_box(10.0), dt, steps);
  const double t = dt * steps;
  const double umax = std::sqrt(2.0);
  const Vec2 moved = tr.states.back().positions[0] - s.positions[0];
  EXPECT_LE(norm(moved), t * t * umax / (2.0 * s.tau_p));
  EXPECT_GT(norm(moved), 0.0);
}

TEST(Fields, InertialUnstableStepFlagged) {
  InertialState<2> s;
  s.positions = {Vec2{}};
  s.velocities = {Vec2{}};
  s.tau_p = 0.01;
  EXPECT_TRUE((integrate_inertial<2>(s, fields::uniform<2>(Vec2{}), Domain<2>::periodic_box(), 0.02, 1).unstable_step));
  s.tau_p = 0.0;
  EXPECT_THROW((integrate_inertial<2>(s, fields::uniform<2>(Vec2{}), Domain<2>::periodic_box(), 0.02, 1)), ConfigError);
}

TEST(Fields, RandomStreamsIndependent) {
  auto a = make_rng(1, Stream::positions);
  auto b = make_rng(1, Stream::phases);
  auto c = make_rng(1, Stream::positions);
  EXPECT_NE(a(), b());
  auto a2 = make_rng(1, Stream::positions);
  c();
  EXPECT_EQ(a2(), make_rng(1, Stream::positions)());
  // Phases do not depend on how many positions were drawn: both come from their own stream.
  const SyntheticSpectrumField<2> s1(8, -3.0, 5);
  (void)seed_uniform<2>(1000, Domain<2>::periodic_box(), 5);
  const SyntheticSpectrumField<2> s2(8, -3.0, 5);
  EXPECT_EQ(s1.phase(3, 2), s2.phase(3, 2));
}
