#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "despeckle/prox.hpp"
#include "despeckle/special.hpp"
#include "oracles.hpp"

using namespace despeckle;

namespace {

Image random_image(std::size_t m, std::size_t n, std::uint64_t seed,
                   double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  Image u(m, n);
  for (double& v : u.pixels()) v = lo + (hi - lo) * rng.uniform();
  return u;
}

struct PsiProblem {
  TightFrame frame{1};
  FrameCoeffs y_th;
  IndexPartition part;
};

PsiProblem make_psi_problem(std::size_t m, std::size_t n, std::uint64_t seed,
                            double threshold) {
  PsiProblem p;
  const Image u = random_image(m, n, seed);
  auto [yt, part] = hard_threshold(p.frame.analyze(u), threshold);
  p.y_th = std::move(yt);
  p.part = std::move(part);
  return p;
}

FrameCoeffs perturb(const FrameCoeffs& x, std::uint64_t seed, double amp) {
  Rng rng(seed);
  FrameCoeffs out = x;
  for (auto& band : out.bands())
    for (double& v : band.coeffs.pixels()) v += amp * (2.0 * rng.uniform() - 1.0);
  return out;
}

}  // namespace

TEST_CASE("soft threshold basics") {
  CHECK(soft_threshold(3.0, 1.0) == 2.0);
  CHECK(soft_threshold(-0.5, 1.0) == 0.0);
  CHECK(soft_threshold(1.25, 0.0) == 1.25);
  CHECK(soft_threshold(-2.0, 2.0) == 0.0);  // tie maps to zero
  CHECK(soft_threshold(-3.5, 1.0) == -2.5);
  CHECK_THROWS_AS(soft_threshold(1.0, -0.1), std::invalid_argument);
}

TEST_CASE("prox_psi fixes its anchor") {
  auto p = make_psi_problem(6, 6, 21, 0.3);
  const FrameCoeffs out = prox_psi(p.y_th, p.y_th, LambdaWeights{}, p.part, 10.0);
  for (std::size_t b = 0; b < out.band_count(); ++b)
    CHECK(out.bands()[b].coeffs.pixels() == p.y_th.bands()[b].coeffs.pixels());
}

TEST_CASE("prox_psi reduces to plain soft thresholding where the anchor is zero") {
  auto p = make_psi_problem(4, 4, 22, 1e9);  // everything thresholded
  FrameCoeffs x = p.y_th;
  auto& det = x.bands()[0].coeffs.pixels();
  det[0] = 3.0;
  const LambdaWeights w{1.0, 0.5};
  const FrameCoeffs out = prox_psi(x, p.y_th, w, p.part, 1.0);
  CHECK(out.bands()[0].coeffs.pixels()[0] == 2.0);  // lambda0 = 1, gamma = 1
}

TEST_CASE("prox_psi matches the per-coordinate golden-section oracle") {
  auto p = make_psi_problem(4, 4, 23, 0.25);
  const FrameCoeffs x = perturb(p.y_th, 24, 1.5);
  const LambdaWeights w{0.8, 0.35};
  const double gamma = 0.7;
  const FrameCoeffs out = prox_psi(x, p.y_th, w, p.part, gamma);
  int checked = 0;
  for (std::size_t b = 0; b < out.band_count() && checked < 60; ++b) {
    const bool approx = out.bands()[b].is_approx();
    for (std::size_t k = 0; k < 3; ++k, ++checked) {
      const double lam = (approx || p.part.i1[b].empty() || p.part.i1[b][k])
                             ? w.lambda1
                             : w.lambda0;
      const double expect =
          oracles::prox_abs_1d(x.bands()[b].coeffs.pixels()[k],
                               p.y_th.bands()[b].coeffs.pixels()[k], gamma * lam);
      CHECK(out.bands()[b].coeffs.pixels()[k] == Catch::Approx(expect).margin(1e-8));
    }
  }
}

TEST_CASE("prox_psi exact-fit set lands on the anchor bit for bit") {
  auto p = make_psi_problem(5, 5, 25, 0.25);
  const FrameCoeffs x = perturb(p.y_th, 26, 0.4);
  const double gamma = 2.0;
  const LambdaWeights w{1.0, 0.5};
  const FrameCoeffs out = prox_psi(x, p.y_th, w, p.part, gamma);
  std::size_t pinned = 0;
  for (std::size_t b = 0; b < out.band_count(); ++b) {
    const bool approx = out.bands()[b].is_approx();
    const auto& xv = x.bands()[b].coeffs.pixels();
    const auto& yv = p.y_th.bands()[b].coeffs.pixels();
    const auto& ov = out.bands()[b].coeffs.pixels();
    for (std::size_t k = 0; k < xv.size(); ++k) {
      const double lam = (approx || p.part.i1[b][k]) ? w.lambda1 : w.lambda0;
      if (std::abs(xv[k] - yv[k]) <= gamma * lam) {
        CHECK(ov[k] == yv[k]);
        ++pinned;
      }
    }
  }
  CHECK(pinned > 0);
}

TEST_CASE("prox_psi is firmly nonexpansive on random pairs") {
  auto p = make_psi_problem(5, 5, 27, 0.3);
  const LambdaWeights w{};
  for (std::uint64_t s = 0; s < 5; ++s) {
    const FrameCoeffs a = perturb(p.y_th, 100 + s, 1.0);
    const FrameCoeffs b = perturb(p.y_th, 200 + s, 1.0);
    const FrameCoeffs pa = prox_psi(a, p.y_th, w, p.part, 1.3);
    const FrameCoeffs pb = prox_psi(b, p.y_th, w, p.part, 1.3);
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t bb = 0; bb < a.band_count(); ++bb) {
      const auto& av = a.bands()[bb].coeffs.pixels();
      const auto& bv = b.bands()[bb].coeffs.pixels();
      const auto& pav = pa.bands()[bb].coeffs.pixels();
      const auto& pbv = pb.bands()[bb].coeffs.pixels();
      for (std::size_t k = 0; k < av.size(); ++k) {
        const double dp = pav[k] - pbv[k];
        lhs += dp * dp;
        rhs += dp * (av[k] - bv[k]);
      }
    }
    CHECK(lhs <= rhs + 1e-10);
  }
}

TEST_CASE("rprox_psi is the reflection of prox_psi") {
  auto p = make_psi_problem(4, 4, 28, 0.2);
  const FrameCoeffs x = perturb(p.y_th, 29, 0.8);
  const LambdaWeights w{};
  const FrameCoeffs r = rprox_psi(x, p.y_th, w, p.part, 0.9);
  const FrameCoeffs pr = prox_psi(x, p.y_th, w, p.part, 0.9);
  for (std::size_t b = 0; b < r.band_count(); ++b) {
    const auto& rv = r.bands()[b].coeffs.pixels();
    const auto& pv = pr.bands()[b].coeffs.pixels();
    const auto& xv = x.bands()[b].coeffs.pixels();
    for (std::size_t k = 0; k < rv.size(); ++k)
      CHECK(rv[k] == Catch::Approx(2.0 * pv[k] - xv[k]).margin(1e-14));
  }
  // anchor reflects to itself
  const FrameCoeffs ry = rprox_psi(p.y_th, p.y_th, w, p.part, 0.9);
  for (std::size_t b = 0; b < ry.band_count(); ++b)
    CHECK(ry.bands()[b].coeffs.pixels() == p.y_th.bands()[b].coeffs.pixels());
}

TEST_CASE("rprox_psi is nonexpansive on random pairs") {
  auto p = make_psi_problem(5, 4, 30, 0.3);
  for (std::uint64_t s = 0; s < 5; ++s) {
    const FrameCoeffs a = perturb(p.y_th, 300 + s, 1.0);
    const FrameCoeffs b = perturb(p.y_th, 400 + s, 1.0);
    const FrameCoeffs ra = rprox_psi(a, p.y_th, LambdaWeights{}, p.part, 1.1);
    const FrameCoeffs rb = rprox_psi(b, p.y_th, LambdaWeights{}, p.part, 1.1);
    double da = 0.0, dr = 0.0;
    for (std::size_t bb = 0; bb < a.band_count(); ++bb) {
      const auto& av = a.bands()[bb].coeffs.pixels();
      const auto& bv = b.bands()[bb].coeffs.pixels();
      const auto& rav = ra.bands()[bb].coeffs.pixels();
      const auto& rbv = rb.bands()[bb].coeffs.pixels();
      for (std::size_t k = 0; k < av.size(); ++k) {
        da += (av[k] - bv[k]) * (av[k] - bv[k]);
        dr += (rav[k] - rbv[k]) * (rav[k] - rbv[k]);
      }
    }
    CHECK(std::sqrt(dr) <= std::sqrt(da) + 1e-10);
  }
}

TEST_CASE("unit ball projection") {
  VectorField z(1, 2, 0.0);
  z.z1(0, 0) = 3.0;
  z.z2(0, 0) = 4.0;
  z.z1(0, 1) = 0.3;
  z.z2(0, 1) = 0.4;
  const VectorField p = project_unit_ball(z);
  CHECK(p.z1(0, 0) == Catch::Approx(0.6));
  CHECK(p.z2(0, 0) == Catch::Approx(0.8));
  CHECK(p.z1(0, 1) == 0.3);
  CHECK(p.z2(0, 1) == 0.4);
  for (std::size_t k = 0; k < 2; ++k)
    CHECK(std::hypot(p.z1.pixels()[k], p.z2.pixels()[k]) <= 1.0 + 1e-15);
}

TEST_CASE("tv_prox fixes constant images") {
  const Image u(6, 6, 2.5);
  const TvProxResult r = tv_prox(u, 3.0, TvProxConfig{0.24, 50});
  CHECK(norm2(r.w - u) == 0.0);
  CHECK(norm2(r.dual) == 0.0);
}

TEST_CASE("tv_prox at vanishing strength is the identity") {
  const Image u = random_image(8, 8, 31);
  const TvProxResult r = tv_prox(u, 1e-8, TvProxConfig{0.24, 100});
  CHECK(norm_inf(r.w - u) < 1e-6);
}

TEST_CASE("tv_prox matches the subgradient oracle on a 4x4 image") {
  const Image u = random_image(4, 4, 32, 0.0, 1.0);
  const TvProxResult r = tv_prox(u, 0.5, TvProxConfig{0.24, 4000});
  const Image w = oracles::rof_subgradient_oracle(u, 0.5, 1000000);
  CHECK(norm_inf(r.w - w) < 1e-3);
}

TEST_CASE("tv_prox never increases total variation") {
  for (std::uint64_t s = 0; s < 4; ++s) {
    const Image u = random_image(7, 9, 40 + s);
    const TvProxResult r = tv_prox(u, 0.3 + 0.2 * double(s), TvProxConfig{0.24, 300});
    CHECK(tv_norm(r.w) <= tv_norm(u) + 1e-8);
  }
}

TEST_CASE("tv_prox satisfies an objective certificate against perturbations") {
  const Image u = random_image(6, 6, 50);
  const double s = 0.4;
  const TvProxResult r = tv_prox(u, s, TvProxConfig{0.24, 3000});
  const double base = oracles::rof_objective(u, r.w, s);
  Rng rng(51);
  for (int trial = 0; trial < 100; ++trial) {
    Image w2 = r.w;
    const double amp = trial < 50 ? 1e-3 : 1e-2;
    for (double& v : w2.pixels()) v += amp * (2.0 * rng.uniform() - 1.0);
    CHECK(base <= oracles::rof_objective(u, w2, s) + 1e-6);
  }
}

TEST_CASE("tv_prox dual iterates stay in the unit ball") {
  const Image u = random_image(8, 8, 60);
  for (int iters : {1, 5, 50, 400}) {
    const TvProxResult r = tv_prox(u, 1.0, TvProxConfig{0.24, iters});
    for (std::size_t k = 0; k < r.dual.z1.size(); ++k)
      CHECK(std::hypot(r.dual.z1.pixels()[k], r.dual.z2.pixels()[k]) <= 1.0 + 1e-12);
  }
}

TEST_CASE("tv_prox config validation") {
  const Image u(4, 4, 1.0);
  CHECK_THROWS_AS(tv_prox(u, 1.0, TvProxConfig{0.25, 10}), std::invalid_argument);
  CHECK_THROWS_AS(tv_prox(u, 1.0, TvProxConfig{-0.1, 10}), std::invalid_argument);
  CHECK_THROWS_AS(tv_prox(u, 0.0, TvProxConfig{0.24, 10}), std::invalid_argument);
}

TEST_CASE("prox_phi fixes coefficients of constant images") {
  TightFrame frame(2);
  const FrameCoeffs x = frame.analyze(Image(8, 8, 3.0));
  const FrameCoeffs out = prox_phi(x, frame, 10.0, TvProxConfig{0.24, 60});
  for (std::size_t b = 0; b < x.band_count(); ++b)
    CHECK(norm_inf(out.bands()[b].coeffs - x.bands()[b].coeffs) == 0.0);
}

TEST_CASE("prox_phi tends to the identity as gamma vanishes") {
  TightFrame frame(1);
  const FrameCoeffs x = frame.analyze(random_image(8, 8, 70));
  const FrameCoeffs out = prox_phi(x, frame, 1e-9, TvProxConfig{0.24, 100});
  for (std::size_t b = 0; b < x.band_count(); ++b)
    CHECK(norm_inf(out.bands()[b].coeffs - x.bands()[b].coeffs) < 1e-6);
}

TEST_CASE("prox_phi is consistent with tv_prox through synthesis") {
  TightFrame frame(2);
  const Image u = random_image(10, 10, 71);
  const FrameCoeffs x = frame.analyze(u);
  const double gamma = 2.0;
  const TvProxConfig cfg{0.24, 400};
  const FrameCoeffs px = prox_phi(x, frame, gamma, cfg);
  const Image lhs = frame.synthesize(px);
  // W~ (x - W P_C(W~x)) = W~x - P_C(W~x) = prox of the TV at gamma/c
  const Image ux = frame.synthesize(x);
  const TvProxResult direct = tv_prox(ux, gamma / frame.frame_constant(), cfg);
  CHECK(norm_inf(lhs - direct.w) < 1e-10);
}

TEST_CASE("rprox_phi is the reflection of prox_phi") {
  TightFrame frame(1);
  const FrameCoeffs x = frame.analyze(random_image(6, 6, 72));
  const TvProxConfig cfg{0.24, 120};
  const FrameCoeffs p = prox_phi(x, frame, 1.5, cfg);
  const FrameCoeffs r = rprox_phi(x, frame, 1.5, cfg);
  for (std::size_t b = 0; b < x.band_count(); ++b) {
    const auto& pv = p.bands()[b].coeffs.pixels();
    const auto& rv = r.bands()[b].coeffs.pixels();
    const auto& xv = x.bands()[b].coeffs.pixels();
    for (std::size_t k = 0; k < pv.size(); ++k)
      CHECK(rv[k] == Catch::Approx(2.0 * pv[k] - xv[k]).margin(1e-12));
  }
}

TEST_CASE("rprox_phi fixes coefficients of constants and is nonexpansive") {
  TightFrame frame(1);
  const FrameCoeffs xc = frame.analyze(Image(6, 6, 1.5));
  const FrameCoeffs rc = rprox_phi(xc, frame, 3.0, TvProxConfig{0.24, 50});
  for (std::size_t b = 0; b < xc.band_count(); ++b)
    CHECK(norm_inf(rc.bands()[b].coeffs - xc.bands()[b].coeffs) == 0.0);

  const TvProxConfig cfg{0.24, 800};
  for (std::uint64_t s = 0; s < 3; ++s) {
    const FrameCoeffs a = frame.analyze(random_image(6, 6, 80 + s));
    const FrameCoeffs b = frame.analyze(random_image(6, 6, 90 + s));
    const FrameCoeffs ra = rprox_phi(a, frame, 1.0, cfg);
    const FrameCoeffs rb = rprox_phi(b, frame, 1.0, cfg);
    double da = 0.0, dr = 0.0;
    for (std::size_t bb = 0; bb < a.band_count(); ++bb) {
      da += inner(a.bands()[bb].coeffs - b.bands()[bb].coeffs,
                  a.bands()[bb].coeffs - b.bands()[bb].coeffs);
      dr += inner(ra.bands()[bb].coeffs - rb.bands()[bb].coeffs,
                  ra.bands()[bb].coeffs - rb.bands()[bb].coeffs);
    }
    CHECK(std::sqrt(dr) <= std::sqrt(da) + 1e-6);
  }
}

TEST_CASE("moreau residual vanishes for constants and shrinks with iterations") {
  CHECK(moreau_check(Image(8, 8, 2.0), 1.0, TvProxConfig{0.24, 100}) == 0.0);

  const Image u = random_image(8, 8, 95);
  const double r2000 = moreau_check(u, 1.0, TvProxConfig{0.24, 2000});
  CHECK(r2000 <= 1e-6);

  double prev = 1e9;
  int improved = 0;
  for (int n : {25, 100, 400, 1600}) {
    const double r = moreau_check(u, 1.0, TvProxConfig{0.24, n});
    if (r <= prev) ++improved;
    prev = r;
  }
  CHECK(improved >= 3);
}
