#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "battery.hpp"
#include "mft/dynamics.hpp"

using namespace mft;
using std::numbers::pi;

namespace {

const Params kP{0.2, 0.8, 1.0, 1.0};

Path zero_control(const Grid& g, const std::vector<double>& times) {
    return Path(g, times, std::vector<Profile>(times.size(), Profile(g)));
}

// Smooth random densities kept well inside (0,1).
std::vector<DensityProfile> random_densities(const Grid& g, int count, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<DensityProfile> out;
    for (int k = 0; k < count; ++k) {
        const double c = 0.5 + 0.2 * u(rng), a1 = 0.15 * u(rng), a2 = 0.1 * u(rng), w = 1 + 3 * std::abs(u(rng));
        out.push_back(DensityProfile::from_function(
            g, [&](double x) { return c + a1 * std::sin(w * pi * x) + a2 * std::cos(2 * pi * x + w); }));
    }
    return out;
}

std::vector<DensityProfile> relaxation_batch(const Grid& g) {
    std::vector<DensityProfile> out;
    for (const char* name : {"const_half", "ramp_down", "bump_sine", "bump_gauss", "step_up", "step_double"}) {
        for (const auto& c : bench::battery()) {
            if (c.name == name) out.push_back(bench::sample(c, g));
        }
    }
    return out;
}

}  // namespace

TEST(HeatRobin, StationaryIsFixed) {
    const Grid g = make_grid(400);
    const auto rho = stationary_profile(kP, g);
    const auto sol = solve_heat_robin(rho, kP, {0.0, 0.01, 0.1, 1.0});
    EXPECT_EQ(sol.method, HeatMethod::spectral);
    for (const auto& f : sol.path.frames) EXPECT_LT(sup_distance(f, rho), 1e-12);
}

TEST(HeatRobin, SpectralDecayRate) {
    const Grid g = make_grid(400);
    const auto gam = DensityProfile::from_function(g, [](double x) { return 0.5 + 0.2 * std::sin(pi * x); });
    const double lam1 = eigenvalues(kP, 1)[0];
    const double T = std::log(1e6) / lam1 * 1.5;
    const auto sol = solve_heat_robin(gam, kP, {0.0, T});
    EXPECT_LT(sup_distance(sol.path.frames.back(), stationary_profile(kP, g)), 1e-6);
    const auto late = solve_heat_robin(gam, kP, {0.0, 2.0, 3.0}).path;
    const auto rho = stationary_profile(kP, g);
    const double ratio = sup_distance(late.frames[2], rho) / sup_distance(late.frames[1], rho);
    EXPECT_NEAR(std::log(ratio), -lam1, 1e-3);
}

TEST(HeatRobin, MaximumPrincipleMollifiedIndicator) {
    const Grid g = make_grid(400);
    const auto gam = DensityProfile::from_function(
        g, [](double x) { return 0.05 + 0.9 * (bench::smooth_step(x, 0.4, 0.02) - bench::smooth_step(x, 0.6, 0.02)); });
    const double lo = std::min(kP.alpha, gam.min()), hi = std::max(kP.beta, gam.max());
    const auto sol = solve_heat_robin(gam, kP, {0.0, 1e-3, 1e-2, 0.05, 0.2, 1.0});
    for (const auto& f : sol.path.frames) {
        EXPECT_GE(f.min(), lo - 1e-8);
        EXPECT_LE(f.max(), hi + 1e-8);
    }
}

TEST(HeatRobin, MaximumPrincipleRandomized) {
    const Grid g = make_grid(400);
    const std::vector<double> times{0.0, 1e-3, 1e-2, 0.05, 0.2, 1.0};
    for (const auto& gam : random_densities(g, 20, 41)) {
        const double lo = std::min(kP.alpha, gam.min()), hi = std::max(kP.beta, gam.max());
        for (const auto& f : solve_heat_robin(gam, kP, times).path.frames) {
            EXPECT_GE(f.min(), lo - 1e-8);
            EXPECT_LE(f.max(), hi + 1e-8);
        }
        const auto phi = gam - stationary_profile(kP, g);
        for (const auto& f : solve_heat_homogeneous(phi, kP, times).frames) {
            EXPECT_GE(f.min(), std::min(0.0, phi.min()) - 1e-8);
            EXPECT_LE(f.max(), std::max(0.0, phi.max()) + 1e-8);
        }
    }
}

TEST(HeatRobin, ContinuousDependence) {
    const Grid g = make_grid(400);
    const std::vector<double> times{0.0, 0.05, 0.1, 0.5};
    const auto ref = DensityProfile::from_function(g, [](double x) { return x < 0.5 ? 0.2 : 0.8; });
    const auto uref = solve_heat_robin(ref, kP, times).path;
    double prev = INFINITY;
    for (double w : {0.1, 0.05, 0.02, 0.01, 0.005}) {
        const auto gw = DensityProfile::from_function(g, [w](double x) { return 0.2 + 0.6 * bench::smooth_step(x, 0.5, w); });
        const auto u = solve_heat_robin(gw, kP, times).path;
        double d = 0.0;
        for (std::size_t k = 1; k < times.size(); ++k) d = std::max(d, sup_distance(u.frames[k], uref.frames[k]));
        EXPECT_LT(d, prev);
        prev = d;
    }
    EXPECT_LT(prev, 1e-3);
}

TEST(HeatHomogeneous, Examples) {
    const Grid g = make_grid(400);
    const std::vector<double> times{0.0, 0.01, 0.1, 1.0};
    for (const auto& f : solve_heat_homogeneous(Profile(g), kP, times).frames) EXPECT_EQ(norm(f, NormKind::Linf), 0.0);
    const SpectralBasis b(kP, g, 60);
    for (int j : {0, 3, 20}) {
        const auto path = solve_heat_homogeneous(b.eigenfunction(j), kP, times);
        for (std::size_t k = 0; k < times.size(); ++k) {
            const double e = std::exp(-b.eigenvalues()[static_cast<std::size_t>(j)] * times[k]);
            EXPECT_LT(sup_distance(path.frames[k], b.eigenfunction(j) * e), 1e-10);
        }
    }
    const double bnd = 0.3;
    const Profile phi = Profile::from_function(g, [bnd](double x) { return bnd * std::sin(pi * x); });
    const auto path = solve_heat_homogeneous(phi, kP, {0.0, 0.01, 0.1, 1.0});
    for (std::size_t k = 1; k < path.size(); ++k) EXPECT_LT(path.frames[k].max(), bnd - 1e-3);
}

TEST(Wasep, ZeroControlMatchesSpectral) {
    const Grid g = make_grid(400);
    const std::vector<double> times{0.0, 0.01, 0.05, 0.1};
    const auto gam = DensityProfile::from_function(g, [](double x) { return 0.5 + 0.2 * std::sin(pi * x); });
    const auto fd = solve_heat_robin(gam, kP, times, 60, HeatMethod::finite_difference);
    const auto sp = solve_heat_robin(gam, kP, times, 60);
    ASSERT_EQ(fd.path.size(), sp.path.size());
    for (std::size_t k = 0; k < times.size(); ++k) {
        EXPECT_DOUBLE_EQ(fd.path.times[k], times[k]);
        EXPECT_LT(sup_distance(fd.path.frames[k], sp.path.frames[k]), 1e-3) << "t=" << times[k];
    }
}

TEST(Wasep, MaximumPrincipleRandomized) {
    const Grid g = make_grid(100);
    const std::vector<double> times{0.0, 0.01, 0.05, 0.2};
    for (const auto& gam : random_densities(g, 20, 43)) {
        const double lo = std::min(kP.alpha, gam.min()), hi = std::max(kP.beta, gam.max());
        for (const auto& f : solve_wasep(gam, zero_control(g, times), kP, 0.2, 0.25 * g.h() * g.h()).frames) {
            EXPECT_GE(f.min(), lo - 1e-8);
            EXPECT_LE(f.max(), hi + 1e-8);
        }
    }
}

TEST(Wasep, MassFluxConsistency) {
    const Grid g = make_grid(400);
    const double dt = 0.25 * g.h() * g.h(), t = 0.05, d = 1e-3;
    const std::vector<double> times{0.0, t - d, t, t + d};
    const auto gam = DensityProfile::from_function(g, [](double x) { return 0.5 + 0.2 * std::sin(pi * x); });
    const auto u = solve_wasep(gam, zero_control(g, times), kP, t + d, dt);
    const double dmass = (integrate(u.frames[3]) - integrate(u.frames[1])) / (2 * d);
    const auto& m = u.frames[2];
    const double flux = (kP.beta - m.back()) / kP.B - (m.front() - kP.alpha) / kP.A;
    EXPECT_NEAR(dmass, flux, 1e-3);
}

TEST(Wasep, WeakFormResidual) {
    const Grid g = make_grid(200);
    const double T = 0.1;
    std::vector<double> times;
    for (int k = 0; k <= 50; ++k) times.push_back(T * k / 50.0);
    auto field = [&](auto fn) {
        std::vector<Profile> fr;
        for (double t : times) fr.push_back(Profile::from_function(g, [&](double x) { return fn(t, x); }));
        return Path(g, times, std::move(fr));
    };
    const Path H = field([](double t, double x) { return 0.3 * std::sin(pi * x) * (1 + t) + 0.1 * x; });
    const auto gam = DensityProfile::from_function(g, [](double x) { return 0.4 + 0.2 * std::cos(pi * x); });
    const Path u = solve_wasep(gam, H, kP, T, 0.25 * g.h() * g.h());
    ASSERT_EQ(u.size(), times.size());
    struct TestFn {
        std::function<double(double, double)> G, Gt;
    };
    const std::vector<TestFn> basket{
        {[](double, double) { return 1.0; }, [](double, double) { return 0.0; }},
        {[](double, double x) { return x; }, [](double, double) { return 0.0; }},
        {[](double t, double x) { return std::cos(pi * x) * std::exp(-t); }, [](double t, double x) { return -std::cos(pi * x) * std::exp(-t); }},
        {[](double t, double x) { return x * x * t; }, [](double, double x) { return x * x; }},
        {[](double t, double x) { return std::sin(2 * pi * x) + t; }, [](double, double) { return 1.0; }},
    };
    for (const auto& tf : basket) {
        const double r = weak_form_residual(u, H, field(tf.G), field(tf.Gt), kP);
        EXPECT_LT(std::abs(r), 1e-3);
    }
}

TEST(Wasep, Errors) {
    const Grid g = make_grid(50);
    const auto gam = stationary_profile(kP, g);
    EXPECT_THROW(solve_wasep(gam, zero_control(g, {0.0, 0.1}), kP, 0.1, g.h() * g.h()), ValidationError);
    EXPECT_THROW(solve_wasep(gam, zero_control(make_grid(40), {0.0, 0.1}), kP, 0.1, 1e-5), ValidationError);
}

TEST(Adjoint, StationaryIsFixed) {
    const Grid g = make_grid(400);
    const auto rho = stationary_profile(kP, g);
    const auto sol = adjoint_path(rho, kP, 1.0, {0.0, 0.1, 1.0});
    for (std::size_t k = 0; k < sol.v_path.size(); ++k) {
        EXPECT_LT(sup_distance(sol.v_path.frames[k], rho), 1e-10);
        EXPECT_LT(sup_distance(sol.F_path.frames[k], rho), 1e-12);
    }
}

TEST(Adjoint, StartsAtGammaAndFollowsHeatFlow) {
    const Grid g = make_grid(400);
    const auto sb = slope_bounds(kP);
    for (const auto& gam : relaxation_batch(g)) {
        const AdjointEvaluator ev(gam, kP);
        const std::vector<double> times{0.0, 0.01, 0.1, 0.5};
        const auto sol = adjoint_path(ev, times);
        EXPECT_LT(sup_distance(sol.v_path.frames[0], gam), 1e-10);
        const auto heat = heat_path(ev.el().F, ev.basis(), times);
        for (std::size_t k = 0; k < times.size(); ++k) {
            const auto& F = sol.F_path.frames[k];
            EXPECT_LT(sup_distance(F, heat.frames[k]), 1e-12);
            EXPECT_GE(F.min(), kP.alpha + kP.A * sb.p - 1e-9);
            EXPECT_LE(F.max(), kP.beta - kP.B * sb.p + 1e-9);
            if (k > 0) {
                const auto re = solve_el(DensityProfile::clamped(sol.v_path.frames[k], 1e-8), kP).F;
                EXPECT_LT(sup_distance(re, F), 1e-3) << "t=" << times[k];
            }
        }
        EXPECT_GT(sol.v_min, 0.0);
        EXPECT_LT(sol.v_max, 1.0);
    }
}

TEST(Adjoint, BoundaryResidual) {
    const Grid g = make_grid(400);
    for (const auto& gam : relaxation_batch(g)) {
        const AdjointEvaluator ev(gam, kP);
        for (double t : {0.02, 0.1, 0.5}) {
            const auto fr = ev.frame(t);
            const auto [r0, r1] = adjoint_boundary_residual(fr.v, fr.F, kP);
            EXPECT_LT(std::abs(r0), 1e-3) << "t=" << t;
            EXPECT_LT(std::abs(r1), 1e-3) << "t=" << t;
        }
    }
}

TEST(Adjoint, UniformRelaxation) {
    const Grid g = make_grid(400);
    std::vector<std::unique_ptr<AdjointEvaluator>> evs;
    for (const auto& gam : relaxation_batch(g)) evs.push_back(std::make_unique<AdjointEvaluator>(gam, kP));
    auto worst = [&](double t) {
        double w = 0.0;
        for (const auto& ev : evs) w = std::max(w, sup_distance(ev->frame(t).v, ev->rho()));
        return w;
    };
    std::optional<double> T1;
    for (int k = 1; k <= 1000 && !T1; ++k) {
        if (worst(0.01 * k) < 1e-3) T1 = 0.01 * k;
    }
    ASSERT_TRUE(T1.has_value());
    for (const auto& ev : evs) {
        double prev = INFINITY;
        for (double t = 0.5; t <= *T1 + 0.5; t += 0.05) {
            const double d = sup_distance(ev->frame(t).v, ev->rho());
            if (prev > 1e-13) {
                EXPECT_LT(d, prev);
            } else {
                EXPECT_LE(d, 1e-13);  // relaxed to rounding
            }
            prev = d;
        }
        const auto own = relaxation_time(*ev, 1e-3, 10.0);
        ASSERT_TRUE(own.has_value());
        EXPECT_LE(*own, *T1 + 1e-12);
    }
}

TEST(Adjoint, GeometricTimes) {
    const auto ts = geometric_times(2.0, 100);
    ASSERT_EQ(ts.size(), 101u);
    EXPECT_EQ(ts.front(), 0.0);
    EXPECT_DOUBLE_EQ(ts[1], 1e-7);
    EXPECT_EQ(ts.back(), 2.0);
    for (std::size_t k = 1; k < ts.size(); ++k) EXPECT_GT(ts[k], ts[k - 1]);
}

TEST(EffectiveBoundary, Examples) {
    const Grid g = make_grid(2000);
    const Profile half = Profile::from_function(g, [](double x) { return 0.5 + 0.1 * x; });
    const auto e = effective_boundary(half, kP);
    EXPECT_DOUBLE_EQ(e.A_star, kP.A);
    EXPECT_DOUBLE_EQ(e.alpha_star, 1 - kP.alpha);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.01, 0.99);
    for (int k = 0; k < 100; ++k) {
        const double a = u(rng), b = u(rng);
        const auto r = effective_boundary(Profile::from_function(g, [&](double x) { return a + (b - a) * x; }), kP);
        EXPECT_GT(r.alpha_star, 0.0);
        EXPECT_LT(r.alpha_star, 1.0);
        EXPECT_GT(r.beta_star, 0.0);
        EXPECT_LT(r.beta_star, 1.0);
        EXPECT_GT(r.A_star, 0.0);
        EXPECT_GT(r.B_star, 0.0);
    }
    // rho_bar with R = logit(rho_bar): constant interior flux and matching boundary fluxes.
    const auto rho = stationary_profile(kP, g);
    const auto [r0, r1] = adjoint_boundary_residual(rho, rho, kP);
    EXPECT_LT(std::abs(r0), 1e-6);
    EXPECT_LT(std::abs(r1), 1e-6);
    const Profile drift = drift_field(rho);
    double spread = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double j = derivative(rho)[i] - 2 * sigma(rho[i]) * drift[i];
        spread = std::max(spread, std::abs(j + stationary_slope(kP)));
    }
    EXPECT_LT(spread, 1e-6);
    EXPECT_THROW(effective_boundary(Profile::constant(g, 1.0), kP), ValidationError);
}

TEST(DriftField, Examples) {
    const Grid g = make_grid(200);
    const auto rho = stationary_profile(kP, g);
    const Profile d = drift_field(rho);
    for (std::size_t i = 0; i < d.size(); ++i) {
        EXPECT_NEAR(d[i], stationary_slope(kP) / sigma(rho[i]), 1e-12);
        EXPECT_GT(d[i], 0.0);
    }
    EXPECT_THROW(drift_field(Profile::constant(g, 0.5)), ValidationError);
}
