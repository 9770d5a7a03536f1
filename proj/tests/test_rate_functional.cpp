#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "mft/rate_functional.hpp"

using namespace mft;
using std::numbers::pi;

namespace {

const Params kP{0.2, 0.8, 1.0, 1.0};

template <class Fn>
Path field(const Grid& g, const std::vector<double>& times, Fn fn) {
    std::vector<Profile> fr;
    for (double t : times) fr.push_back(Profile::from_function(g, [&](double x) { return fn(t, x); }));
    return Path(g, times, std::move(fr));
}

std::vector<double> uniform_times(double T, int steps) {
    std::vector<double> ts;
    for (int k = 0; k <= steps; ++k) ts.push_back(T * k / steps);
    return ts;
}

// Slopes: centred inside, second-order one-sided at the ends; same for time on a uniform mesh.
double slope(const std::vector<double>& f, std::size_t i, double h) {
    const std::size_t m = f.size();
    if (i == 0) return (-3 * f[0] + 4 * f[1] - f[2]) / (2 * h);
    if (i + 1 == m) return (3 * f[m - 1] - 4 * f[m - 2] + f[m - 3]) / (2 * h);
    return (f[i + 1] - f[i - 1]) / (2 * h);
}

double trap(const std::vector<double>& f, double h) {
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += (i == 0 || i + 1 == f.size() ? 0.5 : 1.0) * f[i];
    return s * h;
}

double b_cost(double r, double D, double a, double M) {
    return ((1 - a) * r * (std::exp(M) - 1) + a * (1 - r) * (std::exp(-M) - 1)) / D;
}

// Direct transcription of the five groups of terms on a uniform time mesh.
double j_oracle(const Path& u, const Path& H, const Params& p) {
    const std::size_t nt = u.size(), m = u.grid.size();
    const double h = u.grid.h(), dt = u.times[1] - u.times[0];
    auto col = [&](const Path& P, std::size_t i) {
        std::vector<double> c(nt);
        for (std::size_t k = 0; k < nt; ++k) c[k] = P.frames[k][i];
        return c;
    };
    std::vector<std::vector<double>> Ht(nt, std::vector<double>(m));
    for (std::size_t i = 0; i < m; ++i) {
        const auto c = col(H, i);
        for (std::size_t k = 0; k < nt; ++k) Ht[k][i] = slope(c, k, dt);
    }
    std::vector<double> per(nt);
    for (std::size_t k = 0; k < nt; ++k) {
        const auto& uk = u.frames[k].values();
        const auto& hk = H.frames[k].values();
        std::vector<double> a(m);
        for (std::size_t i = 0; i < m; ++i) {
            const double du = slope(uk, i, h), dh = slope(hk, i, h);
            a[i] = -uk[i] * Ht[k][i] + du * dh - uk[i] * (1 - uk[i]) * dh * dh;
        }
        per[k] = trap(a, h) - b_cost(p.alpha, p.A, uk.front(), hk.front()) - b_cost(p.beta, p.B, uk.back(), hk.back());
    }
    std::vector<double> end(m), start(m);
    for (std::size_t i = 0; i < m; ++i) {
        end[i] = u.frames.back()[i] * H.frames.back()[i];
        start[i] = u.frames.front()[i] * H.frames.front()[i];
    }
    return trap(end, h) - trap(start, h) + trap(per, dt);
}

}  // namespace

TEST(JFunctional, ZeroControl) {
    const Grid g = make_grid(50);
    const auto ts = uniform_times(0.2, 10);
    const Path u = field(g, ts, [](double t, double x) { return 0.3 + 0.2 * x + 0.1 * t * std::sin(pi * x); });
    EXPECT_EQ(j_functional(u, field(g, ts, [](double, double) { return 0.0; }), kP), 0.0);
}

TEST(JFunctional, MatchesDirectQuadrature) {
    const Grid g = make_grid(20);
    const auto ts = uniform_times(0.4, 4);
    const Path u = field(g, ts, [](double t, double x) { return 0.3 + 0.3 * x + 0.1 * std::sin(pi * x + t); });
    const Path H = field(g, ts, [](double t, double x) { return 0.5 * std::cos(2 * x) * (1 + t) - 0.2 * x * t; });
    EXPECT_NEAR(j_functional(u, H, kP), j_oracle(u, H, kP), 1e-10);
    const auto terms = j_terms(u, H, kP);
    EXPECT_DOUBLE_EQ(terms.total(), terms.endpoints + terms.time_derivative + terms.gradient + terms.mobility + terms.reservoirs);
    EXPECT_THROW(j_functional(u, field(make_grid(10), ts, [](double, double) { return 0.0; }), kP), ValidationError);
}

TEST(JFunctional, VanishesOnHydrodynamicPaths) {
    const Grid g = make_grid(200);
    const auto ts = uniform_times(0.2, 200);
    const auto gam = DensityProfile::from_function(g, [](double x) { return 0.5 + 0.2 * std::sin(pi * x); });
    const Path u = solve_heat_robin(gam, kP, ts).path;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> r(-1.0, 1.0);
    double best = j_functional(u, field(g, ts, [](double, double) { return 0.0; }), kP);
    EXPECT_EQ(best, 0.0);
    for (int k = 0; k < 20; ++k) {
        const double a = r(rng), b = r(rng), c = r(rng), w = 1 + 3 * std::abs(r(rng));
        const Path H = field(g, ts, [&](double t, double x) { return a * std::cos(w * x) + b * x * (1 + t) + c * t; });
        const double j = j_functional(u, H, kP);
        EXPECT_LE(j, 1e-3);
        best = std::max(best, j);
    }
    EXPECT_NEAR(best, 0.0, 1e-3);
}

TEST(RateFromControl, ZeroControl) {
    const Grid g = make_grid(100);
    const auto ts = uniform_times(0.1, 10);
    const auto u = solve_heat_robin(stationary_profile(kP, g), kP, ts).path;
    const auto r = rate_from_control(u, field(g, ts, [](double, double) { return 0.0; }), kP);
    EXPECT_EQ(r.total, 0.0);
    EXPECT_EQ(r.bulk, 0.0);
    EXPECT_LT(r.control_residual, 1e-8);
    EXPECT_TRUE(r.warnings.empty());
    const auto wrong = rate_from_control(u, field(g, ts, [](double, double x) { return std::sin(pi * x); }), kP);
    EXPECT_GT(wrong.control_residual, 1e-2);
    EXPECT_FALSE(wrong.warnings.empty());
}

TEST(RateFromControl, ReversedAdjointAndDominance) {
    const Grid g = make_grid(400);
    const auto gam = DensityProfile::from_function(g, [](double x) { return 0.5 + 0.2 * std::sin(pi * x); });
    const AdjointEvaluator ev(gam, kP);
    const double T = 1.0;
    const auto adj = adjoint_path(ev, geometric_times(T, 1500));
    const Path u = reverse_path(adj.v_path);
    const Path H = reverse_path(adjoint_control(adj));
    const auto r = rate_from_control(u, H, kP);
    EXPECT_GE(r.bulk, -1e-12);
    EXPECT_GE(r.left, -1e-12);
    EXPECT_GE(r.right, -1e-12);
    EXPECT_DOUBLE_EQ(r.total, r.bulk + r.left + r.right);
    const auto vT = DensityProfile::clamped(adj.v_path.frames.back(), 1e-12);
    const double drop = s0(gam, kP).s0_gamma - s0(vT, kP).s0_gamma;
    EXPECT_LT(std::abs(r.total - drop), 0.02 * std::abs(drop));
    EXPECT_TRUE(r.warnings.empty()) << r.warnings.front();

    // Additivity across a split at an interior frame.
    const std::size_t cut = u.size() / 2;
    auto slice = [&](const Path& p, std::size_t a, std::size_t b) {
        std::vector<double> t(p.times.begin() + static_cast<long>(a), p.times.begin() + static_cast<long>(b));
        std::vector<Profile> f(p.frames.begin() + static_cast<long>(a), p.frames.begin() + static_cast<long>(b));
        return Path(p.grid, std::move(t), std::move(f));
    };
    const double first = rate_from_control(slice(u, 0, cut + 1), slice(H, 0, cut + 1), kP).total;
    const double second = rate_from_control(slice(u, cut, u.size()), slice(H, cut, u.size()), kP).total;
    EXPECT_LE(r.total, first + second + 1e-6);

    // The explicit rate dominates J for every control in a small basket.
    for (double s : {0.5, 1.0, 1.5}) {
        std::vector<Profile> fr;
        for (const auto& f : H.frames) fr.push_back(f * s);
        EXPECT_GE(r.total, j_functional(u, Path(g, H.times, std::move(fr)), kP) - 1e-3) << "scale " << s;
    }
    const Path other = field(g, u.times, [](double t, double x) { return 0.2 * std::sin(pi * x) * (1 + t); });
    EXPECT_GE(r.total, j_functional(u, other, kP) - 1e-3);
}

TEST(Energy, Examples) {
    const Grid g = make_grid(400);
    const auto ts = uniform_times(2.0, 4);
    EXPECT_EQ(energy(field(g, ts, [](double, double) { return 0.5; })), 0.0);
    const double s = stationary_slope(kP);
    const Path rho = field(g, ts, [&](double, double x) { return stationary_value(kP, x); });
    const double want = 2.0 * 0.5 * s * (logit(stationary_value(kP, 1.0)) - logit(stationary_value(kP, 0.0)));
    EXPECT_NEAR(energy(rho), want, 1e-6);
    EXPECT_TRUE(std::isinf(energy(field(g, ts, [](double, double x) { return x; }))));
}

TEST(ConnectingPath, StationaryHasZeroCost) {
    const Grid g = make_grid(200);
    const SpectralBasis b(kP, g, 40);
    const auto cp = connecting_path(stationary_profile(kP, g), kP, b, 50);
    for (const auto& f : cp.path.frames) EXPECT_LT(sup_distance(f, stationary_profile(kP, g)), 1e-14);
    EXPECT_NEAR(cp.cost, 0.0, 1e-12);
}

TEST(ConnectingPath, EndpointsBoundAndScaling) {
    const Grid g = make_grid(200);
    const SpectralBasis b(kP, g, 40);
    const auto rho = stationary_profile(kP, g);
    const auto cc = connecting_constants(kP, b.eigenvalues()[0]);
    // Robin-compatible deviation from a few modes, scaled to unit sup norm.
    const std::vector<double> c{1.0, -0.5, 0.25};
    const Profile shape = b.synthesize(c) * (1.0 / norm(b.synthesize(c), NormKind::Linf));
    auto target = [&](double amp) { return DensityProfile(rho + shape * amp); };
    const double amp = 0.4 * cc.threshold;
    const auto cp = connecting_path(target(amp), kP, b, 200);
    EXPECT_EQ(cp.path.frames.front().values(), rho.values());
    EXPECT_LT(sup_distance(cp.path.frames.back(), target(amp)), 1e-8);
    EXPECT_TRUE(cp.hypothesis_satisfied);
    EXPECT_GT(cp.cost, 0.0);
    EXPECT_LE(cp.cost, cp.bound);
    EXPECT_LE(cp.basket_lower, cp.cost * (1 + 1e-3) + 1e-9);
    for (std::size_t k = 1; k + 1 < cp.path.size(); ++k) {
        const auto& w = cp.path.frames[k];
        const Profile d = derivative(w);
        EXPECT_NEAR(d.front(), (w.front() - kP.alpha) / kP.A, 1e-3);
        EXPECT_NEAR(d.back(), (kP.beta - w.back()) / kP.B, 1e-3);
    }
    const auto half = connecting_path(target(0.5 * amp), kP, b, 200);
    EXPECT_NEAR(half.cost / cp.cost, 0.25, 0.25 * 0.2);
    EXPECT_THROW(connecting_path(target(2.0 * cc.threshold), kP, b, 50), ValidationError);
}

TEST(VerifyVS, StationaryIsFree) {
    const Grid g = make_grid(200);
    VsOptions opt;
    opt.basket = false;
    const auto r = verify_v_equals_s(stationary_profile(kP, g), kP, 1e-3, opt);
    EXPECT_NEAR(r.S, 0.0, 1e-10);
    EXPECT_LT(r.upper, 1e-4);
}

TEST(VerifyVS, SineBumpClosesAndGapShrinks) {
    const Grid g = make_grid(400);
    const auto gam = DensityProfile::from_function(g, [](double x) { return 0.5 + 0.2 * std::sin(pi * x); });
    VsOptions opt;
    opt.basket = false;
    double prev = INFINITY;
    for (double eps : {1e-1, 1e-2, 1e-3}) {
        const auto r = verify_v_equals_s(gam, kP, eps, opt);
        EXPECT_GT(r.S, 0.0);
        EXPECT_LT(std::abs(r.gap), prev) << "eps " << eps;
        prev = std::abs(r.gap);
        EXPECT_LT(r.relax_distance, eps);
        EXPECT_LT(std::abs(r.adjoint_rate.total - r.s0_drop), 0.02 * std::abs(r.s0_drop));
        if (eps == 1e-3) {
            EXPECT_LT(std::abs(r.relative_gap), 0.02);
            EXPECT_TRUE(r.hypothesis_satisfied);
        }
    }
    EXPECT_THROW(verify_v_equals_s(gam, kP, 0.0, opt), ValidationError);
}
