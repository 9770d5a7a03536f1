#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "mft/dynamics.hpp"
#include "mft/numerics.hpp"
#include "mft/quasipotential.hpp"
#include "mft/robin_spectral.hpp"

namespace mft {

/// The five groups of terms of the dynamical functional J_{T,H}(u).
struct JTerms {
    double endpoints = 0.0;        // <u_T,H_T> - <u_0,H_0>
    double time_derivative = 0.0;  // -int <u, dH/dt>
    double gradient = 0.0;         // +int <u', H'>
    double mobility = 0.0;         // -int <sigma(u), H'^2>
    double reservoirs = 0.0;       // -int (b_left + b_right)
    double total() const noexcept { return endpoints + time_derivative + gradient + mobility + reservoirs; }
};

inline JTerms j_terms(const Path& u, const Path& H, const Params& prm) {
    require_same_layout(u, H);
    if (u.size() < 2) throw ValidationError("j_functional: need at least 2 frames");
    const double h = u.grid.h();
    const Path dH = time_derivative(H);
    const std::size_t nt = u.size();
    std::vector<double> td(nt), gr(nt), mo(nt), rs(nt);
    for (std::size_t k = 0; k < nt; ++k) {
        const auto& uk = u.frames[k];
        const auto& Hk = H.frames[k];
        const auto du = derivative(uk.values(), h);
        const auto dx = derivative(Hk.values(), h);
        std::vector<double> a(du.size()), b(du.size());
        for (std::size_t i = 0; i < du.size(); ++i) {
            a[i] = du[i] * dx[i];
            b[i] = sigma(uk[i]) * dx[i] * dx[i];
        }
        td[k] = inner_product(uk, dH.frames[k]);
        gr[k] = integrate(a, h);
        mo[k] = integrate(b, h);
        rs[k] = boundary_costs(prm.alpha, prm.A, uk.front(), Hk.front()).b +
                boundary_costs(prm.beta, prm.B, uk.back(), Hk.back()).b;
    }
    JTerms j;
    j.endpoints = inner_product(u.frames.back(), H.frames.back()) - inner_product(u.frames.front(), H.frames.front());
    j.time_derivative = -integrate_nonuniform(u.times, td);
    j.gradient = integrate_nonuniform(u.times, gr);
    j.mobility = -integrate_nonuniform(u.times, mo);
    j.reservoirs = -integrate_nonuniform(u.times, rs);
    return j;
}

inline double j_functional(const Path& u, const Path& H, const Params& prm) { return j_terms(u, H, prm).total(); }

struct RateBreakdown {
    double bulk = 0.0;
    double left = 0.0;
    double right = 0.0;
    double total = 0.0;
    /// Time-averaged relative mismatch of the controlled equation.
    double control_residual = 0.0;
    std::vector<std::string> warnings;
};

namespace rate_detail {

/// Flux u' - 2 sigma(u) H' against the integrated equation and the reservoir rows, scaled.
inline double control_mismatch(const Profile& u, const Profile& H, const Profile& ut, const Params& prm) {
    const double h = u.grid().h();
    const auto du = derivative(u.values(), h);
    const auto dH = derivative(H.values(), h);
    std::vector<double> J(u.size());
    double scale = 1.0;
    for (std::size_t i = 0; i < J.size(); ++i) {
        J[i] = du[i] - 2.0 * sigma(u[i]) * dH[i];
        scale = std::max(scale, std::abs(J[i]));
    }
    const auto cum = cumulative_integral(ut.values(), h);
    double r = std::abs(J.front() + boundary_costs(prm.alpha, prm.A, u.front(), H.front()).p);
    r = std::max(r, std::abs(J.back() - boundary_costs(prm.beta, prm.B, u.back(), H.back()).p));
    for (std::size_t i = 0; i < J.size(); ++i) r = std::max(r, std::abs(J[i] - J.front() - cum[i]));
    return r / scale;
}

}  // namespace rate_detail

/// Explicit cost of a path driven by a known control.
inline RateBreakdown rate_from_control(const Path& u, const Path& H, const Params& prm) {
    require_same_layout(u, H);
    const std::size_t nt = u.size();
    const double h = u.grid.h();
    std::vector<double> bulk(nt), left(nt), right(nt);
    for (std::size_t k = 0; k < nt; ++k) {
        const auto& uk = u.frames[k];
        const auto& Hk = H.frames[k];
        const auto dx = derivative(Hk.values(), h);
        std::vector<double> a(dx.size());
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = sigma(uk[i]) * dx[i] * dx[i];
        bulk[k] = integrate(a, h);
        left[k] = boundary_costs(prm.alpha, prm.A, uk.front(), Hk.front()).c;
        right[k] = boundary_costs(prm.beta, prm.B, uk.back(), Hk.back()).c;
    }
    RateBreakdown r;
    r.bulk = integrate_nonuniform(u.times, bulk);
    r.left = integrate_nonuniform(u.times, left);
    r.right = integrate_nonuniform(u.times, right);
    r.total = r.bulk + r.left + r.right;
    if (nt >= 2 && u.t_final() > u.times.front()) {
        // Averaged in time: the equation holds a.e. in t, and an initial layer only spoils a few frames.
        const Path ut = time_derivative(u);
        std::vector<double> mis(nt);
        for (std::size_t k = 0; k < nt; ++k) {
            mis[k] = rate_detail::control_mismatch(u.frames[k], H.frames[k], ut.frames[k], prm);
        }
        r.control_residual = integrate_nonuniform(u.times, mis) / (u.t_final() - u.times.front());
        if (r.control_residual > 1e-2) {
            std::ostringstream os;
            os << "control does not drive the path: relative residual " << r.control_residual;
            r.warnings.push_back(os.str());
        }
    }
    return r;
}

/// (1/2) int dt int u'^2 / sigma(u); +infinity if a frame touches 0 or 1.
inline double energy(const Path& u) {
    const double h = u.grid.h();
    std::vector<double> per(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) {
        const auto& uk = u.frames[k];
        if (uk.min() <= 0.0 || uk.max() >= 1.0) return std::numeric_limits<double>::infinity();
        const auto du = derivative(uk.values(), h);
        std::vector<double> a(du.size());
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = du[i] * du[i] / sigma(uk[i]);
        per[k] = 0.5 * integrate(a, h);
    }
    return u.size() == 1 ? 0.0 : integrate_nonuniform(u.times, per);
}

/// Control H with du/dt = u'' - 2 (sigma(u) H')' and the reservoir rows, frame by frame.
inline Profile recover_control_frame(const Profile& u, const Profile& ut, const Params& prm) {
    require_same_grid(u, ut);
    const double h = u.grid().h();
    for (double v : u.values()) {
        if (!(v > 0.0 && v < 1.0)) throw ValidationError("recover_control: density must lie strictly inside (0,1)");
    }
    const auto du = derivative(u.values(), h);
    const auto cum = cumulative_integral(ut.values(), h);
    std::vector<double> inv2s(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) inv2s[i] = 0.5 / sigma(u[i]);
    const auto slope_int = [&](double J0) {
        std::vector<double> g(u.size());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = (du[i] - J0 - cum[i]) * inv2s[i];
        return g;
    };
    // H(1) - H(0) is affine in J(0): a - b J(0).
    const auto g0 = slope_int(0.0);
    const double a = integrate(g0, h);
    const double b = integrate(inv2s, h);
    auto residual = [&](double m) {
        const double J0 = -boundary_costs(prm.alpha, prm.A, u.front(), m).p;
        const double H1 = m + a - b * J0;
        return J0 + cum.back() - boundary_costs(prm.beta, prm.B, u.back(), H1).p;
    };
    // The residual is strictly decreasing in m; widen until bracketed.
    double lo = -1.0, hi = 1.0;
    for (int i = 0; residual(lo) <= 0.0; ++i) {
        if (i > 8) throw NumericalError("recover_control: cannot bracket H(0) from below");
        lo *= 2.0;
    }
    for (int i = 0; residual(hi) >= 0.0; ++i) {
        if (i > 8) throw NumericalError("recover_control: cannot bracket H(0) from above");
        hi *= 2.0;
    }
    std::uintmax_t iters = 200;
    const auto r = boost::math::tools::toms748_solve(residual, lo, hi, boost::math::tools::eps_tolerance<double>(52), iters);
    const double m = 0.5 * (r.first + r.second);
    const double J0 = -boundary_costs(prm.alpha, prm.A, u.front(), m).p;
    auto g = slope_int(J0);
    auto Hv = cumulative_integral(g, h);
    for (auto& v : Hv) v += m;
    return Profile(u.grid(), std::move(Hv));
}

inline Path recover_control(const Path& u, const Path& ut, const Params& prm) {
    require_same_layout(u, ut);
    std::vector<Profile> H;
    H.reserve(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) H.push_back(recover_control_frame(u.frames[k], ut.frames[k], prm));
    return Path(u.grid, u.times, std::move(H));
}

inline Path recover_control(const Path& u, const Params& prm) { return recover_control(u, time_derivative(u), prm); }

/// Constants of the small-deviation connecting path.
struct ConnectingConstants {
    double lambda1 = 0.0;
    double Lambda = 0.0;  // 16 sqrt(A / lambda1)
    double delta0 = 0.0;  // min(alpha, 1 - beta)
    double J = 0.0;       // 1 / (1 - exp(-lambda1))
    double threshold = 0.0;
    double bound_factor = 0.0;  // (2 J / delta0)^2
};

inline ConnectingConstants connecting_constants(const Params& prm, double lambda1) {
    ConnectingConstants c;
    c.lambda1 = lambda1;
    c.Lambda = 16.0 * std::sqrt(prm.A / lambda1);
    c.delta0 = std::min(prm.alpha, 1.0 - prm.beta);
    c.J = 1.0 / (-std::expm1(-lambda1));
    c.threshold = c.delta0 * std::min(0.25, 1.0 / c.Lambda);
    c.bound_factor = std::pow(2.0 * c.J / c.delta0, 2);
    return c;
}

struct ConnectingPath {
    Path path;
    Path velocity;
    Profile g;
    /// Cost from the explicit formula with the control recovered from the path.
    double cost = 0.0;
    RateBreakdown breakdown;
    /// Largest J over the control basket: a lower estimate of the cost.
    double basket_lower = 0.0;
    /// (2J/delta0)^2 |gamma - rho_bar|_2^2.
    double bound = 0.0;
    double sup_distance = 0.0;
    double threshold = 0.0;
    bool hypothesis_satisfied = false;
};

namespace rate_detail {

/// Uniform frames on [0,1] plus a geometric cluster at t=1, where the fast modes live.
inline std::vector<double> connecting_times(int frames) {
    std::vector<double> ts;
    for (int k = 0; k <= frames; ++k) ts.push_back(static_cast<double>(k) / frames);
    const int cluster = std::max(8, frames / 4);
    const double lo = std::log(1e-6), hi = std::log(1.0 / frames);
    for (int k = 0; k < cluster; ++k) ts.push_back(1.0 - std::exp(lo + (hi - lo) * k / (cluster - 1)));
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end(), [](double x, double y) { return std::abs(x - y) < 1e-14; }), ts.end());
    return ts;
}

/// sup over s of J(u, s H) by Brent's method; J is concave in s.
inline double best_scaled_j(const Path& u, const Path& H, const Params& prm) {
    auto neg = [&](double s) {
        std::vector<Profile> fr;
        fr.reserve(H.size());
        for (const auto& f : H.frames) fr.push_back(f * s);
        return -j_functional(u, Path(H.grid, H.times, std::move(fr)), prm);
    };
    const auto r = boost::math::tools::brent_find_minima(neg, -4.0, 4.0, 30);
    return std::max(0.0, -r.second);
}

}  // namespace rate_detail

/**
 * @brief Path from rho_bar (t=0) to gamma (t=1) built from the Robin modes.
 *
 * The part of gamma - rho_bar outside the truncated span is added linearly in t
 * so that both endpoints are exact. No hypothesis check; see connecting_path.
 */
inline ConnectingPath connecting_path_unchecked(const DensityProfile& gamma, const Params& prm,
                                                const SpectralBasis& basis, int frames, bool with_basket = true) {
    prm.require_nondegenerate();
    if (frames < 4) throw ValidationError("connecting_path: need frames >= 4");
    const Grid& grid = gamma.grid();
    const DensityProfile rho = stationary_profile(prm, grid);
    const Profile diff = gamma - rho;
    const auto c = basis.coefficients(diff);
    const Profile rem = diff - basis.synthesize(c);
    const auto& lam = basis.eigenvalues();

    std::vector<double> gc(c.size());
    for (std::size_t k = 0; k < c.size(); ++k) gc[k] = lam[k] / std::expm1(lam[k]) * c[k];

    const auto ts = rate_detail::connecting_times(frames);
    std::vector<Profile> w, wt;
    std::vector<double> a(c.size()), ad(c.size());
    for (double t : ts) {
        for (std::size_t k = 0; k < c.size(); ++k) {
            const double den = -std::expm1(-lam[k]);
            const double e = std::exp(lam[k] * (t - 1.0));
            a[k] = c[k] * (e - std::exp(-lam[k])) / den;
            ad[k] = c[k] * lam[k] * e / den;
        }
        if (t == 1.0) {
            w.push_back(gamma);
        } else if (t == 0.0) {
            w.push_back(rho);
        } else {
            w.push_back(rho + basis.synthesize(a) + rem * t);
        }
        wt.push_back(basis.synthesize(ad) + rem);
    }
    ConnectingPath cp{Path(grid, ts, std::move(w)), Path(grid, ts, std::move(wt)), basis.synthesize(gc), 0.0, {}};
    const Path H = recover_control(cp.path, cp.velocity, prm);
    cp.breakdown = rate_from_control(cp.path, H, prm);
    cp.cost = cp.breakdown.total;

    const auto cc = connecting_constants(prm, lam.front());
    cp.bound = cc.bound_factor * inner_product(diff, diff);
    cp.sup_distance = norm(diff, NormKind::Linf);
    cp.threshold = cc.threshold;
    cp.hypothesis_satisfied = cp.sup_distance <= cc.threshold;

    if (with_basket) {
        double best = std::max(0.0, j_functional(cp.path, H, prm));
        const int kmax = std::min(12, basis.count());
        for (int k = 0; k < kmax; ++k) {
            for (int p = 0; p <= 1; ++p) {
                std::vector<Profile> fr;
                for (double t : ts) fr.push_back(basis.eigenfunction(k) * std::pow(t, p));
                best = std::max(best, rate_detail::best_scaled_j(cp.path, Path(grid, ts, std::move(fr)), prm));
            }
        }
        cp.basket_lower = best;
    }
    return cp;
}

/// Connecting path under the small-deviation hypothesis; rejects gamma too far from rho_bar.
inline ConnectingPath connecting_path(const DensityProfile& gamma, const Params& prm, const SpectralBasis& basis,
                                      int frames) {
    prm.require_nondegenerate();
    const auto cc = connecting_constants(prm, basis.eigenvalues().front());
    const double d = sup_distance(gamma, stationary_profile(prm, gamma.grid()));
    if (d > cc.threshold) {
        std::ostringstream os;
        os << "connecting_path: |gamma - rho_bar|_inf = " << d << " exceeds the admissible " << cc.threshold;
        throw ValidationError(os.str());
    }
    return connecting_path_unchecked(gamma, prm, basis, frames);
}

/// Control of the reversed optimal path: logit v - logit F, frame by frame.
inline Path adjoint_control(const AdjointSolution& adj) {
    std::vector<Profile> out;
    out.reserve(adj.v_path.size());
    for (std::size_t k = 0; k < adj.v_path.size(); ++k) out.push_back(gamma_field(adj.v_path.frames[k], adj.F_path.frames[k], 0.0));
    return Path(adj.v_path.grid, adj.v_path.times, std::move(out));
}

/// The same frames traversed backwards on [0, T].
inline Path reverse_path(const Path& p) {
    const double T = p.t_final();
    std::vector<double> ts;
    std::vector<Profile> fr;
    for (std::size_t k = p.size(); k-- > 0;) {
        ts.push_back(T - p.times[k]);
        fr.push_back(p.frames[k]);
    }
    ts.front() = 0.0;
    return Path(p.grid, std::move(ts), std::move(fr));
}

struct VsOptions {
    int K = 60;
    int adjoint_frames = 1500;
    int connecting_frames = 400;
    double t_max = 50.0;
    double el_tol = 1e-10;
    bool basket = true;
};

struct VsReport {
    double S = 0.0;
    double upper = 0.0;
    double lower = 0.0;
    double gap = 0.0;
    double relative_gap = 0.0;
    double T1 = 0.0;
    double relax_distance = 0.0;
    RateBreakdown adjoint_rate;
    double s0_drop = 0.0;  // S0(gamma) - S0(v(T1))
    double connecting_cost = 0.0;
    double connecting_basket_lower = 0.0;
    double connecting_bound = 0.0;
    double connecting_sup_distance = 0.0;
    double connecting_threshold = 0.0;
    bool hypothesis_satisfied = false;
};

/**
 * @brief Upper bound for the quasi-potential from the assembled path, against S.
 *
 * Follows the optimal path from gamma until it is within eps_relax of rho_bar,
 * prices the reversed segment with the explicit rate and bridges rho_bar to its
 * end with the connecting path.
 */
inline VsReport verify_v_equals_s(const DensityProfile& gamma, const Params& prm, double eps_relax,
                                  const VsOptions& opt = {}) {
    prm.require_nondegenerate();
    if (!(eps_relax > 0.0)) throw ValidationError("verify_v_equals_s: eps_relax must be positive");
    const auto basis = std::make_shared<const SpectralBasis>(prm, gamma.grid(), opt.K);
    const AdjointEvaluator ev(gamma, prm, basis, opt.el_tol);
    const DensityProfile rho = stationary_profile(prm, gamma.grid());

    VsReport r;
    const double s0_rho = g_total(rho, solve_el(rho, prm, opt.el_tol).F, prm);
    const double s0_gamma = g_total(gamma, ev.el().F, prm);
    r.S = s0_gamma - s0_rho;
    r.lower = r.S;

    if (sup_distance(gamma, rho) < eps_relax) {
        r.T1 = 0.0;
        const auto cp = connecting_path_unchecked(gamma, prm, *basis, opt.connecting_frames, opt.basket);
        r.connecting_cost = cp.cost;
        r.connecting_basket_lower = cp.basket_lower;
        r.connecting_bound = cp.bound;
        r.connecting_sup_distance = cp.sup_distance;
        r.connecting_threshold = cp.threshold;
        r.hypothesis_satisfied = cp.hypothesis_satisfied;
        r.upper = cp.cost;
    } else {
        const auto T1 = relaxation_time(ev, eps_relax, opt.t_max);
        if (!T1) {
            std::ostringstream os;
            os << "verify_v_equals_s: no relaxation to " << eps_relax << " within t_max = " << opt.t_max;
            throw NumericalError(os.str());
        }
        r.T1 = *T1;
        const AdjointSolution adj = adjoint_path(ev, geometric_times(r.T1, opt.adjoint_frames));
        const Path u = reverse_path(adj.v_path);
        const Path H = reverse_path(adjoint_control(adj));
        r.adjoint_rate = rate_from_control(u, H, prm);
        const DensityProfile vT = DensityProfile::clamped(adj.v_path.frames.back(), 1e-12);
        r.relax_distance = sup_distance(vT, rho);
        r.s0_drop = s0_gamma - g_total(vT, solve_el(vT, prm, opt.el_tol).F, prm);
        const auto cp = connecting_path_unchecked(vT, prm, *basis, opt.connecting_frames, opt.basket);
        r.connecting_cost = cp.cost;
        r.connecting_basket_lower = cp.basket_lower;
        r.connecting_bound = cp.bound;
        r.connecting_sup_distance = cp.sup_distance;
        r.connecting_threshold = cp.threshold;
        r.hypothesis_satisfied = cp.hypothesis_satisfied;
        r.upper = r.adjoint_rate.total + cp.cost;
    }
    r.gap = r.upper - r.S;
    r.relative_gap = r.gap / std::max(std::abs(r.S), 1e-6);
    return r;
}

}  // namespace mft
