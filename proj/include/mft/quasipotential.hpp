#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "mft/euler_lagrange.hpp"
#include "mft/numerics.hpp"

namespace mft {

/// The boundary functionals b, p, c, q at reservoir density rho, coupling D, boundary density a, momentum M.
struct BoundaryCosts {
    double b = 0.0;
    double p = 0.0;
    double c = 0.0;
    double q = 0.0;
};

inline BoundaryCosts boundary_costs(double rho, double D, double a, double M) {
    if (!(rho > 0.0 && rho < 1.0)) throw ValidationError("boundary_costs: need 0 < rho < 1");
    if (!(D > 0.0) || !std::isfinite(D)) throw ValidationError("boundary_costs: need D > 0");
    if (!(a >= 0.0 && a <= 1.0)) throw ValidationError("boundary_costs: need 0 <= a <= 1");
    if (!std::isfinite(M)) throw ValidationError("boundary_costs: M must be finite");
    const double in = (1.0 - a) * rho;   // injection weight
    const double out = a * (1.0 - rho);  // removal weight
    const double ep = std::exp(M), em = std::exp(-M);
    const double xp = std::expm1(M), xm = std::expm1(-M);
    BoundaryCosts r;
    r.b = (in * xp + out * xm) / D;
    r.p = (in * ep - out * em) / D;
    r.c = (in * (M * ep - xp) + out * (-M * em - xm)) / D;
    r.q = (in * (xp - M) + out * (xm + M)) / D;
    return r;
}

namespace qp_detail {

inline double xlogy_ratio(double g, double f) { return g > 0.0 ? g * std::log(g / f) : 0.0; }

inline double xlogx(double g) { return g > 0.0 ? g * std::log(g) : 0.0; }

inline double entropy_density(double g, double f) {
    return xlogy_ratio(g, f) + xlogy_ratio(1.0 - g, 1.0 - f);
}

inline void require_interior_density(const Profile& g, double delta, const char* who) {
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(g[i] >= delta && g[i] <= 1.0 - delta)) {
            throw ValidationError(std::string(who) + ": density must lie in [delta, 1-delta] at x = " +
                                  std::to_string(g.grid().x(i)));
        }
    }
}

}  // namespace qp_detail

/// Bulk part of the static functional; 0 log 0 = 0.
inline double g_bulk(const DensityProfile& gamma, const Profile& F, const Params& prm) {
    prm.require_nondegenerate();
    require_same_grid(gamma, F);
    const auto d = derivative(F.values(), F.grid().h());
    std::vector<double> integrand(F.size());
    for (std::size_t i = 0; i < F.size(); ++i) {
        if (!(d[i] > 0.0)) throw ValidationError("g_bulk: F' <= 0 at x = " + std::to_string(F.grid().x(i)));
        if (!(F[i] > 0.0 && F[i] < 1.0)) throw ValidationError("g_bulk: F outside (0,1)");
        integrand[i] = qp_detail::entropy_density(gamma[i], F[i]) + std::log(d[i] / (prm.beta - prm.alpha));
    }
    return integrate(integrand, F.grid().h());
}

inline double g_total(const DensityProfile& gamma, const Profile& F, const Params& prm) {
    const double l = (F.front() - prm.alpha) / (prm.A * (prm.beta - prm.alpha));
    const double r = (prm.beta - F.back()) / (prm.B * (prm.beta - prm.alpha));
    if (!(l > 0.0) || !(r > 0.0)) throw ValidationError("g_total: need alpha < F(0) and F(1) < beta");
    return g_bulk(gamma, F, prm) + prm.A * std::log(l) + prm.B * std::log(r);
}

/// The static functional written in phi = logit F (concave in phi).
inline double g_tilde(const DensityProfile& gamma, const PhiProfile& phi, const Params& prm) {
    prm.require_nondegenerate();
    const Profile& f = phi.phi;
    require_same_grid(gamma, f);
    const auto d = derivative(f.values(), f.grid().h());
    std::vector<double> integrand(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        if (!(d[i] > 0.0)) throw ValidationError("g_tilde: phi' <= 0");
        const double g = gamma[i];
        const double softplus = f[i] > 0.0 ? f[i] + std::log1p(std::exp(-f[i])) : std::log1p(std::exp(f[i]));
        integrand[i] = qp_detail::xlogx(g) + qp_detail::xlogx(1.0 - g) + (1.0 - g) * f[i] - softplus +
                       std::log(d[i] / (prm.beta - prm.alpha));
    }
    const double l = (logistic(f.front()) - prm.alpha) / (prm.A * (prm.beta - prm.alpha));
    const double r = (prm.beta - logistic(f.back())) / (prm.B * (prm.beta - prm.alpha));
    if (!(l > 0.0) || !(r > 0.0)) throw ValidationError("g_tilde: boundary values outside (alpha, beta)");
    return integrate(integrand, f.grid().h()) + prm.A * std::log(l) + prm.B * std::log(r);
}

/// logit(gamma) - logit(F); gamma must lie in [delta, 1-delta].
inline Profile gamma_field(const Profile& gamma, const Profile& F, double delta = 1e-6) {
    require_same_grid(gamma, F);
    qp_detail::require_interior_density(gamma, delta, "gamma_field");
    qp_detail::require_interior_density(F, 0.0 + std::numeric_limits<double>::min(), "gamma_field");
    std::vector<double> out(F.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = logit(gamma[i]) - logit(F[i]);
    return Profile(F.grid(), std::move(out));
}

inline double hamiltonian(const Profile& gamma, const Profile& H, const Params& prm) {
    require_same_grid(gamma, H);
    const auto dg = derivative(gamma.values(), gamma.grid().h());
    const auto dH = derivative(H.values(), H.grid().h());
    std::vector<double> integrand(H.size());
    for (std::size_t i = 0; i < H.size(); ++i) integrand[i] = -dg[i] * dH[i] + sigma(gamma[i]) * dH[i] * dH[i];
    return integrate(integrand, H.grid().h()) + boundary_costs(prm.alpha, prm.A, gamma.front(), H.front()).b +
           boundary_costs(prm.beta, prm.B, gamma.back(), H.back()).b;
}

struct QuasiPotentialReport {
    double s0_gamma = 0.0;
    double s0_rho = 0.0;
    double s = 0.0;
    Profile F;
    /// Hamiltonian at the derivative field; NaN when gamma touches 0 or 1.
    double hj_residual = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
};

inline QuasiPotentialReport s0(const DensityProfile& gamma, const Params& prm, double tol = 1e-10) {
    const ElSolution el = solve_el(gamma, prm, tol);
    const DensityProfile rho = stationary_profile(prm, gamma.grid());
    const ElSolution el_rho = solve_el(rho, prm, tol);
    QuasiPotentialReport r{g_total(gamma, el.F, prm), g_total(rho, el_rho.F, prm), 0.0, el.F,
                           std::numeric_limits<double>::quiet_NaN(), el.iterations};
    r.s = r.s0_gamma - r.s0_rho;
    if (gamma.min() >= 1e-6 && gamma.max() <= 1.0 - 1e-6) {
        r.hj_residual = hamiltonian(gamma, gamma_field(gamma, el.F), prm);
    }
    return r;
}

inline double s(const DensityProfile& gamma, const Params& prm) { return s0(gamma, prm).s; }

/// Relative entropy against the Bernoulli(alpha) product measure.
inline double s_equilibrium(const DensityProfile& gamma, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("s_equilibrium: need 0 < alpha < 1");
    std::vector<double> integrand(gamma.size());
    for (std::size_t i = 0; i < gamma.size(); ++i) integrand[i] = qp_detail::entropy_density(gamma[i], alpha);
    return integrate(integrand, gamma.grid().h());
}

}  // namespace mft
