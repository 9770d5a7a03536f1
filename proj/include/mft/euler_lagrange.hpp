#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "mft/numerics.hpp"

namespace mft {

/// Slope bounds p <= F' <= q for every fixed point.
struct SlopeBounds {
    double p = 0.0;
    double q = 0.0;
};

inline SlopeBounds slope_bounds(const Params& prm) {
    const double a = prm.alpha, b = prm.beta, A = prm.A, B = prm.B;
    SlopeBounds s;
    s.p = a * (b - a) / (A * a + (B + 1.0) * b) * (1.0 - b) / (1.0 - a);
    s.q = (1.0 - a) * (b - a) / (A * (1.0 - a) + (B + 1.0) * (1.0 - b)) * b / a;
    return s;
}

namespace el_detail {

inline void require_increasing_interior(const Profile& F, const std::vector<double>& dF, const char* who) {
    constexpr double margin = 1e-12;
    for (std::size_t i = 0; i < F.size(); ++i) {
        if (!(F[i] > margin && F[i] < 1.0 - margin)) {
            std::ostringstream os;
            os << who << ": F(" << F.grid().x(i) << ") = " << F[i] << " outside (0,1)";
            throw ValidationError(os.str());
        }
        if (!(dF[i] > 0.0)) {
            std::ostringstream os;
            os << who << ": F' <= 0 at x = " << F.grid().x(i);
            throw ValidationError(os.str());
        }
    }
}

}  // namespace el_detail

/// Pointwise (gamma - F) F' / (F (1 - F)).
inline Profile r_gamma(const Profile& F, const Profile& gamma, const Params& prm) {
    (void)prm;
    require_same_grid(F, gamma);
    const auto dF = derivative(F.values(), F.grid().h());
    el_detail::require_increasing_interior(F, dF, "r_gamma");
    std::vector<double> r(F.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = (gamma[i] - F[i]) * dF[i] / sigma(F[i]);
    return Profile(F.grid(), std::move(r));
}

/// Fixed-point map of the integro-differential form, via nested cumulative trapezoids.
inline Profile kmap(const Profile& F, const Profile& gamma, const Params& prm) {
    const Profile R = r_gamma(F, gamma, prm);
    const double h = F.grid().h();
    auto E = cumulative_integral(R.values(), h);
    for (auto& e : E) e = std::exp(e);
    const auto I = cumulative_integral(E, h);
    const double D = prm.A + I.back() + prm.B * E.back();
    std::vector<double> out(F.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = prm.alpha + (prm.beta - prm.alpha) * (prm.A + I[i]) / D;
    return Profile(F.grid(), std::move(out));
}

/// Second-order residual F'' - (gamma - F) F'^2 / (F (1 - F)).
inline Profile el_residual(const Profile& F, const Profile& gamma) {
    require_same_grid(F, gamma);
    const Profile L = laplacian(F);
    const auto d = derivative(F.values(), F.grid().h());
    std::vector<double> r(F.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = L[i] - (gamma[i] - F[i]) * d[i] * d[i] / sigma(F[i]);
    return Profile(F.grid(), std::move(r));
}

struct ElSolution {
    Profile F;
    int iterations = 0;
    double residual_c1 = 0.0;
    double p = 0.0;
    double q = 0.0;
    std::vector<double> history;
};

/// Damped Picard iteration F <- (1-w) F + w K(F) from the stationary profile; w halves when the residual grows.
inline ElSolution solve_el(const DensityProfile& gamma, const Params& prm, double tol = 1e-10, int max_iter = 2000) {
    prm.require_nondegenerate();
    if (!(tol > 0.0)) throw ValidationError("solve_el: tol must be positive");
    if (max_iter < 1) throw ValidationError("solve_el: max_iter must be >= 1");

    Profile F = stationary_profile(prm, gamma.grid());
    Profile K = kmap(F, gamma, prm);
    double res = norm(K - F, NormKind::C1);
    std::vector<double> history{res};
    double omega = 1.0;
    int it = 0;
    while (res >= tol) {
        if (it == max_iter) {
            std::ostringstream os;
            os << "solve_el: no convergence after " << max_iter << " iterations, residual " << res;
            throw NonConvergenceError(os.str(), history);
        }
        F = (1.0 - omega) * F + omega * K;
        K = kmap(F, gamma, prm);
        const double next = norm(K - F, NormKind::C1);
        if (next > res) omega *= 0.5;
        res = next;
        history.push_back(res);
        ++it;
    }
    const auto sb = slope_bounds(prm);
    return ElSolution{std::move(F), it, res, sb.p, sb.q, std::move(history)};
}

/// Inverse relation gamma = F + sigma(F) F'' / F'^2.
inline DensityProfile gamma_from_F(const Profile& F, const Params& prm) {
    (void)prm;
    const auto d = derivative(F.values(), F.grid().h());
    el_detail::require_increasing_interior(F, d, "gamma_from_F");
    const Profile L = laplacian(F);
    std::vector<double> g(F.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = F[i] + sigma(F[i]) * L[i] / (d[i] * d[i]);
    return DensityProfile::clamped(Profile(F.grid(), std::move(g)), 1e-8);
}

/// phi = logit F.
struct PhiProfile {
    Profile phi;
};

inline PhiProfile phi_transform(const Profile& F) {
    for (std::size_t i = 0; i < F.size(); ++i) {
        if (!(F[i] > 0.0 && F[i] < 1.0)) {
            throw ValidationError("phi_transform: F must lie strictly inside (0,1)");
        }
    }
    return PhiProfile{F.map([](double v) { return logit(v); })};
}

inline Profile phi_inverse(const PhiProfile& phi) {
    return phi.phi.map([](double z) { return logistic(z); });
}

/// Measured C1 with 1/C1 <= phi' <= C1.
inline double gradient_constant(const PhiProfile& phi) {
    const Profile d = derivative(phi.phi);
    return std::max(d.max(), 1.0 / d.min());
}

namespace el_detail {

struct LinearRows {
    std::vector<double> lower, diag, upper;
    // Extra entries of the one-sided boundary rows (psi_2 in row 0, psi_{n-2} in row n).
    double row0_far = 0.0, rown_far = 0.0;
};

inline LinearRows linearized_rows(const PhiProfile& phi, const Params& prm) {
    const Profile& f = phi.phi;
    const std::size_t m = f.size();
    const double h = f.grid().h();
    LinearRows r;
    r.lower.assign(m, 0.0);
    r.diag.assign(m, 0.0);
    r.upper.assign(m, 0.0);
    std::vector<double> a(m - 1);
    for (std::size_t i = 0; i + 1 < m; ++i) {
        const double s = (f[i + 1] - f[i]) / h;
        if (!(s > 0.0)) throw NumericalError("solve_linearized: phi not increasing");
        a[i] = 1.0 / (s * s);
    }
    for (std::size_t i = 1; i + 1 < m; ++i) {
        const double c = sigma(logistic(f[i]));
        r.lower[i] = a[i - 1] / (h * h);
        r.upper[i] = a[i] / (h * h);
        r.diag[i] = -(a[i - 1] + a[i]) / (h * h) - c;
    }
    const double k0 = ((1.0 - prm.alpha) * std::exp(f[0]) + prm.alpha * std::exp(-f[0])) / prm.A;
    const double k1 = ((1.0 - prm.beta) * std::exp(f[m - 1]) + prm.beta * std::exp(-f[m - 1])) / prm.B;
    r.diag[0] = -3.0 / (2.0 * h) - k0;
    r.upper[0] = 4.0 / (2.0 * h);
    r.row0_far = -1.0 / (2.0 * h);
    r.diag[m - 1] = 3.0 / (2.0 * h) + k1;
    r.lower[m - 1] = -4.0 / (2.0 * h);
    r.rown_far = 1.0 / (2.0 * h);
    return r;
}

}  // namespace el_detail

/// Discrete residual of the linearized problem for a candidate psi.
inline Profile linearized_residual(const PhiProfile& phi, const Profile& psi, const Profile& du_dt, const Params& prm) {
    require_same_grid(phi.phi, psi);
    require_same_grid(phi.phi, du_dt);
    const auto r = el_detail::linearized_rows(phi, prm);
    const std::size_t m = psi.size();
    std::vector<double> out(m);
    out[0] = r.diag[0] * psi[0] + r.upper[0] * psi[1] + r.row0_far * psi[2];
    out[m - 1] = r.diag[m - 1] * psi[m - 1] + r.lower[m - 1] * psi[m - 2] + r.rown_far * psi[m - 3];
    for (std::size_t i = 1; i + 1 < m; ++i) {
        out[i] = r.lower[i] * psi[i - 1] + r.diag[i] * psi[i] + r.upper[i] * psi[i + 1] - du_dt[i];
    }
    return Profile(psi.grid(), std::move(out));
}

/// Second-order finite-difference solve of the linearized sensitivity problem.
inline Profile solve_linearized(const PhiProfile& phi, const Profile& du_dt, const Params& prm) {
    require_same_grid(phi.phi, du_dt);
    auto r = el_detail::linearized_rows(phi, prm);
    const std::size_t m = du_dt.size();
    std::vector<double> rhs(m, 0.0);
    for (std::size_t i = 1; i + 1 < m; ++i) rhs[i] = du_dt[i];
    // Fold the far entries of the boundary rows into tridiagonal form using the neighbouring rows.
    {
        const double w = r.row0_far / r.upper[1];
        r.diag[0] -= w * r.lower[1];
        r.upper[0] -= w * r.diag[1];
        rhs[0] -= w * rhs[1];
    }
    {
        const double w = r.rown_far / r.lower[m - 2];
        r.diag[m - 1] -= w * r.upper[m - 2];
        r.lower[m - 1] -= w * r.diag[m - 2];
        rhs[m - 1] -= w * rhs[m - 2];
    }
    auto psi = solve_tridiagonal(r.lower, r.diag, r.upper, rhs);
    for (double v : psi) {
        if (!std::isfinite(v)) throw NumericalError("solve_linearized: singular system");
    }
    return Profile(du_dt.grid(), std::move(psi));
}

}  // namespace mft
