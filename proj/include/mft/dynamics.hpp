#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <vector>

#include "mft/euler_lagrange.hpp"
#include "mft/numerics.hpp"
#include "mft/quasipotential.hpp"
#include "mft/robin_spectral.hpp"

namespace mft {

enum class HeatMethod { spectral, finite_difference };

struct HeatSolution {
    Path path;
    HeatMethod method = HeatMethod::spectral;
};

namespace dyn_detail {

inline void require_times(const std::vector<double>& times) {
    if (times.empty()) throw ValidationError("times: empty");
    if (times.front() != 0.0) throw ValidationError("times: must start at 0");
    for (std::size_t k = 1; k < times.size(); ++k) {
        if (!(times[k] > times[k - 1])) throw ValidationError("times: must be strictly increasing");
    }
}

inline void check_density_frame(std::vector<double>& u, double t) {
    constexpr double tol = 1e-8;
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (!(u[i] >= -tol && u[i] <= 1.0 + tol)) {
            std::ostringstream os;
            os << "density left [0,1] at t=" << t << ", node " << i << ", value " << u[i];
            throw NumericalError(os.str());
        }
        u[i] = std::clamp(u[i], 0.0, 1.0);
    }
}

}  // namespace dyn_detail

/// Robin heat flow rho_bar + P_t (gamma - rho_bar) sampled at `times`.
inline Path heat_path(const Profile& gamma, const SpectralBasis& basis, const std::vector<double>& times) {
    dyn_detail::require_times(times);
    require_same_grid(gamma, basis.eigenfunction(0));
    const DensityProfile rho = stationary_profile(basis.params(), gamma.grid());
    const auto c = basis.coefficients(gamma - rho);
    std::vector<Profile> frames;
    frames.reserve(times.size());
    std::vector<double> ct(c.size());
    for (double t : times) {
        if (t == 0.0) {
            frames.push_back(gamma);
            continue;
        }
        for (std::size_t k = 0; k < c.size(); ++k) ct[k] = c[k] * std::exp(-basis.eigenvalues()[k] * t);
        frames.push_back(rho + basis.synthesize(ct));
    }
    return Path(gamma.grid(), times, std::move(frames));
}

/// Path of the controlled equation; defined below.
inline Path solve_wasep(const DensityProfile& gamma, const Path& H, const Params& prm, double T, double dt);

inline HeatSolution solve_heat_robin(const DensityProfile& gamma, const Params& prm, const std::vector<double>& times,
                                     int K = 60, HeatMethod method = HeatMethod::spectral) {
    prm.validate();
    dyn_detail::require_times(times);
    if (method == HeatMethod::spectral) {
        const SpectralBasis basis(prm, gamma.grid(), K);
        return HeatSolution{heat_path(gamma, basis, times), method};
    }
    std::vector<Profile> zeros(times.size(), Profile(gamma.grid()));
    const Path H(gamma.grid(), times, std::move(zeros));
    const double h = gamma.grid().h();
    return HeatSolution{solve_wasep(gamma, H, prm, times.back(), 0.25 * h * h), method};
}

/// P_t phi framewise.
inline Path solve_heat_homogeneous(const Profile& phi, const Params& prm, const std::vector<double>& times, int K = 60) {
    prm.validate();
    dyn_detail::require_times(times);
    const SpectralBasis basis(prm, phi.grid(), K);
    const auto c = basis.coefficients(phi);
    std::vector<Profile> frames;
    std::vector<double> ct(c.size());
    for (double t : times) {
        if (t == 0.0) {
            frames.push_back(phi);
            continue;
        }
        for (std::size_t k = 0; k < c.size(); ++k) ct[k] = c[k] * std::exp(-basis.eigenvalues()[k] * t);
        frames.push_back(basis.synthesize(ct));
    }
    return Path(phi.grid(), times, std::move(frames));
}

/**
 * @brief Finite-volume solve of du/dt = u'' - 2 (sigma(u) H')' with the reservoir flux rows.
 *
 * Crank-Nicolson for diffusion and for the boundary fluxes (which are affine in u),
 * second-order Adams-Bashforth for the drift. Frames are returned at the times of
 * `H` not exceeding T, plus T itself. H is interpolated linearly in time.
 */
inline Path solve_wasep(const DensityProfile& gamma, const Path& H, const Params& prm, double T, double dt) {
    prm.validate();
    if (!(H.grid == gamma.grid())) throw ValidationError("solve_wasep: control grid mismatch");
    if (!(T > 0.0)) throw ValidationError("solve_wasep: need T > 0");
    const Grid& grid = gamma.grid();
    const double h = grid.h();
    if (!(dt > 0.0) || dt > 0.25 * h * h * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "solve_wasep: dt=" << dt << " violates the stability rule dt <= h^2/4 = " << 0.25 * h * h;
        throw ValidationError(os.str());
    }
    const std::size_t m = grid.size();

    std::vector<double> out_times;
    for (double t : H.times) {
        if (t <= T) out_times.push_back(t);
    }
    if (out_times.empty() || out_times.front() != 0.0) out_times.insert(out_times.begin(), 0.0);
    if (out_times.back() < T) out_times.push_back(T);

    std::vector<double> Hbuf(m);
    auto control_at = [&](double t) -> const std::vector<double>& {
        const auto& ts = H.times;
        if (ts.size() == 1 || t <= ts.front()) {
            Hbuf = H.frames.front().values();
        } else if (t >= ts.back()) {
            Hbuf = H.frames.back().values();
        } else {
            const std::size_t j = static_cast<std::size_t>(std::upper_bound(ts.begin(), ts.end(), t) - ts.begin());
            const double w = (t - ts[j - 1]) / (ts[j] - ts[j - 1]);
            for (std::size_t i = 0; i < m; ++i) Hbuf[i] = (1.0 - w) * H.frames[j - 1][i] + w * H.frames[j][i];
        }
        return Hbuf;
    };

    struct Boundary {
        double gL, kL, gR, kR;
    };
    auto boundary = [&](const std::vector<double>& Hc) {
        const double e0 = std::exp(Hc.front()), e1 = std::exp(Hc.back());
        return Boundary{prm.alpha * e0 / prm.A, (prm.alpha * e0 + (1.0 - prm.alpha) / e0) / prm.A,
                        prm.beta * e1 / prm.B, (prm.beta * e1 + (1.0 - prm.beta) / e1) / prm.B};
    };
    auto drift = [&](const std::vector<double>& u, const std::vector<double>& Hc, std::vector<double>& d) {
        std::vector<double> flux(m - 1);
        for (std::size_t i = 0; i + 1 < m; ++i) {
            flux[i] = -2.0 * sigma(0.5 * (u[i] + u[i + 1])) * (Hc[i + 1] - Hc[i]) / h;
        }
        d[0] = 2.0 * flux[0] / h;
        d[m - 1] = -2.0 * flux[m - 2] / h;
        for (std::size_t i = 1; i + 1 < m; ++i) d[i] = (flux[i] - flux[i - 1]) / h;
    };
    // Applies the linear part L u + g (diffusion plus affine boundary fluxes).
    auto linear = [&](const std::vector<double>& u, const Boundary& b, std::vector<double>& out) {
        const double h2 = h * h;
        out[0] = 2.0 * ((u[1] - u[0]) / h - b.kL * u[0] + b.gL) / h;
        out[m - 1] = 2.0 * (b.gR - b.kR * u[m - 1] - (u[m - 1] - u[m - 2]) / h) / h;
        for (std::size_t i = 1; i + 1 < m; ++i) out[i] = (u[i + 1] - 2.0 * u[i] + u[i - 1]) / h2;
    };

    std::vector<double> u = gamma.values();
    std::vector<Profile> frames{gamma};
    std::vector<double> lower(m), diag(m), upper(m), rhs(m), Lu(m), d_now(m), d_prev(m);
    double tau_prev = 0.0;
    double t = 0.0;
    for (std::size_t k = 1; k < out_times.size(); ++k) {
        const double target = out_times[k];
        while (t < target - 1e-15 * std::max(1.0, target)) {
            const double tau = std::min(dt, target - t);
            const std::vector<double> Hn = control_at(t);
            const Boundary bn = boundary(Hn);
            drift(u, Hn, d_now);
            const std::vector<double> Hn1 = control_at(t + tau);
            const Boundary bn1 = boundary(Hn1);
            linear(u, bn, Lu);
            for (std::size_t i = 0; i < m; ++i) {
                const double dr = tau_prev > 0.0 ? d_now[i] + 0.5 * tau / tau_prev * (d_now[i] - d_prev[i]) : d_now[i];
                rhs[i] = u[i] + 0.5 * tau * Lu[i] + tau * dr;
            }
            rhs[0] += 0.5 * tau * 2.0 * bn1.gL / h;
            rhs[m - 1] += 0.5 * tau * 2.0 * bn1.gR / h;
            const double c = 0.5 * tau / (h * h);
            for (std::size_t i = 1; i + 1 < m; ++i) {
                lower[i] = -c;
                upper[i] = -c;
                diag[i] = 1.0 + 2.0 * c;
            }
            diag[0] = 1.0 + 2.0 * c + 0.5 * tau * 2.0 * bn1.kL / h;
            upper[0] = -2.0 * c;
            diag[m - 1] = 1.0 + 2.0 * c + 0.5 * tau * 2.0 * bn1.kR / h;
            lower[m - 1] = -2.0 * c;
            u = solve_tridiagonal(lower, diag, upper, rhs);
            std::swap(d_prev, d_now);
            tau_prev = tau;
            t += tau;
            dyn_detail::check_density_frame(u, t);
        }
        t = target;
        frames.emplace_back(grid, u);
    }
    return Path(grid, out_times, std::move(frames));
}

/// Boundary parameters seen by the time-reversed dynamics for momentum frame F.
struct EffectiveBoundary {
    double alpha_star = 0.0;
    double beta_star = 0.0;
    double A_star = 0.0;
    double B_star = 0.0;
};

inline EffectiveBoundary effective_boundary(const Profile& F, const Params& prm) {
    if (!(F.front() > 0.0 && F.front() < 1.0 && F.back() > 0.0 && F.back() < 1.0)) {
        throw ValidationError("effective_boundary: F must lie strictly inside (0,1) at the endpoints");
    }
    const double r0 = logit(F.front()), r1 = logit(F.back());
    const double a_in = (1.0 - prm.alpha) * std::exp(r0), a_out = prm.alpha * std::exp(-r0);
    const double b_in = (1.0 - prm.beta) * std::exp(r1), b_out = prm.beta * std::exp(-r1);
    EffectiveBoundary e;
    e.A_star = prm.A / (a_in + a_out);
    e.alpha_star = a_in / (a_in + a_out);
    e.B_star = prm.B / (b_in + b_out);
    e.beta_star = b_in / (b_in + b_out);
    return e;
}

/// (logit F)', strictly positive on the increasing profiles.
inline Profile drift_field(const Profile& F) {
    const auto d = derivative(F.values(), F.grid().h());
    std::vector<double> out(F.size());
    for (std::size_t i = 0; i < F.size(); ++i) {
        if (!(F[i] > 0.0 && F[i] < 1.0)) throw ValidationError("drift_field: F outside (0,1)");
        if (!(d[i] > 0.0)) throw ValidationError("drift_field: F not increasing");
        out[i] = d[i] / sigma(F[i]);
    }
    return Profile(F.grid(), std::move(out));
}

/// Flux mismatches at x=0 and x=1 of the reversed dynamics for the pair (v, F).
inline std::pair<double, double> adjoint_boundary_residual(const Profile& v, const Profile& F, const Params& prm) {
    const Profile R = F.map([](double z) { return logit(z); });
    const auto dv = derivative(v.values(), v.grid().h());
    const auto dR = derivative(R.values(), R.grid().h());
    const std::size_t n = v.size() - 1;
    const double j0 = dv[0] - 2.0 * sigma(v[0]) * dR[0];
    const double j1 = dv[n] - 2.0 * sigma(v[n]) * dR[n];
    const double p0 = boundary_costs(1.0 - prm.alpha, prm.A, v[0], R[0]).p;
    const double p1 = boundary_costs(1.0 - prm.beta, prm.B, v[n], R[n]).p;
    return {j0 + p0, j1 - p1};
}

/**
 * @brief Evaluates the optimal fluctuation path at arbitrary times.
 *
 * F_t is the Robin heat flow of F(gamma); its Laplacian is the same flow applied
 * to the Laplacian at t=0, which the Euler-Lagrange equation gives in closed form.
 */
class AdjointEvaluator {
public:
    struct Frame {
        Profile v;
        Profile F;
        Profile dF;
        Profile lapF;
    };

    AdjointEvaluator(const DensityProfile& gamma, const Params& prm, int K = 60, double tol = 1e-10)
        : AdjointEvaluator(gamma, prm, std::make_shared<SpectralBasis>(prm, gamma.grid(), K), tol) {}

    AdjointEvaluator(const DensityProfile& gamma, const Params& prm, std::shared_ptr<const SpectralBasis> basis,
                     double tol = 1e-10)
        : gamma_(gamma),
          params_(prm),
          basis_(std::move(basis)),
          el_(solve_el(gamma, prm, tol)),
          rho_(stationary_profile(prm, gamma.grid())),
          dF0_(derivative(el_.F)),
          lap0_(gamma.grid()) {
        std::vector<double> L(gamma.size());
        for (std::size_t i = 0; i < L.size(); ++i) {
            L[i] = (gamma[i] - el_.F[i]) * dF0_[i] * dF0_[i] / sigma(el_.F[i]);
        }
        lap0_ = Profile(gamma.grid(), std::move(L));
        cF_ = basis_->coefficients(el_.F - rho_);
        cL_ = basis_->coefficients(lap0_);
        c1_ = std::min(dF0_.min(), 1.0 / dF0_.max());
    }

    const ElSolution& el() const noexcept { return el_; }
    const SpectralBasis& basis() const noexcept { return *basis_; }
    const Profile& rho() const noexcept { return rho_; }
    /// Measured constant with c1 <= F' <= 1/c1 at t = 0.
    double c1() const noexcept { return c1_; }

    Frame frame(double t) const {
        if (!(t >= 0.0)) throw ValidationError("adjoint: need t >= 0");
        if (t == 0.0) return assemble(el_.F, dF0_, lap0_);
        std::vector<double> a(cF_.size()), b(cL_.size());
        for (std::size_t k = 0; k < a.size(); ++k) {
            const double e = std::exp(-basis_->eigenvalues()[k] * t);
            a[k] = cF_[k] * e;
            b[k] = cL_[k] * e;
        }
        Profile F = rho_ + basis_->synthesize(a);
        Profile dF = Profile::constant(rho_.grid(), stationary_slope(params_)) + basis_->synthesize_derivative(a);
        Profile L = basis_->synthesize(b);
        if (dF.min() < 0.99 * c1_ || dF.max() > 1.01 / c1_) {
            std::ostringstream os;
            os << "adjoint: F' left [c1, 1/c1] at t=" << t << " (spectral truncation too coarse)";
            throw NumericalError(os.str());
        }
        return assemble(std::move(F), std::move(dF), std::move(L));
    }

private:
    Frame assemble(Profile F, Profile dF, Profile L) const {
        std::vector<double> v(F.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = F[i] + sigma(F[i]) * L[i] / (dF[i] * dF[i]);
        return Frame{Profile(F.grid(), std::move(v)), std::move(F), std::move(dF), std::move(L)};
    }

    DensityProfile gamma_;
    Params params_;
    std::shared_ptr<const SpectralBasis> basis_;
    ElSolution el_;
    Profile rho_;
    Profile dF0_;
    Profile lap0_;
    std::vector<double> cF_, cL_;
    double c1_ = 0.0;
};

struct AdjointSolution {
    Path v_path;
    Path F_path;
    std::vector<EffectiveBoundary> effective;
    /// Observed extremes of v over frames with t > 0.
    double v_min = 0.0;
    double v_max = 0.0;
    std::vector<std::string> warnings;
};

inline AdjointSolution adjoint_path(const AdjointEvaluator& ev, const std::vector<double>& times) {
    dyn_detail::require_times(times);
    std::vector<Profile> vs, Fs;
    std::vector<EffectiveBoundary> eff;
    double vmin = std::numeric_limits<double>::infinity(), vmax = -vmin;
    std::vector<std::string> warnings;
    for (double t : times) {
        auto fr = ev.frame(t);
        if (t == 0.0 && (fr.v.min() < 0.0 || fr.v.max() > 1.0)) {
            warnings.push_back("v(0) leaves [0,1] at isolated nodes, following gamma");
        }
        if (t > 0.0) {
            vmin = std::min(vmin, fr.v.min());
            vmax = std::max(vmax, fr.v.max());
        }
        eff.push_back(effective_boundary(fr.F, ev.basis().params()));
        vs.push_back(std::move(fr.v));
        Fs.push_back(std::move(fr.F));
    }
    const Grid g = vs.front().grid();
    return AdjointSolution{Path(g, times, std::move(vs)), Path(g, times, std::move(Fs)), std::move(eff), vmin, vmax,
                           std::move(warnings)};
}

/// Frames of the optimal fluctuation path at `times` (all within [0, T]).
inline AdjointSolution adjoint_path(const DensityProfile& gamma, const Params& prm, double T,
                                    const std::vector<double>& times, int K = 60) {
    prm.require_nondegenerate();
    if (!times.empty() && times.back() > T) throw ValidationError("adjoint_path: times exceed T");
    const AdjointEvaluator ev(gamma, prm, K);
    return adjoint_path(ev, times);
}

/// Smallest probe time t = k * step (k >= 1) with |v(t) - rho_bar|_inf < eps.
inline std::optional<double> relaxation_time(const AdjointEvaluator& ev, double eps, double t_max, double step = 0.01) {
    if (!(eps > 0.0)) throw ValidationError("relaxation_time: need eps > 0");
    for (int k = 1; k * step <= t_max + 1e-12; ++k) {
        const double t = k * step;
        if (sup_distance(ev.frame(t).v, ev.rho()) < eps) return t;
    }
    return std::nullopt;
}

/// Times {0} followed by `count` geometrically spaced points from t_min to T.
inline std::vector<double> geometric_times(double T, int count, double t_min = 1e-7) {
    if (!(T > t_min) || count < 2) throw ValidationError("geometric_times: need T > t_min and count >= 2");
    std::vector<double> ts{0.0};
    const double r = std::log(T / t_min) / (count - 1);
    for (int k = 0; k < count; ++k) ts.push_back(k + 1 == count ? T : t_min * std::exp(r * k));
    return ts;
}

/// Weak-form residual against the test function G (with time derivative dG_dt).
inline double weak_form_residual(const Path& u, const Path& H, const Path& G, const Path& dG_dt, const Params& prm) {
    require_same_layout(u, H);
    require_same_layout(u, G);
    require_same_layout(u, dG_dt);
    const std::size_t nt = u.size();
    const double h = u.grid.h();
    std::vector<double> rhs(nt), udG(nt);
    for (std::size_t k = 0; k < nt; ++k) {
        const auto& uk = u.frames[k];
        const auto& Hk = H.frames[k];
        const auto& Gk = G.frames[k];
        const auto du = derivative(uk.values(), h);
        const auto dH = derivative(Hk.values(), h);
        const auto dG = derivative(Gk.values(), h);
        std::vector<double> bulk(du.size());
        for (std::size_t i = 0; i < du.size(); ++i) bulk[i] = -du[i] * dG[i] + 2.0 * sigma(uk[i]) * dH[i] * dG[i];
        rhs[k] = integrate(bulk, h) + boundary_costs(prm.beta, prm.B, uk.back(), Hk.back()).p * Gk.back() +
                 boundary_costs(prm.alpha, prm.A, uk.front(), Hk.front()).p * Gk.front();
        udG[k] = inner_product(uk, dG_dt.frames[k]);
    }
    const double lhs = inner_product(u.frames.back(), G.frames.back()) -
                       inner_product(u.frames.front(), G.frames.front()) - integrate_nonuniform(u.times, udG);
    return lhs - integrate_nonuniform(u.times, rhs);
}

}  // namespace mft
