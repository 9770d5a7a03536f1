#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/LU>
#include <boost/math/tools/roots.hpp>

#include "mft/numerics.hpp"

namespace mft {

namespace spectral_detail {

/// Pole-free form of the secular equation in theta = sqrt(lambda).
inline double secular(const Params& p, double th) {
    return std::sin(th) * (p.A * p.B * th * th - 1.0) - (p.A + p.B) * th * std::cos(th);
}

inline double secular_scale(const Params& p, double th) {
    return std::max(1.0, std::abs(p.A * p.B * th * th - 1.0) + (p.A + p.B) * th);
}

inline double mode(const Params& p, double th, double x) { return std::cos(th * x) + std::sin(th * x) / (p.A * th); }
inline double mode_d(const Params& p, double th, double x) { return -th * std::sin(th * x) + std::cos(th * x) / p.A; }

/// Trapezoid of f*g with the leading Euler-Maclaurin end correction; df0, df1 are (fg)' at 0 and 1.
inline double corrected_trapezoid(std::span<const double> fg, double h, double dfg0, double dfg1) {
    return integrate(fg, h) - h * h / 12.0 * (dfg1 - dfg0);
}

}  // namespace spectral_detail

/// Scaled residual of the secular equation at lambda (dimensionless, 0 at a root).
inline double eigen_residual(const Params& p, double lambda) {
    const double th = std::sqrt(lambda);
    return std::abs(spectral_detail::secular(p, th)) / spectral_detail::secular_scale(p, th);
}

/// The K smallest Robin eigenvalues, ascending.
inline std::vector<double> eigenvalues(const Params& p, int K) {
    p.validate();
    if (K < 1) throw ValidationError("eigenvalues: need K >= 1");
    using std::numbers::pi;
    const double th_star = 1.0 / std::sqrt(p.A * p.B);
    auto f = [&](double th) { return spectral_detail::secular(p, th); };
    auto tol = [](double a, double b) { return std::abs(b - a) <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(a)); };

    std::vector<double> out;
    for (int k = 0; static_cast<int>(out.size()) < K; ++k) {
        const double lo = k == 0 ? 0.0 : (k - 0.5) * pi;
        const double hi = (k + 0.5) * pi;
        std::vector<double> cuts{lo};
        if (th_star > lo && th_star < hi) cuts.push_back(th_star);
        cuts.push_back(hi);
        for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
            const double a = cuts[s], b = cuts[s + 1];
            // The first branch carries no root below the hyperbola pole.
            if (k == 0 && b <= th_star) continue;
            const double fa = a == 0.0 ? -1.0 : f(a);
            const double fb = f(b);
            if (fa == 0.0 || fb == 0.0 || (fa > 0.0) == (fb > 0.0)) {
                std::ostringstream os;
                os << "eigenvalues: no sign change on theta interval (" << a << ", " << b << ")";
                throw NumericalError(os.str());
            }
            const auto r = boost::math::tools::bisect(f, a, b, tol);
            const double th = 0.5 * (r.first + r.second);
            out.push_back(th * th);
            if (static_cast<int>(out.size()) == K) break;
        }
    }
    for (std::size_t j = 0; j < out.size(); ++j) {
        if (eigen_residual(p, out[j]) >= 1e-10) {
            throw NumericalError("eigenvalues: residual test failed at index " + std::to_string(j));
        }
        if (j > 0 && !(out[j] > out[j - 1])) throw NumericalError("eigenvalues: roots not increasing");
    }
    return out;
}

/// Amplitude making the continuous L2 norm of the mode equal to 1.
inline double closed_form_amplitude(const Params& p, double lambda) {
    const double th = std::sqrt(lambda);
    const double b = 1.0 / (p.A * th);
    const double s2 = std::sin(2.0 * th) / (4.0 * th);
    const double n2 = 0.5 + s2 + b * b * (0.5 - s2) + b * std::sin(th) * std::sin(th) / th;
    return 1.0 / std::sqrt(n2);
}

/// Samples of the eigenfunction for `lambda`, scaled to unit discrete norm.
inline Profile eigenfunction(const Params& p, double lambda, const Grid& grid) {
    p.validate();
    if (!(lambda > 0.0) || eigen_residual(p, lambda) >= 1e-10) {
        throw ValidationError("eigenfunction: lambda is not a root of the secular equation");
    }
    const double th = std::sqrt(lambda);
    Profile g = Profile::from_function(grid, [&](double x) { return spectral_detail::mode(p, th, x); });
    std::vector<double> g2(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) g2[i] = g[i] * g[i];
    const double d0 = 2.0 * g.front() * spectral_detail::mode_d(p, th, 0.0);
    const double d1 = 2.0 * g.back() * spectral_detail::mode_d(p, th, 1.0);
    const double n2 = spectral_detail::corrected_trapezoid(g2, grid.h(), d0, d1);
    return g * (1.0 / std::sqrt(n2));
}

/// Green function of minus the Robin Laplacian.
inline double green_kernel(const Params& p, double x, double y) {
    if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0)) {
        throw ValidationError("green_kernel: arguments must lie in [0,1]");
    }
    const double lo = std::min(x, y), hi = std::max(x, y);
    return (p.B + 1.0 - hi) * (p.A + lo) / (1.0 + p.A + p.B);
}

/// Quadrature of the Green operator applied to f.
inline Profile apply_green(const Params& p, const Profile& f) {
    const Grid& g = f.grid();
    std::vector<double> out(f.size()), row(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        for (std::size_t j = 0; j < f.size(); ++j) row[j] = green_kernel(p, g.x(i), g.x(j)) * f[j];
        out[i] = integrate(row, g.h());
    }
    return Profile(g, std::move(out));
}

/**
 * @brief Truncated Robin eigenbasis sampled on a grid.
 *
 * Projections use the trapezoid rule with its first end correction, using exact
 * mode derivatives and one-sided derivatives of the projected function, followed
 * by a solve against the same quadrature applied to the modes themselves, so that
 * anything in the span is reproduced to rounding.
 */
class SpectralBasis {
public:
    SpectralBasis(const Params& p, const Grid& grid, int K)
        : params_(p), grid_(grid), lambda_(mft::eigenvalues(p, K)) {
        const std::size_t m = grid.size();
        funcs_.reserve(lambda_.size());
        derivs_.reserve(lambda_.size());
        for (double lam : lambda_) {
            Profile f = mft::eigenfunction(p, lam, grid);
            const double th = std::sqrt(lam);
            const double scale = f[0];  // mode(0) == 1
            Profile d = Profile::from_function(grid, [&](double x) { return scale * spectral_detail::mode_d(p, th, x); });
            funcs_.push_back(std::move(f));
            derivs_.push_back(std::move(d));
        }
        const std::size_t k = lambda_.size();
        gram_.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
        std::vector<double> prod(m);
        for (std::size_t a = 0; a < k; ++a) {
            for (std::size_t b = a; b < k; ++b) {
                for (std::size_t i = 0; i < m; ++i) prod[i] = funcs_[a][i] * funcs_[b][i];
                const double d0 = derivs_[a].front() * funcs_[b].front() + funcs_[a].front() * derivs_[b].front();
                const double d1 = derivs_[a].back() * funcs_[b].back() + funcs_[a].back() * derivs_[b].back();
                const double v = spectral_detail::corrected_trapezoid(prod, grid.h(), d0, d1);
                gram_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = v;
                gram_(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = v;
            }
        }
        Eigen::LLT<Eigen::MatrixXd> llt(gram_);
        if (llt.info() != Eigen::Success) throw NumericalError("spectral basis: Gram matrix not positive definite");
        // Same quadrature as coefficients(), one-sided derivatives included, so the span maps back exactly.
        Eigen::MatrixXd proj(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
        for (std::size_t b = 0; b < k; ++b) {
            const auto [fd0, fd1] = endpoint_derivatives(funcs_[b]);
            for (std::size_t a = 0; a < k; ++a) {
                proj(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = raw_inner(funcs_[b], fd0, fd1, a);
            }
        }
        lu_.compute(proj);
    }

    const Params& params() const noexcept { return params_; }
    const Grid& grid() const noexcept { return grid_; }
    int count() const noexcept { return static_cast<int>(lambda_.size()); }
    const std::vector<double>& eigenvalues() const noexcept { return lambda_; }
    const Profile& eigenfunction(int j) const { return funcs_.at(static_cast<std::size_t>(j)); }
    /// Exact derivative of eigenfunction j sampled on the grid.
    const Profile& eigenfunction_derivative(int j) const { return derivs_.at(static_cast<std::size_t>(j)); }
    const Eigen::MatrixXd& gram() const noexcept { return gram_; }

    /// End-corrected quadrature of f * f_j.
    double raw_inner(const Profile& f, int j) const {
        require_same_grid(f, funcs_[0]);
        const auto [fd0, fd1] = endpoint_derivatives(f);
        return raw_inner(f, fd0, fd1, static_cast<std::size_t>(j));
    }

    /// Expansion coefficients of f in the basis.
    std::vector<double> coefficients(const Profile& f) const {
        require_same_grid(f, funcs_[0]);
        const auto [fd0, fd1] = endpoint_derivatives(f);
        Eigen::VectorXd b(count());
        for (int j = 0; j < count(); ++j) b(j) = raw_inner(f, fd0, fd1, static_cast<std::size_t>(j));
        const Eigen::VectorXd c = lu_.solve(b);
        return {c.data(), c.data() + c.size()};
    }

    Profile synthesize(std::span<const double> coeffs) const {
        std::vector<double> out(grid_.size(), 0.0);
        for (std::size_t j = 0; j < coeffs.size() && j < funcs_.size(); ++j) {
            const auto& f = funcs_[j].values();
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += coeffs[j] * f[i];
        }
        return Profile(grid_, std::move(out));
    }

    Profile synthesize_derivative(std::span<const double> coeffs) const {
        std::vector<double> out(grid_.size(), 0.0);
        for (std::size_t j = 0; j < coeffs.size() && j < derivs_.size(); ++j) {
            const auto& f = derivs_[j].values();
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += coeffs[j] * f[i];
        }
        return Profile(grid_, std::move(out));
    }

    /// Lower and upper constants of lambda_j / j^2 over the basis.
    double c0() const { return ratio_bound(false); }
    double c1() const { return ratio_bound(true); }

    /// Largest sup norm over the eigenfunctions.
    double sup_constant() const {
        double m = 0.0;
        for (const auto& f : funcs_) m = std::max(m, norm(f, NormKind::Linf));
        return m;
    }

private:
    double raw_inner(const Profile& f, double fd0, double fd1, std::size_t j) const {
        const auto& e = funcs_[j];
        const auto& d = derivs_[j];
        const std::size_t m = e.size();
        double s = 0.5 * (f[0] * e[0] + f[m - 1] * e[m - 1]);
        for (std::size_t i = 1; i + 1 < m; ++i) s += f[i] * e[i];
        s *= grid_.h();
        const double d0 = fd0 * e.front() + f.front() * d.front();
        const double d1 = fd1 * e.back() + f.back() * d.back();
        return s - grid_.h() * grid_.h() / 12.0 * (d1 - d0);
    }

    double ratio_bound(bool upper) const {
        double r = upper ? 0.0 : std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < lambda_.size(); ++j) {
            const double q = lambda_[j] / static_cast<double>((j + 1) * (j + 1));
            r = upper ? std::max(r, q) : std::min(r, q);
        }
        return r;
    }

    Params params_;
    Grid grid_;
    std::vector<double> lambda_;
    std::vector<Profile> funcs_;
    std::vector<Profile> derivs_;
    Eigen::MatrixXd gram_;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
};

/// Both evaluations of the H_R norm squared; `boundary` is canonical.
struct HrNorm {
    double boundary = 0.0;
    double spectral = 0.0;
    double value() const noexcept { return boundary; }
};

inline HrNorm hr_norm(const Profile& f, const Params& p, const SpectralBasis& basis) {
    require_same_grid(f, basis.eigenfunction(0));
    const Profile d = derivative(f);
    HrNorm r;
    r.boundary = f.front() * f.front() / p.A + inner_product(d, d) + f.back() * f.back() / p.B;
    const auto c = basis.coefficients(f);
    for (std::size_t k = 0; k < c.size(); ++k) r.spectral += basis.eigenvalues()[k] * c[k] * c[k];
    return r;
}

/// Truncated Robin heat semigroup applied to f.
inline Profile semigroup_apply(const Profile& f, double t, const SpectralBasis& basis) {
    if (!(t >= 0.0)) throw ValidationError("semigroup_apply: need t >= 0");
    auto c = basis.coefficients(f);
    for (std::size_t k = 0; k < c.size(); ++k) c[k] *= std::exp(-basis.eigenvalues()[k] * t);
    return basis.synthesize(c);
}

/// Operator norm squared of P_t from L2 into H_R on the truncated space.
inline double smoothing_constant(const SpectralBasis& basis, double t) {
    if (!(t > 0.0)) throw ValidationError("smoothing_constant: need t > 0");
    double m = 0.0;
    for (double lam : basis.eigenvalues()) m = std::max(m, lam * std::exp(-2.0 * lam * t));
    return m;
}

/// Constant of the sup bound |f|_inf^2 <= 2 max(A,1) |f|_{H_R}^2.
inline double sup_bound_constant(const Params& p) { return 2.0 * std::max(p.A, 1.0); }

}  // namespace mft
