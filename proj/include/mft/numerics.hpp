#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mft/error.hpp"

namespace mft {

/// Reservoir densities (alpha, beta) and couplings (A, B).
struct Params {
    double alpha = 0.2;
    double beta = 0.8;
    double A = 1.0;
    double B = 1.0;

    void validate() const {
        auto ok = [](double v) { return std::isfinite(v); };
        if (!ok(alpha) || !ok(beta) || !ok(A) || !ok(B)) {
            throw ValidationError("params: non-finite value");
        }
        if (!(alpha > 0.0 && alpha <= beta && beta < 1.0)) {
            std::ostringstream os;
            os << "params: need 0 < alpha <= beta < 1, got alpha=" << alpha << " beta=" << beta;
            throw ValidationError(os.str());
        }
        if (!(A > 0.0 && B > 0.0)) {
            std::ostringstream os;
            os << "params: need A > 0 and B > 0, got A=" << A << " B=" << B;
            throw ValidationError(os.str());
        }
    }

    /// Operations on the space of increasing profiles need alpha < beta.
    void require_nondegenerate() const {
        validate();
        if (!(alpha < beta)) {
            throw ValidationError("params: alpha == beta is degenerate for this operation");
        }
    }
};

inline double sigma(double a) { return a * (1.0 - a); }
inline double logit(double a) { return std::log(a / (1.0 - a)); }
inline double logistic(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

class Grid {
public:
    explicit Grid(int n) : n_(n) {
        if (n < 2) {
            throw ValidationError("grid: need n >= 2 intervals, got " + std::to_string(n));
        }
    }

    int n() const noexcept { return n_; }
    std::size_t size() const noexcept { return static_cast<std::size_t>(n_) + 1; }
    double h() const noexcept { return 1.0 / n_; }
    double x(std::size_t i) const noexcept { return static_cast<double>(i) / n_; }

    std::vector<double> nodes() const {
        std::vector<double> xs(size());
        for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = x(i);
        return xs;
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    int n_;
};

inline Grid make_grid(int n) { return Grid(n); }

/// Grid samples of a real function on [0,1].
class Profile {
public:
    explicit Profile(Grid grid) : grid_(grid), v_(grid.size(), 0.0) {}

    Profile(Grid grid, std::vector<double> values) : grid_(grid), v_(std::move(values)) {
        if (v_.size() != grid_.size()) {
            throw ValidationError("profile: expected " + std::to_string(grid_.size()) +
                                  " values, got " + std::to_string(v_.size()));
        }
        for (std::size_t i = 0; i < v_.size(); ++i) {
            if (!std::isfinite(v_[i])) {
                throw ValidationError("profile: non-finite value at node " + std::to_string(i));
            }
        }
    }

    template <class Fn>
    static Profile from_function(Grid grid, Fn&& f) {
        std::vector<double> v(grid.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(grid.x(i));
        return Profile(grid, std::move(v));
    }

    static Profile constant(Grid grid, double c) {
        return Profile(grid, std::vector<double>(grid.size(), c));
    }

    const Grid& grid() const noexcept { return grid_; }
    std::size_t size() const noexcept { return v_.size(); }
    double operator[](std::size_t i) const noexcept { return v_[i]; }
    const std::vector<double>& values() const& noexcept { return v_; }
    std::vector<double> values() && noexcept { return std::move(v_); }
    double front() const noexcept { return v_.front(); }
    double back() const noexcept { return v_.back(); }
    double min() const { return *std::min_element(v_.begin(), v_.end()); }
    double max() const { return *std::max_element(v_.begin(), v_.end()); }

    template <class Fn>
    Profile map(Fn&& f) const {
        std::vector<double> out(v_.size());
        for (std::size_t i = 0; i < v_.size(); ++i) out[i] = f(v_[i]);
        return Profile(grid_, std::move(out));
    }

    Profile& operator+=(const Profile& o) { return zip_assign(o, [](double a, double b) { return a + b; }); }
    Profile& operator-=(const Profile& o) { return zip_assign(o, [](double a, double b) { return a - b; }); }
    Profile& operator*=(double s) {
        for (auto& v : v_) v *= s;
        return *this;
    }

    friend Profile operator+(Profile a, const Profile& b) { return a += b; }
    friend Profile operator-(Profile a, const Profile& b) { return a -= b; }
    friend Profile operator*(Profile a, double s) { return a *= s; }
    friend Profile operator*(double s, Profile a) { return a *= s; }

protected:
    std::vector<double>& mutable_values() noexcept { return v_; }

private:
    template <class Op>
    Profile& zip_assign(const Profile& o, Op op) {
        if (!(o.grid_ == grid_)) throw ValidationError("profile: grid mismatch");
        for (std::size_t i = 0; i < v_.size(); ++i) v_[i] = op(v_[i], o.v_[i]);
        return *this;
    }

    Grid grid_;
    std::vector<double> v_;
};

/// A profile with every value in [0,1].
class DensityProfile : public Profile {
public:
    DensityProfile(Grid grid, std::vector<double> values) : Profile(grid, std::move(values)) { check(); }
    explicit DensityProfile(Profile p) : Profile(std::move(p)) { check(); }

    template <class Fn>
    static DensityProfile from_function(Grid grid, Fn&& f) {
        return DensityProfile(Profile::from_function(grid, std::forward<Fn>(f)));
    }

    /// Clamps values within `tol` of [0,1]; rejects anything further out.
    static DensityProfile clamped(const Profile& p, double tol) {
        std::vector<double> v = p.values();
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (v[i] < -tol || v[i] > 1.0 + tol) {
                std::ostringstream os;
                os << "density: value " << v[i] << " at node " << i << " outside [0,1] beyond tolerance " << tol;
                throw ValidationError(os.str());
            }
            v[i] = std::clamp(v[i], 0.0, 1.0);
        }
        return DensityProfile(p.grid(), std::move(v));
    }

private:
    void check() const {
        for (std::size_t i = 0; i < size(); ++i) {
            const double v = (*this)[i];
            if (v < 0.0 || v > 1.0) {
                std::ostringstream os;
                os << "density: value " << v << " at node " << i << " outside [0,1]";
                throw ValidationError(os.str());
            }
        }
    }
};

/// Time-indexed frames on a shared grid.
struct Path {
    Grid grid;
    std::vector<double> times;
    std::vector<Profile> frames;

    Path(Grid g, std::vector<double> ts, std::vector<Profile> fs)
        : grid(g), times(std::move(ts)), frames(std::move(fs)) {
        if (times.size() != frames.size()) throw ValidationError("path: times/frames size mismatch");
        if (times.empty()) throw ValidationError("path: no frames");
        for (std::size_t k = 0; k < frames.size(); ++k) {
            if (!(frames[k].grid() == grid)) throw ValidationError("path: frame grid mismatch");
            if (!std::isfinite(times[k]) || times[k] < 0.0) throw ValidationError("path: invalid time");
            if (k > 0 && !(times[k] > times[k - 1])) throw ValidationError("path: times not strictly increasing");
        }
    }

    std::size_t size() const noexcept { return frames.size(); }
    double t_final() const noexcept { return times.back(); }
};

inline void require_same_grid(const Profile& f, const Profile& g) {
    if (!(f.grid() == g.grid())) throw ValidationError("grid mismatch");
}

inline void require_same_layout(const Path& a, const Path& b) {
    if (!(a.grid == b.grid)) throw ValidationError("path grid mismatch");
    if (a.times.size() != b.times.size()) throw ValidationError("path time count mismatch");
    for (std::size_t k = 0; k < a.times.size(); ++k) {
        if (std::abs(a.times[k] - b.times[k]) > 1e-12 * std::max(1.0, a.times[k])) {
            throw ValidationError("path time mismatch at frame " + std::to_string(k));
        }
    }
}

/// Frame-wise time derivative: three-point second-order differences on the (possibly uneven) times.
inline Path time_derivative(const Path& u) {
    const std::size_t nt = u.size();
    if (nt < 2) throw ValidationError("time_derivative: need at least 2 frames");
    const auto& t = u.times;
    std::vector<Profile> out;
    out.reserve(nt);
    for (std::size_t k = 0; k < nt; ++k) {
        double a = 0.0, b = 0.0, c = 0.0;
        std::size_t k0 = 0;
        if (nt == 2) {
            k0 = 0;
            a = -1.0 / (t[1] - t[0]);
            b = -a;
        } else {
            k0 = k == 0 ? 0 : (k + 1 == nt ? nt - 3 : k - 1);
            const double h1 = t[k0 + 1] - t[k0], h2 = t[k0 + 2] - t[k0 + 1];
            if (k == 0) {
                a = -(2.0 * h1 + h2) / (h1 * (h1 + h2));
                b = (h1 + h2) / (h1 * h2);
                c = -h1 / (h2 * (h1 + h2));
            } else if (k + 1 == nt) {
                a = h2 / (h1 * (h1 + h2));
                b = -(h1 + h2) / (h1 * h2);
                c = (h1 + 2.0 * h2) / (h2 * (h1 + h2));
            } else {
                a = -h2 / (h1 * (h1 + h2));
                b = (h2 - h1) / (h1 * h2);
                c = h1 / (h2 * (h1 + h2));
            }
        }
        std::vector<double> d(u.grid.size());
        for (std::size_t i = 0; i < d.size(); ++i) {
            d[i] = a * u.frames[k0][i] + b * u.frames[k0 + 1][i] + (nt == 2 ? 0.0 : c * u.frames[k0 + 2][i]);
        }
        out.emplace_back(u.grid, std::move(d));
    }
    return Path(u.grid, u.times, std::move(out));
}

// ---- quadrature -----------------------------------------------------------

inline double integrate(std::span<const double> f, double h) {
    double s = 0.5 * (f.front() + f.back());
    for (std::size_t i = 1; i + 1 < f.size(); ++i) s += f[i];
    return s * h;
}

/// Composite trapezoid value of \f$\int_0^1 f\f$.
inline double integrate(const Profile& f) { return integrate(f.values(), f.grid().h()); }

/// Composite trapezoid value of \f$\int_0^1 f g\f$.
inline double inner_product(const Profile& f, const Profile& g) {
    require_same_grid(f, g);
    const std::size_t m = f.size();
    double s = 0.5 * (f[0] * g[0] + f[m - 1] * g[m - 1]);
    for (std::size_t i = 1; i + 1 < m; ++i) s += f[i] * g[i];
    return s * f.grid().h();
}

/// Running trapezoid integral from 0 to each node.
inline std::vector<double> cumulative_integral(std::span<const double> f, double h) {
    std::vector<double> c(f.size(), 0.0);
    for (std::size_t i = 1; i < f.size(); ++i) c[i] = c[i - 1] + 0.5 * h * (f[i - 1] + f[i]);
    return c;
}

/// Trapezoid rule on a non-uniform abscissa.
inline double integrate_nonuniform(std::span<const double> t, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t k = 1; k < t.size(); ++k) s += 0.5 * (t[k] - t[k - 1]) * (y[k] + y[k - 1]);
    return s;
}

// ---- finite differences ---------------------------------------------------

inline std::vector<double> derivative(std::span<const double> f, double h) {
    const std::size_t m = f.size();
    if (m < 3) throw ValidationError("derivative: need at least 3 nodes");
    std::vector<double> d(m);
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    d[m - 1] = (3.0 * f[m - 1] - 4.0 * f[m - 2] + f[m - 3]) / (2.0 * h);
    for (std::size_t i = 1; i + 1 < m; ++i) d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    return d;
}

/// Second-order discrete derivative; one-sided at the endpoints.
inline Profile derivative(const Profile& f) {
    return Profile(f.grid(), derivative(f.values(), f.grid().h()));
}

/// Second-order discrete Laplacian; one-sided four-point stencils at the endpoints.
inline Profile laplacian(const Profile& f) {
    const std::size_t m = f.size();
    if (f.grid().n() < 4) throw ValidationError("laplacian: need n >= 4");
    const double h2 = f.grid().h() * f.grid().h();
    std::vector<double> L(m);
    L[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2;
    L[m - 1] = (2.0 * f[m - 1] - 5.0 * f[m - 2] + 4.0 * f[m - 3] - f[m - 4]) / h2;
    for (std::size_t i = 1; i + 1 < m; ++i) L[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / h2;
    return Profile(f.grid(), std::move(L));
}

/// Seventh-order one-sided derivatives at x=0 and x=1; lower order on small grids.
inline std::pair<double, double> endpoint_derivatives(const Profile& f) {
    const std::size_t m = f.size();
    const double h = f.grid().h();
    if (m < 5) {
        const auto d = derivative(f.values(), h);
        return {d.front(), d.back()};
    }
    static constexpr double c8[8] = {-363.0 / 140.0, 7.0, -21.0 / 2.0, 35.0 / 3.0, -35.0 / 4.0, 21.0 / 5.0, -7.0 / 6.0, 1.0 / 7.0};
    static constexpr double c5[5] = {-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -1.0 / 4.0};
    const double* c = m >= 9 ? c8 : c5;
    const std::size_t w = m >= 9 ? 8 : 5;
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t k = 0; k < w; ++k) {
        d0 += c[k] * f[k];
        d1 -= c[k] * f[m - 1 - k];
    }
    return {d0 / h, d1 / h};
}

// ---- norms ----------------------------------------------------------------

enum class NormKind { L2, Linf, C1, H1 };

inline NormKind parse_norm_kind(std::string_view s) {
    if (s == "L2") return NormKind::L2;
    if (s == "Linf") return NormKind::Linf;
    if (s == "C1") return NormKind::C1;
    if (s == "H1") return NormKind::H1;
    throw ValidationError("norm: unknown kind '" + std::string(s) + "'");
}

/// Trapezoid with the first Euler-Maclaurin end correction; exact for cubics.
inline double integrate_corrected(const Profile& g) {
    const auto [d0, d1] = endpoint_derivatives(g);
    const double h = g.grid().h();
    return integrate(g) - h * h / 12.0 * (d1 - d0);
}

namespace detail {
inline double squared_l2(const Profile& f) {
    return std::max(0.0, integrate_corrected(f.map([](double v) { return v * v; })));
}
}  // namespace detail

inline double norm(const Profile& f, NormKind kind) {
    switch (kind) {
        case NormKind::L2:
            return std::sqrt(detail::squared_l2(f));
        case NormKind::Linf: {
            double m = 0.0;
            for (double v : f.values()) m = std::max(m, std::abs(v));
            return m;
        }
        case NormKind::C1: {
            const auto d = derivative(f.values(), f.grid().h());
            double m = 0.0;
            for (std::size_t i = 0; i < f.size(); ++i) m = std::max(m, std::abs(f[i]) + std::abs(d[i]));
            return m;
        }
        case NormKind::H1: {
            return std::sqrt(detail::squared_l2(f) + detail::squared_l2(derivative(f)));
        }
    }
    throw ValidationError("norm: unknown kind");
}

inline double norm(const Profile& f, std::string_view kind) { return norm(f, parse_norm_kind(kind)); }

inline double sup_distance(const Profile& f, const Profile& g) { return norm(f - g, NormKind::Linf); }

// ---- stationary profile ---------------------------------------------------

/// Slope of the linear stationary profile.
inline double stationary_slope(const Params& p) { return (p.beta - p.alpha) / (1.0 + p.A + p.B); }

inline double stationary_value(const Params& p, double x) {
    return (p.alpha * (1.0 + p.B) + p.beta * p.A) / (1.0 + p.A + p.B) + stationary_slope(p) * x;
}

inline DensityProfile stationary_profile(const Params& params, const Grid& grid) {
    params.validate();
    return DensityProfile::from_function(grid, [&](double x) { return stationary_value(params, x); });
}

// ---- linear algebra -------------------------------------------------------

/// Thomas algorithm; `lower[0]` and `upper[m-1]` are ignored.
inline std::vector<double> solve_tridiagonal(std::vector<double> lower, std::vector<double> diag,
                                             std::vector<double> upper, std::vector<double> rhs) {
    const std::size_t m = diag.size();
    for (std::size_t i = 1; i < m; ++i) {
        if (diag[i - 1] == 0.0) throw NumericalError("tridiagonal solve: zero pivot at row " + std::to_string(i - 1));
        const double w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    if (diag[m - 1] == 0.0) throw NumericalError("tridiagonal solve: zero pivot at last row");
    std::vector<double> x(m);
    x[m - 1] = rhs[m - 1] / diag[m - 1];
    for (std::size_t i = m - 1; i-- > 0;) x[i] = (rhs[i] - upper[i] * x[i + 1]) / diag[i];
    return x;
}

/// Linear interpolation of samples (xs ascending) at x.
inline double interpolate(std::span<const double> xs, std::span<const double> ys, double x) {
    if (x <= xs.front()) return ys.front();
    if (x >= xs.back()) return ys.back();
    const auto it = std::upper_bound(xs.begin(), xs.end(), x);
    const std::size_t j = static_cast<std::size_t>(it - xs.begin());
    const double w = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
    return (1.0 - w) * ys[j - 1] + w * ys[j];
}

}  // namespace mft
