#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <sstream>
#include <thread>
#include <vector>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/chi_squared.hpp>

#include "mft/dynamics.hpp"
#include "mft/numerics.hpp"

namespace mft {

/// SplitMix64: output k is a fixed bijective mix of seed + k * golden-ratio increment.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() noexcept {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in (0, 1].
    double uniform() noexcept { return (static_cast<double>(next() >> 11) + 1.0) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

/// Occupations of the N-1 sites 1/N, ..., (N-1)/N.
struct LatticeState {
    int N = 0;
    std::vector<std::uint8_t> occ;

    LatticeState(int n, std::vector<std::uint8_t> o) : N(n), occ(std::move(o)) {
        if (N < 3) throw ValidationError("lattice: need N >= 3");
        if (occ.size() != static_cast<std::size_t>(N - 1)) throw ValidationError("lattice: need N-1 sites");
        for (auto v : occ) {
            if (v > 1) throw ValidationError("lattice: occupations must be 0 or 1");
        }
    }

    int particles() const {
        int s = 0;
        for (auto v : occ) s += v;
        return s;
    }
};

/// Mean occupation over `bins` equal sub-intervals of [0,1]; site k sits at k/N.
inline std::vector<double> bin_means(const LatticeState& s, int bins) {
    if (bins < 1 || bins > s.N - 1) throw ValidationError("bin_means: need 1 <= bins <= N-1");
    std::vector<double> sum(static_cast<std::size_t>(bins), 0.0), cnt(static_cast<std::size_t>(bins), 0.0);
    for (int k = 1; k < s.N; ++k) {
        const auto b = static_cast<std::size_t>(std::min<long>(bins - 1, static_cast<long>(k) * bins / s.N));
        sum[b] += s.occ[static_cast<std::size_t>(k - 1)];
        cnt[b] += 1.0;
    }
    for (std::size_t b = 0; b < sum.size(); ++b) sum[b] = cnt[b] > 0.0 ? sum[b] / cnt[b] : 0.0;
    return sum;
}

/// Bin averages over grid.n bins, interpolated from bin centres onto the grid nodes.
inline DensityProfile empirical_profile(const LatticeState& s, const Grid& grid) {
    if (grid.n() > s.N - 1) throw ValidationError("empirical_profile: need grid.n <= N-1");
    const auto m = bin_means(s, grid.n());
    std::vector<double> centres(m.size());
    for (std::size_t b = 0; b < m.size(); ++b) centres[b] = (static_cast<double>(b) + 0.5) / grid.n();
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = interpolate(centres, m, grid.x(i));
    return DensityProfile(grid, std::move(v));
}

struct SimResult {
    std::vector<double> times;
    /// Empirical profile per sample on Grid(bins).
    std::vector<DensityProfile> profiles;
    /// Raw bin means per sample.
    std::vector<std::vector<double>> bin_means;
    std::vector<int> particle_counts;
    int bins = 0;
    std::uint64_t seed = 0;
    std::uint64_t event_count = 0;
    std::uint64_t rate_checks = 0;
};

struct SimOptions {
    int bins = 10;
    std::uint64_t max_events = 50'000'000'000ULL;
    std::uint64_t check_every = 1'000'000ULL;
};

namespace sim_detail {

/// Discordant bonds with O(1) insert, erase and uniform pick.
class BondSet {
public:
    explicit BondSet(std::size_t bonds) : pos_(bonds, npos) {}

    void set(std::size_t b, bool on) {
        if (on && pos_[b] == npos) {
            pos_[b] = list_.size();
            list_.push_back(b);
        } else if (!on && pos_[b] != npos) {
            const std::size_t last = list_.back();
            list_[pos_[b]] = last;
            pos_[last] = pos_[b];
            list_.pop_back();
            pos_[b] = npos;
        }
    }
    std::size_t size() const noexcept { return list_.size(); }
    std::size_t at(std::size_t i) const noexcept { return list_[i]; }

private:
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::vector<std::size_t> list_;
    std::vector<std::size_t> pos_;
};

inline std::vector<double> sample_grid(double T, double dt) {
    std::vector<double> ts;
    const auto last = static_cast<long>(std::floor(T / dt + 1e-9));
    for (long k = 0; k <= last; ++k) ts.push_back(static_cast<double>(k) * dt);
    return ts;
}

}  // namespace sim_detail

/**
 * @brief Rejection-free simulation of the boundary-driven exclusion process, sampled at `sample_times`.
 *
 * Bulk swaps at rate N^2 per discordant bond; the end sites flip at rates
 * (N/A)[(1-eta)alpha + (1-alpha)eta] and (N/B)[(1-eta)beta + (1-beta)eta].
 */
inline SimResult simulate_at(const Params& prm, int N, const Profile& gamma0, std::vector<double> sample_times,
                             std::uint64_t seed, const SimOptions& opt = {}) {
    prm.validate();
    if (N < 3) throw ValidationError("simulate: need N >= 3");
    if (sample_times.empty()) throw ValidationError("simulate: no sample times");
    for (std::size_t k = 0; k < sample_times.size(); ++k) {
        if (!(sample_times[k] >= 0.0) || (k > 0 && !(sample_times[k] > sample_times[k - 1]))) {
            throw ValidationError("simulate: sample times must be non-negative and increasing");
        }
    }
    if (opt.bins < 1 || opt.bins > N - 1) throw ValidationError("simulate: need 1 <= bins <= N-1");
    const DensityProfile g0 = DensityProfile::clamped(gamma0, 0.0);
    const Grid analysis(std::max(2, opt.bins));

    SplitMix64 rng(seed);
    const std::size_t sites = static_cast<std::size_t>(N - 1);
    std::vector<std::uint8_t> occ(sites);
    const auto xs = g0.grid().nodes();
    for (std::size_t k = 0; k < sites; ++k) {
        const double p = interpolate(xs, g0.values(), static_cast<double>(k + 1) / N);
        occ[k] = rng.uniform() <= p ? 1 : 0;
    }
    const std::size_t bonds = sites - 1;
    sim_detail::BondSet disc(bonds);
    for (std::size_t b = 0; b < bonds; ++b) disc.set(b, occ[b] != occ[b + 1]);

    const double n2 = static_cast<double>(N) * N;
    const double left_scale = N / prm.A, right_scale = N / prm.B;
    auto left_rate = [&] { return left_scale * (occ.front() ? 1.0 - prm.alpha : prm.alpha); };
    auto right_rate = [&] { return right_scale * (occ.back() ? 1.0 - prm.beta : prm.beta); };
    auto touch = [&](std::size_t b) { disc.set(b, occ[b] != occ[b + 1]); };

    SimResult res;
    res.bins = opt.bins;
    res.seed = seed;
    auto record = [&](double t) {
        const LatticeState s(N, occ);
        res.times.push_back(t);
        res.bin_means.push_back(bin_means(s, opt.bins));
        if (opt.bins >= 2) res.profiles.push_back(empirical_profile(s, analysis));
        res.particle_counts.push_back(s.particles());
    };

    double t = 0.0;
    std::size_t next = 0;
    std::uint64_t events = 0;
    while (true) {
        const double bulk = n2 * static_cast<double>(disc.size());
        const double rl = left_rate(), rr = right_rate();
        const double total = bulk + rl + rr;
        const double t_next = t - std::log(rng.uniform()) / total;
        while (next < sample_times.size() && sample_times[next] < t_next) record(sample_times[next++]);
        if (next == sample_times.size()) break;
        t = t_next;
        const double r = (1.0 - rng.uniform()) * total;
        if (r < bulk) {
            const auto idx = std::min(disc.size() - 1, static_cast<std::size_t>(r / n2));
            const std::size_t b = disc.at(idx);
            occ[b] ^= 1;
            occ[b + 1] ^= 1;
            if (b > 0) touch(b - 1);
            if (b + 1 < bonds) touch(b + 1);
        } else if (r < bulk + rl) {
            occ.front() ^= 1;
            touch(0);
        } else {
            occ.back() ^= 1;
            touch(bonds - 1);
        }
        if (++events >= opt.max_events) {
            std::ostringstream os;
            os << "simulate: event budget of " << opt.max_events << " exhausted at t=" << t;
            throw NumericalError(os.str());
        }
        if (events % opt.check_every == 0) {
            std::size_t count = 0;
            for (std::size_t b = 0; b < bonds; ++b) count += occ[b] != occ[b + 1];
            const double recount = n2 * static_cast<double>(count) + left_rate() + right_rate();
            const double tracked = n2 * static_cast<double>(disc.size()) + left_rate() + right_rate();
            if (count != disc.size() || recount != tracked) {
                throw NumericalError("simulate: exit-rate bookkeeping disagrees with a direct recount");
            }
            ++res.rate_checks;
        }
    }
    res.event_count = events;
    return res;
}

/// Samples at 0, sample_dt, 2 sample_dt, ... up to T.
inline SimResult simulate(const Params& prm, int N, const Profile& gamma0, double T, double sample_dt,
                          std::uint64_t seed, const SimOptions& opt = {}) {
    if (!(T > 0.0)) throw ValidationError("simulate: need T > 0");
    if (!(sample_dt > 0.0)) throw ValidationError("simulate: need sample_dt > 0");
    return simulate_at(prm, N, gamma0, sim_detail::sample_grid(T, sample_dt), seed, opt);
}

inline int default_threads() {
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

/// Runs `replicas` independent trajectories with seeds seed + r, on up to `threads` workers.
inline std::vector<SimResult> simulate_replicas(const Params& prm, int N, const Profile& gamma0,
                                                const std::vector<double>& sample_times, std::uint64_t seed,
                                                int replicas, int threads, const SimOptions& opt = {}) {
    if (replicas < 1) throw ValidationError("simulate: need replicas >= 1");
    std::vector<SimResult> out(static_cast<std::size_t>(replicas));
    const int workers = std::max(1, std::min(threads, replicas));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    auto work = [&](int w) {
        try {
            for (int r = w; r < replicas; r += workers) {
                out[static_cast<std::size_t>(r)] =
                    simulate_at(prm, N, gamma0, sample_times, seed + static_cast<std::uint64_t>(r), opt);
            }
        } catch (...) {
            errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
    };
    if (workers == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work, w);
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

/// Replica mean and standard error of a per-replica statistic.
struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

inline MeanSe mean_se(const std::vector<double>& xs) {
    MeanSe r;
    const double n = static_cast<double>(xs.size());
    for (double x : xs) r.mean += x;
    r.mean /= n;
    if (xs.size() > 1) {
        double v = 0.0;
        for (double x : xs) v += (x - r.mean) * (x - r.mean);
        r.se = std::sqrt(v / (n - 1.0) / n);
    }
    return r;
}

/// Per-bin mean and standard error over replicas at each sample index.
struct BinStatistics {
    std::vector<double> times;
    std::vector<std::vector<double>> mean;
    std::vector<std::vector<double>> se;
};

inline BinStatistics bin_statistics(const std::vector<SimResult>& runs) {
    if (runs.empty()) throw ValidationError("bin_statistics: no runs");
    BinStatistics st;
    st.times = runs.front().times;
    const std::size_t bins = static_cast<std::size_t>(runs.front().bins);
    for (std::size_t k = 0; k < st.times.size(); ++k) {
        std::vector<double> m(bins), e(bins), xs(runs.size());
        for (std::size_t b = 0; b < bins; ++b) {
            for (std::size_t r = 0; r < runs.size(); ++r) xs[r] = runs[r].bin_means.at(k).at(b);
            const auto ms = mean_se(xs);
            m[b] = ms.mean;
            e[b] = ms.se;
        }
        st.mean.push_back(std::move(m));
        st.se.push_back(std::move(e));
    }
    return st;
}

/// Average of f over the sites k/N that fall in each bin.
template <class Fn>
std::vector<double> site_bin_average(int N, int bins, Fn&& f) {
    std::vector<double> sum(static_cast<std::size_t>(bins), 0.0), cnt(static_cast<std::size_t>(bins), 0.0);
    for (int k = 1; k < N; ++k) {
        const auto b = static_cast<std::size_t>(std::min<long>(bins - 1, static_cast<long>(k) * bins / N));
        sum[b] += f(static_cast<double>(k) / N);
        cnt[b] += 1.0;
    }
    for (std::size_t b = 0; b < sum.size(); ++b) sum[b] /= cnt[b];
    return sum;
}

struct HydroTimeReport {
    double t = 0.0;
    double discrepancy = 0.0;  // L-infinity over bins
    double max_se = 0.0;
    double max_z = 0.0;        // largest |mean - pde| / se over bins
    std::vector<double> mean, se, pde;
};

struct HydroReport {
    int N = 0;
    int replicas = 0;
    int bins = 0;
    std::uint64_t seed = 0;
    std::vector<HydroTimeReport> per_time;
    bool within_3se = true;
};

/// Replica-averaged bin profiles against the Robin heat flow at the same times.
inline HydroReport hydrodynamic_check(const Params& prm, int N, const DensityProfile& gamma0,
                                      const std::vector<double>& times, int replicas, std::uint64_t seed,
                                      int bins = 10, int threads = 1, int K = 60) {
    if (replicas < 8) throw ValidationError("hydrodynamic_check: need replicas >= 8");
    if (times.empty()) throw ValidationError("hydrodynamic_check: no times");
    std::vector<double> pde_times = times;
    const bool prepend = pde_times.front() != 0.0;
    if (prepend) pde_times.insert(pde_times.begin(), 0.0);
    const Path pde = solve_heat_robin(gamma0, prm, pde_times, K).path;
    const auto xs = gamma0.grid().nodes();

    SimOptions opt;
    opt.bins = bins;
    const auto runs = simulate_replicas(prm, N, gamma0, times, seed, replicas, threads, opt);
    const BinStatistics st = bin_statistics(runs);

    HydroReport rep;
    rep.N = N;
    rep.replicas = replicas;
    rep.bins = bins;
    rep.seed = seed;
    for (std::size_t k = 0; k < times.size(); ++k) {
        HydroTimeReport tr;
        tr.t = times[k];
        const auto& frame = pde.frames[k + (prepend ? 1 : 0)].values();
        tr.pde = site_bin_average(N, bins, [&](double x) { return interpolate(xs, frame, x); });
        tr.mean = st.mean[k];
        tr.se = st.se[k];
        for (int b = 0; b < bins; ++b) {
            const auto bb = static_cast<std::size_t>(b);
            const double d = std::abs(tr.mean[bb] - tr.pde[bb]);
            tr.discrepancy = std::max(tr.discrepancy, d);
            tr.max_se = std::max(tr.max_se, tr.se[bb]);
            tr.max_z = std::max(tr.max_z, tr.se[bb] > 0.0 ? d / tr.se[bb] : (d > 0.0 ? 1e300 : 0.0));
        }
        if (tr.discrepancy > 3.0 * tr.max_se) rep.within_3se = false;
        rep.per_time.push_back(std::move(tr));
    }
    return rep;
}

struct StationaryReport {
    int N = 0;
    int replicas = 0;
    int bins = 0;
    std::uint64_t seed = 0;
    std::vector<double> mean, se, oracle;
    double linf = 0.0;
    double max_z = 0.0;
    bool within_3se = true;
};

/// Time-averaged bin means after burn-in from Bernoulli(rho_bar), against rho_bar averaged per bin.
inline StationaryReport stationary_check(const Params& prm, int N, int replicas, std::uint64_t seed, double burn_in,
                                         double window, double sample_dt, int bins = 10, int threads = 1) {
    if (replicas < 2) throw ValidationError("stationary_check: need replicas >= 2");
    if (!(burn_in >= 0.0) || !(window > 0.0) || !(sample_dt > 0.0)) {
        throw ValidationError("stationary_check: need burn_in >= 0, window > 0, sample_dt > 0");
    }
    std::vector<double> ts;
    for (const double t : sim_detail::sample_grid(window, sample_dt)) ts.push_back(burn_in + t);
    if (ts.front() == 0.0) ts.erase(ts.begin());
    const DensityProfile rho = stationary_profile(prm, Grid(std::max(2, N - 1)));
    SimOptions opt;
    opt.bins = bins;
    const auto runs = simulate_replicas(prm, N, rho, ts, seed, replicas, threads, opt);

    StationaryReport rep;
    rep.N = N;
    rep.replicas = replicas;
    rep.bins = bins;
    rep.seed = seed;
    rep.oracle = site_bin_average(N, bins, [&](double x) { return stationary_value(prm, x); });
    std::vector<double> xs(runs.size());
    for (std::size_t b = 0; b < static_cast<std::size_t>(bins); ++b) {
        for (std::size_t r = 0; r < runs.size(); ++r) {
            double acc = 0.0;
            for (const auto& m : runs[r].bin_means) acc += m[b];
            xs[r] = acc / static_cast<double>(runs[r].bin_means.size());
        }
        const auto ms = mean_se(xs);
        rep.mean.push_back(ms.mean);
        rep.se.push_back(ms.se);
        const double d = std::abs(ms.mean - rep.oracle[b]);
        rep.linf = std::max(rep.linf, d);
        rep.max_z = std::max(rep.max_z, ms.se > 0.0 ? d / ms.se : (d > 0.0 ? 1e300 : 0.0));
        if (d > 3.0 * ms.se) rep.within_3se = false;
    }
    return rep;
}

/// Particle counts sampled every `spacing` after `burn_in`, pooled over replicas.
inline std::vector<int> equilibrium_counts(const Params& prm, int N, const Profile& gamma0, int replicas,
                                           int per_replica, double burn_in, double spacing, std::uint64_t seed,
                                           int threads = 1) {
    if (per_replica < 1) throw ValidationError("equilibrium_counts: need per_replica >= 1");
    std::vector<double> ts;
    for (int k = 0; k < per_replica; ++k) ts.push_back(burn_in + spacing * k);
    if (!(ts.front() > 0.0) || !(spacing > 0.0)) throw ValidationError("equilibrium_counts: need burn_in, spacing > 0");
    SimOptions opt;
    opt.bins = 1;
    std::vector<int> out;
    for (const auto& r : simulate_replicas(prm, N, gamma0, ts, seed, replicas, threads, opt)) {
        out.insert(out.end(), r.particle_counts.begin(), r.particle_counts.end());
    }
    return out;
}

/// Chi-square goodness of fit of particle counts against Binomial(N-1, rho).
struct ChiSquareResult {
    double statistic = 0.0;
    int dof = 0;
    double p_value = 0.0;
    std::size_t samples = 0;
};

inline ChiSquareResult binomial_chi_square(const std::vector<int>& counts, int trials, double rho) {
    if (counts.empty()) throw ValidationError("chi-square: no samples");
    const boost::math::binomial_distribution<double> dist(trials, rho);
    const double n = static_cast<double>(counts.size());
    std::vector<double> obs(static_cast<std::size_t>(trials) + 1, 0.0);
    for (int c : counts) obs.at(static_cast<std::size_t>(c)) += 1.0;
    // Merge outcomes from both tails inward until every cell expects at least 5.
    std::vector<std::pair<double, double>> cells;  // (observed, expected)
    double o = 0.0, e = 0.0;
    for (int k = 0; k <= trials; ++k) {
        o += obs[static_cast<std::size_t>(k)];
        e += n * boost::math::pdf(dist, k);
        if (e >= 5.0) {
            cells.emplace_back(o, e);
            o = e = 0.0;
        }
    }
    if (!cells.empty()) {
        cells.back().first += o;
        cells.back().second += e;
    }
    ChiSquareResult r;
    r.samples = counts.size();
    for (const auto& [co, ce] : cells) r.statistic += (co - ce) * (co - ce) / ce;
    r.dof = static_cast<int>(cells.size()) - 1;
    if (r.dof < 1) throw ValidationError("chi-square: too few samples for a test");
    r.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<double>(r.dof), r.statistic));
    return r;
}

}  // namespace mft
