#include "maser/mcwf.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace maser {

namespace {

std::string fmt(double x) {
    std::ostringstream os;
    os << x;
    return os.str();
}

std::uint64_t splitmix64(std::uint64_t& s) {
    s += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr double kJumpBound = 0.1;

}  // namespace

RandomStream::RandomStream(std::uint64_t master_seed, std::uint64_t stream_index) {
    // Whiten (seed, index) into a well-mixed starting state.
    std::uint64_t s = master_seed;
    std::uint64_t a = splitmix64(s);
    s = a ^ (stream_index * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL);
    splitmix64(s);
    state_ = s;
}

std::uint64_t RandomStream::next_u64() { return splitmix64(state_); }

double RandomStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::exponential(double rate) {
    if (!(rate > 0.0)) return std::numeric_limits<double>::infinity();
    return -std::log1p(-uniform()) / rate;
}

void TrajectoryConfig::validate() const {
    if (n_trajectories < 1) throw ConfigError("n_trajectories must be >= 1");
    if (!(dt > 0.0)) throw ConfigError("dt must be > 0");
    if (!(t_end >= 0.0)) throw ConfigError("t_end must be >= 0");
    if (sample_times.empty()) throw ConfigError("sample_times must not be empty");
    for (std::size_t i = 0; i < sample_times.size(); ++i) {
        if (sample_times[i] < 0.0 || sample_times[i] > t_end)
            throw ConfigError("sample_times must lie within [0, t_end]");
        if (i > 0 && !(sample_times[i] > sample_times[i - 1]))
            throw ConfigError("sample_times must be strictly increasing");
    }
}

std::pair<PureState, AtomOutcome> jc_kick(const PureState& state, double g_tau,
                                          RandomStream& rng) {
    const int dim = state.cutoff.dim();
    const int n_max = state.cutoff.n_max;

    // Branch the joint state: excited keeps |n>, ground shifts to |n+1>.
    // The ground amplitude leaving |n_max> would land outside the basis.
    const double top_loss = std::norm(state.c[n_max]) *
                            std::pow(std::sin(g_tau * std::sqrt(n_max + 1.0)), 2);
    if (top_loss > state.cutoff.tail_tol)
        throw CutoffError("JC kick would move " + fmt(top_loss) +
                          " probability past n_max = " + std::to_string(n_max));

    Eigen::VectorXcd exc(dim), gnd(dim);
    gnd[0] = Complex(0.0, 0.0);
    for (int n = 0; n < dim; ++n) {
        const double theta = g_tau * std::sqrt(n + 1.0);
        exc[n] = state.c[n] * std::cos(theta);
        if (n + 1 < dim) gnd[n + 1] = -state.c[n] * std::sin(theta);
    }
    const double p_exc = exc.squaredNorm();
    const AtomOutcome outcome = rng.uniform() < p_exc ? AtomOutcome::excited : AtomOutcome::ground;
    Eigen::VectorXcd& branch = outcome == AtomOutcome::excited ? exc : gnd;
    branch /= branch.norm();
    return {PureState{std::move(branch), state.cutoff}, outcome};
}

PureState damped_step(const PureState& state, const MicromaserParams& params, double dt,
                      RandomStream& rng) {
    const int dim = state.cutoff.dim();
    const int n_max = state.cutoff.n_max;
    const double nb = params.nbar;

    double mean_n = 0.0;
    for (int n = 0; n < dim; ++n) mean_n += n * std::norm(state.c[n]);
    const double p_down = (nb + 1.0) * mean_n * dt;       // emission, a
    const double p_up = nb * (mean_n + 1.0) * dt;         // thermal absorption, adag
    if (p_down + p_up >= kJumpBound)
        throw StepSizeError("total jump probability " + fmt(p_down + p_up) +
                            " per step exceeds " + fmt(kJumpBound) + "; decrease dt");

    Eigen::VectorXcd c(dim);
    const double u = rng.uniform();
    if (u < p_down) {
        for (int n = 0; n + 1 < dim; ++n) c[n] = std::sqrt(n + 1.0) * state.c[n + 1];
        c[dim - 1] = Complex(0.0, 0.0);
    } else if (u < p_down + p_up) {
        if (std::norm(state.c[n_max]) > state.cutoff.tail_tol)
            throw CutoffError("thermal absorption would move population past n_max = " +
                              std::to_string(n_max));
        c[0] = Complex(0.0, 0.0);
        for (int n = 1; n < dim; ++n) c[n] = std::sqrt(double(n)) * state.c[n - 1];
    } else {
        // No-jump propagator 1 - dt/2 [(nbar+1) n + nbar (n+1)], diagonal in n.
        for (int n = 0; n < dim; ++n)
            c[n] = state.c[n] * (1.0 - 0.5 * dt * ((nb + 1.0) * n + nb * (n + 1.0)));
    }
    c /= c.norm();
    return PureState{std::move(c), state.cutoff};
}

namespace {

struct TrajectorySamples {
    // Per sample time: mean photon, Re<a>, then the |c_n|^2 vector.
    std::vector<double> mean_n;
    std::vector<double> re_a;
    std::vector<Eigen::VectorXd> stats;
};

TrajectorySamples run_trajectory(const PureState& initial, const MicromaserParams& params,
                                 const TrajectoryConfig& config, int index) {
    RandomStream rng(config.master_seed, static_cast<std::uint64_t>(index));
    PureState state = initial;
    const double r = params.r_over_gamma;

    TrajectorySamples out;
    out.mean_n.reserve(config.sample_times.size());
    out.re_a.reserve(config.sample_times.size());
    out.stats.reserve(config.sample_times.size());

    auto record = [&]() {
        const int dim = state.cutoff.dim();
        double mn = 0.0, ra = 0.0;
        Eigen::VectorXd p(dim);
        for (int n = 0; n < dim; ++n) {
            p[n] = std::norm(state.c[n]);
            mn += n * p[n];
            if (n + 1 < dim)
                ra += std::sqrt(n + 1.0) * (state.c[n] * std::conj(state.c[n + 1])).real();
        }
        out.mean_n.push_back(mn);
        out.re_a.push_back(ra);
        out.stats.push_back(std::move(p));
    };

    auto advance_damping = [&](double from, double to) {
        double t = from;
        while (to - t > 1e-15) {
            const double h = std::min(config.dt, to - t);
            state = damped_step(state, params, h, rng);
            t += h;
        }
    };

    double t = 0.0;
    double next_atom = rng.exponential(r);
    for (double ts : config.sample_times) {
        while (t + next_atom < ts) {
            advance_damping(t, t + next_atom);
            t += next_atom;
            state = jc_kick(state, params.g_tau, rng).first;
            next_atom = rng.exponential(r);
        }
        next_atom -= (ts - t);
        advance_damping(t, ts);
        t = ts;
        record();
    }
    return out;
}

}  // namespace

EnsembleEstimate run_ensemble(const PureState& initial, const MicromaserParams& params,
                              const TrajectoryConfig& config) {
    params.validate();
    config.validate();
    if (std::abs(initial.norm() - 1.0) > 1e-9)
        throw InvalidStateError("initial pure state is not normalized");

    const int m = config.n_trajectories;
    std::vector<TrajectorySamples> results(m);

    int threads = config.n_threads > 0 ? config.n_threads
                                       : static_cast<int>(std::thread::hardware_concurrency());
    if (threads < 1) threads = 1;
    threads = std::min(threads, m);

    std::atomic<int> next{0};
    std::exception_ptr first_error = nullptr;
    std::mutex error_mutex;
    auto worker = [&]() {
        for (;;) {
            const int idx = next.fetch_add(1);
            if (idx >= m) return;
            try {
                results[idx] = run_trajectory(initial, params, config, idx);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    // Fixed-order reduction over trajectory indices: two passes, mean then
    // spread, so the result never depends on scheduling.
    const std::size_t ns = config.sample_times.size();
    const int dim = initial.cutoff.dim();
    EnsembleEstimate est;
    est.times = config.sample_times;
    est.n_trajectories = m;
    est.mean_photon.assign(ns, 0.0);
    est.re_a.assign(ns, 0.0);
    est.mean_photon_se.assign(ns, 0.0);
    est.re_a_se.assign(ns, 0.0);
    est.photon_stats.assign(ns, Eigen::VectorXd::Zero(dim));
    est.photon_stats_se.assign(ns, Eigen::VectorXd::Zero(dim));

    for (int i = 0; i < m; ++i)
        for (std::size_t s = 0; s < ns; ++s) {
            est.mean_photon[s] += results[i].mean_n[s];
            est.re_a[s] += results[i].re_a[s];
            est.photon_stats[s] += results[i].stats[s];
        }
    for (std::size_t s = 0; s < ns; ++s) {
        est.mean_photon[s] /= m;
        est.re_a[s] /= m;
        est.photon_stats[s] /= m;
    }
    if (m > 1) {
        for (int i = 0; i < m; ++i)
            for (std::size_t s = 0; s < ns; ++s) {
                const double dn = results[i].mean_n[s] - est.mean_photon[s];
                const double da = results[i].re_a[s] - est.re_a[s];
                est.mean_photon_se[s] += dn * dn;
                est.re_a_se[s] += da * da;
                est.photon_stats_se[s] +=
                    (results[i].stats[s] - est.photon_stats[s]).cwiseAbs2();
            }
        const double norm = 1.0 / (static_cast<double>(m) * (m - 1));
        for (std::size_t s = 0; s < ns; ++s) {
            est.mean_photon_se[s] = std::sqrt(est.mean_photon_se[s] * norm);
            est.re_a_se[s] = std::sqrt(est.re_a_se[s] * norm);
            est.photon_stats_se[s] = (est.photon_stats_se[s] * norm).cwiseSqrt();
        }
    }
    return est;
}

}  // namespace maser
