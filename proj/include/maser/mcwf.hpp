#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "maser/fock.hpp"
#include "maser/mme.hpp"

namespace maser {

/// Deterministic per-trajectory random stream. All draws are fully specified
/// (no library distribution objects), so results are reproducible across
/// compilers and worker counts.
class RandomStream {
public:
    RandomStream(std::uint64_t master_seed, std::uint64_t stream_index);

    /// Uniform in [0, 1).
    double uniform();
    /// Exponential waiting time with the given rate (rate <= 0 gives +inf).
    double exponential(double rate);

private:
    std::uint64_t next_u64();
    std::uint64_t state_;
};

struct TrajectoryConfig {
    std::uint64_t master_seed = 12345;
    int n_trajectories = 2000;
    double dt = 2e-3;            // no-jump step in gamma*t
    double t_end = 20.0;
    std::vector<double> sample_times;  // strictly increasing, within [0, t_end]
    int n_threads = 0;           // 0 = hardware concurrency

    void validate() const;
};

enum class AtomOutcome { excited, ground };

/// Jaynes-Cummings transit of one excited atom: the atomic outcome is sampled
/// from the two branch norms and the field collapses accordingly.
std::pair<PureState, AtomOutcome> jc_kick(const PureState& state, double g_tau,
                                          RandomStream& rng);

/// One first-order MCWF step of cavity damping: emission jump with
/// probability (nbar+1)<n> dt, thermal absorption with nbar<n+1> dt, else
/// non-Hermitian no-jump evolution; always renormalized.
PureState damped_step(const PureState& state, const MicromaserParams& params, double dt,
                      RandomStream& rng);

/// Ensemble averages with standard errors (sample std / sqrt(M)).
struct EnsembleEstimate {
    std::vector<double> times;
    std::vector<double> mean_photon, mean_photon_se;
    std::vector<double> re_a, re_a_se;
    std::vector<Eigen::VectorXd> photon_stats, photon_stats_se;
    int n_trajectories = 0;
};

/// Runs n_trajectories independent trajectories (Poisson atom arrivals at
/// rate r interleaved with damped steps) and reduces them in trajectory-index
/// order, so the estimate is bitwise independent of the worker count.
EnsembleEstimate run_ensemble(const PureState& initial, const MicromaserParams& params,
                              const TrajectoryConfig& config);

}  // namespace maser
