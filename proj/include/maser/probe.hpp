#pragma once

#include <vector>

#include "maser/fitkit.hpp"
#include "maser/fock.hpp"
#include "maser/mme.hpp"

namespace maser {

/// Interrogation plan: stop the pump at each listed time, displace the field
/// by -alpha and probe it with one excited atom of Rabi phase g_tau_p.
struct ProbeConfig {
    double g_tau_p = 0.494;
    std::vector<double> interrogation_times;
    ComplexAmplitude alpha;

    void validate() const;
};

/// Per interrogation time: back-shifted statistics and the probe response.
struct ProtocolSeries {
    std::vector<double> times;
    std::vector<double> p_e;      // probe exits excited
    std::vector<double> p_g;      // 1 - p_e exactly
    std::vector<double> mean_n;   // <N> of the back-shifted field
    std::vector<PhotonStatistics> stats;
};

/// Probability that the probe atom exits excited, sum_n p_n cos^2(g_tau_p sqrt(n+1)).
double probe_excited_prob(const PhotonStatistics& stats, double g_tau_p);

/// Full protocol: evolve the matched coherent state |alpha> under the master
/// equation (all bands), displace by -alpha at each interrogation time and
/// record the probe observables.
ProtocolSeries run_protocol(const MicromaserParams& params, const ProbeConfig& probe,
                            FockCutoff cutoff);

/// The closed-form constants of the late-time law p_e(t) = K exp(-D t) + p_inf,
/// computed from the initial coherences, the steady state and the
/// displacement matrix alone.
struct ProtocolConstants {
    double k = 0.0;
    double p_inf = 0.0;
};
ProtocolConstants fit_constants(const MicromaserParams& params, const ProbeConfig& probe,
                                const FieldState& initial, FockCutoff cutoff);

/// Fits K exp(-D t) + C to the probe series for t >= fit_start.
DecayFit extract_linewidth_late_time(const ProtocolSeries& series, double fit_start);

/// Small-phase approximation p_g ~ (g_tau_p)^2 (<N> + 1).
double shorttime_ground_prob(double mean_n, double g_tau_p);

/// Small-phase validity: 2 g_tau_p sqrt(n_eff + 1) < 0.5, with n_eff the
/// 99.99th-percentile occupation of the initial back-shifted state.
struct ValidityCheck {
    bool valid = false;
    int n_eff = 0;
    double phase = 0.0;  // 2 g_tau_p sqrt(n_eff + 1)
};
ValidityCheck check_shorttime_validity(const PhotonStatistics& initial_stats, double g_tau_p);

/// Inverts the small-phase law into <N>(t) estimates and fits the growth
/// 2|alpha|^2 (1 - exp(-D t)) over the initial stage of the diffusion
/// (window t <= 0.5/D, self-consistently refined). Throws ValidityError when
/// the probe phase fails the validity check.
DecayFit extract_linewidth_shorttime(const ProtocolSeries& series, const ProbeConfig& probe);

}  // namespace maser
