#include "maser/probe.hpp"

#include <cmath>
#include <memory>

namespace maser {

void ProbeConfig::validate() const {
    if (!(g_tau_p > 0.0)) throw ConfigError("g_tau_p must be > 0");
    if (interrogation_times.empty()) throw ConfigError("interrogation_times must not be empty");
    for (std::size_t i = 0; i < interrogation_times.size(); ++i) {
        if (interrogation_times[i] < 0.0)
            throw ConfigError("interrogation_times must be >= 0");
        if (i > 0 && !(interrogation_times[i] > interrogation_times[i - 1]))
            throw ConfigError("interrogation_times must be strictly increasing");
    }
}

double probe_excited_prob(const PhotonStatistics& stats, double g_tau_p) {
    return pump_excited_prob(stats, g_tau_p);
}

ProtocolSeries run_protocol(const MicromaserParams& params, const ProbeConfig& probe,
                            FockCutoff cutoff) {
    params.validate();
    probe.validate();
    cutoff.validate();

    const Displacement counter_field(ComplexAmplitude{-probe.alpha.value}, cutoff);
    BandState bs = BandState::from_field_state(projector(coherent_state(probe.alpha, cutoff)),
                                               /*k_max=*/-1);

    ProtocolSeries series;
    const std::size_t nt = probe.interrogation_times.size();
    series.times = probe.interrogation_times;
    series.p_e.reserve(nt);
    series.p_g.reserve(nt);
    series.mean_n.reserve(nt);
    series.stats.reserve(nt);

    // Uniform grids reuse one exp(L dt) family; a new one is built only when
    // the gap changes.
    double prev_t = 0.0;
    double prev_gap = -1.0;
    std::unique_ptr<BandPropagatorSet> props;
    for (double t : probe.interrogation_times) {
        const double gap = t - prev_t;
        if (gap > 0.0) {
            if (std::abs(gap - prev_gap) > 1e-12 * std::max(1.0, gap)) {
                props = std::make_unique<BandPropagatorSet>(params, cutoff, gap);
                prev_gap = gap;
            }
            props->advance(bs);
        }
        prev_t = t;

        const FieldState displaced = counter_field.apply(bs.to_field_state());
        PhotonStatistics stats = photon_statistics(displaced);
        const double pe = probe_excited_prob(stats, probe.g_tau_p);
        series.p_e.push_back(pe);
        series.p_g.push_back(1.0 - pe);
        series.mean_n.push_back(stats.mean());
        series.stats.push_back(std::move(stats));
    }
    return series;
}

ProtocolConstants fit_constants(const MicromaserParams& params, const ProbeConfig& probe,
                                const FieldState& initial, FockCutoff cutoff) {
    params.validate();
    probe.validate();
    check_valid(initial);

    const PhotonStatistics pss = steady_state(params, cutoff);
    const Displacement counter_field(ComplexAmplitude{-probe.alpha.value}, cutoff);
    const Eigen::MatrixXcd& d = counter_field.enlarged();  // <n|D(-alpha)|i>, enlarged rows
    const int big = static_cast<int>(d.rows());
    const int dim = cutoff.dim();

    Eigen::VectorXd w(big);
    for (int n = 0; n < big; ++n) {
        const double c = std::cos(probe.g_tau_p * std::sqrt(n + 1.0));
        w[n] = c * c;
    }

    ProtocolConstants out;
    for (int i = 0; i + 1 < dim; ++i) {
        const Complex rho01 = initial.rho(i, i + 1);
        if (rho01 == Complex(0.0, 0.0)) continue;
        Complex inner(0.0, 0.0);
        for (int n = 0; n < big; ++n) inner += w[n] * d(n, i) * std::conj(d(n, i + 1));
        out.k += 2.0 * (rho01 * inner).real();
    }
    for (int i = 0; i < dim && i < pss.p.size(); ++i) {
        double col = 0.0;
        for (int n = 0; n < big; ++n) col += w[n] * std::norm(d(n, i));
        out.p_inf += pss.p[i] * col;
    }
    return out;
}

DecayFit extract_linewidth_late_time(const ProtocolSeries& series, double fit_start) {
    std::vector<double> t, y;
    for (std::size_t i = 0; i < series.times.size(); ++i) {
        if (series.times[i] >= fit_start) {
            t.push_back(series.times[i]);
            y.push_back(series.p_e[i]);
        }
    }
    if (t.size() < 4)
        throw FitError("series has only " + std::to_string(t.size()) +
                       " samples at or beyond fit_start");
    return fit_offset_exponential(t, y);
}

double shorttime_ground_prob(double mean_n, double g_tau_p) {
    return g_tau_p * g_tau_p * (mean_n + 1.0);
}

ValidityCheck check_shorttime_validity(const PhotonStatistics& initial_stats, double g_tau_p) {
    ValidityCheck check;
    double cum = 0.0;
    check.n_eff = static_cast<int>(initial_stats.p.size()) - 1;
    for (int n = 0; n < initial_stats.p.size(); ++n) {
        cum += initial_stats.p[n];
        if (cum >= 0.9999) {
            check.n_eff = n;
            break;
        }
    }
    check.phase = 2.0 * g_tau_p * std::sqrt(check.n_eff + 1.0);
    check.valid = check.phase < 0.5;
    return check;
}

DecayFit extract_linewidth_shorttime(const ProtocolSeries& series, const ProbeConfig& probe) {
    if (series.times.empty() || series.stats.empty())
        throw FitError("empty protocol series");
    const ValidityCheck check = check_shorttime_validity(series.stats.front(), probe.g_tau_p);
    if (!check.valid)
        throw ValidityError("probe phase 2 g_tau_p sqrt(n_eff+1) = " + std::to_string(check.phase) +
                            " is not << 1 (g_tau_p too large for the small-phase inversion)");

    const double amplitude = 2.0 * std::norm(probe.alpha.value);
    const double gtp2 = probe.g_tau_p * probe.g_tau_p;
    std::vector<double> n_est(series.times.size());
    for (std::size_t i = 0; i < series.times.size(); ++i)
        n_est[i] = series.p_g[i] / gtp2 - 1.0;

    // The inversion is exact only while the back-shifted field stays small, so
    // fit over the initial stage t <= 0.5/D and refine the window twice.
    DecayFit fit = fit_saturating_exponential(series.times, n_est, amplitude);
    for (int pass = 0; pass < 2; ++pass) {
        const double t_cut = 0.5 / fit.d;
        std::vector<double> tw, yw;
        for (std::size_t i = 0; i < series.times.size(); ++i) {
            if (series.times[i] <= t_cut) {
                tw.push_back(series.times[i]);
                yw.push_back(n_est[i]);
            }
        }
        if (tw.size() < 3) break;
        fit = fit_saturating_exponential(tw, yw, amplitude);
    }
    return fit;
}

}  // namespace maser
