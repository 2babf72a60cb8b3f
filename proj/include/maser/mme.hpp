#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "maser/fock.hpp"

namespace maser {

/// Dimensionless micromaser operating point. All rates are in units of the
/// cavity decay rate gamma and all times are in units of gamma*t.
struct MicromaserParams {
    double g_tau = 0.494;         // pump Rabi phase g*tau
    double g_over_gamma = 12.3;   // coupling over cavity linewidth
    double r_over_gamma = 10.0;   // pump rate over cavity linewidth
    double nbar = 0.03;           // thermal occupation of the bath

    void validate() const;
};

/// The (A, B, C) coefficients coupling rho_{n,m} to rho_{n-1,m-1}, rho_{n,m}
/// and rho_{n+1,m+1}, divided through by gamma.
struct MmeCoefficients {
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
};

MmeCoefficients mme_coefficients(const MicromaserParams& params, int n, int m);

/// Tridiagonal generator acting on the band vector v_n = rho_{n,n+k}.
/// Element (i,j) nonzero only for |i-j| <= 1:
///   (L v)_i = sub[i] v_{i-1} + diag[i] v_i + super[i] v_{i+1}.
/// For k = 0 the top diagonal entry is closed so that every column sums to
/// zero and the trace is conserved exactly; the correction equals the
/// probability flux that the truncation would otherwise leak past n_max.
struct BandGenerator {
    int k = 0;
    Eigen::VectorXd sub, diag, super;

    int size() const { return static_cast<int>(diag.size()); }
    void apply(const Eigen::VectorXcd& v, Eigen::VectorXcd& out) const;
    Eigen::MatrixXd dense() const;
};

BandGenerator build_band_generator(const MicromaserParams& params, int k, FockCutoff cutoff);

/// Band decomposition of a Hermitian density matrix: bands k = 0..k_max with
/// v^k_n = rho_{n,n+k}; the k < 0 bands are the complex conjugates and are
/// never stored, so Hermiticity is preserved exactly under evolution.
struct BandState {
    std::vector<Eigen::VectorXcd> bands;
    FockCutoff cutoff;

    static BandState from_field_state(const FieldState& state, int k_max);
    FieldState to_field_state() const;
    int k_max() const { return static_cast<int>(bands.size()) - 1; }
};

/// Time series of the phase-diffusion observables.
struct DiffusionRecord {
    std::vector<double> times;
    std::vector<double> re_a;
    std::vector<PhotonStatistics> photon_stats;  // filled only when requested
};

struct EvolveOptions {
    int k_max = 3;                  // bands retained; -1 keeps all n_max+1 bands
    double step = 1e-3;             // RK4 step in gamma*t
    double step_check_tol = 1e-9;   // Richardson halved-step acceptance bound
    bool record_photon_stats = false;
};

struct EvolveResult {
    DiffusionRecord record;
    FieldState final_state;
    double max_trace_defect = 0.0;
    double max_hermiticity_defect = 0.0;
};

/// Integrates the master equation band by band with classical RK4 at fixed
/// step, sampling n_samples+1 points uniformly on [0, t_end]. The first
/// sample interval is re-integrated at half step and compared (local accuracy
/// gate); the top-level occupation is monitored at every sample.
EvolveResult evolve(const FieldState& state, const MicromaserParams& params, double t_end,
                    int n_samples, const EvolveOptions& options = {});

/// Matrix exponentials exp(L_k dt) for jumping all bands by a fixed dt.
class BandPropagatorSet {
public:
    BandPropagatorSet(const MicromaserParams& params, FockCutoff cutoff, double dt,
                      int k_max = -1);
    void advance(BandState& state) const;
    double dt() const { return dt_; }

private:
    std::vector<Eigen::MatrixXd> props_;
    double dt_;
};

/// Stationary photon statistics: normalized null vector of the k = 0 band
/// generator. Throws DegenerateNullspaceError if the null space is not
/// one-dimensional at tolerance, CutoffError if the support hits n_max.
PhotonStatistics steady_state(const MicromaserParams& params, FockCutoff cutoff);

/// sqrt(mean) of a photon distribution, as a real positive amplitude.
ComplexAmplitude alpha_from_statistics(const PhotonStatistics& stats);

/// Coherent amplitude whose Poisson statistics matches the steady state by
/// mean photon number.
ComplexAmplitude matched_alpha(const MicromaserParams& params, FockCutoff cutoff);

enum class DecayRateMethod { fit, eigen };

/// Phase diffusion rate D in units of gamma.
///   fit:   evolve a coherent state and fit Re<a>(t) = Re<a>(0) exp(-D t)
///          over the window where the signal exceeds 1e-3 of its start.
///   eigen: -Re of the slowest eigenvalue of the k = 1 band generator.
/// initial_alpha overrides the matched amplitude (fit method only).
double coherence_decay_rate(const MicromaserParams& params, FockCutoff cutoff,
                            DecayRateMethod method,
                            std::optional<double> initial_alpha = std::nullopt);

/// Probability that a pump atom leaves the cavity still excited,
/// sum_n p_n cos^2(g_tau sqrt(n+1)).
double pump_excited_prob(const PhotonStatistics& stats, double g_tau);

}  // namespace maser
