#pragma once

#include <Eigen/Dense>
#include <complex>

#include "maser/errors.hpp"

namespace maser {

using Complex = std::complex<double>;

/// Truncated Fock basis |0..n_max>. States held at this cutoff must keep
/// their occupation of the top level below tail_tol.
struct FockCutoff {
    int n_max = 64;
    double tail_tol = 1e-10;

    int dim() const { return n_max + 1; }
    void validate() const {
        if (n_max < 1) throw ConfigError("n_max must be >= 1");
        if (!(tail_tol > 0.0)) throw ConfigError("tail_tol must be > 0");
    }
};

/// Dimensionless field amplitude (alpha, beta, ...).
struct ComplexAmplitude {
    Complex value{0.0, 0.0};
};

/// Photon-number distribution p_n, n = 0..n_max.
struct PhotonStatistics {
    Eigen::VectorXd p;

    double sum() const { return p.sum(); }
    double mean() const {
        double m = 0.0;
        for (int n = 0; n < p.size(); ++n) m += n * p[n];
        return m;
    }
};

/// Cavity field density matrix rho_{n,m} on the truncated basis.
struct FieldState {
    Eigen::MatrixXcd rho;
    FockCutoff cutoff;
};

/// Pure field state, amplitudes c_n over the Fock basis.
struct PureState {
    Eigen::VectorXcd c;
    FockCutoff cutoff;

    double norm() const { return c.norm(); }
};

double hermiticity_defect(const Eigen::MatrixXcd& rho);
double trace_defect(const Eigen::MatrixXcd& rho);

/// Throws InvalidStateError if rho is not Hermitian/trace-one/diagonal-nonnegative
/// within the standard tolerances (1e-12 / 1e-9 / -1e-9).
void check_valid(const FieldState& state);

/// Poisson tail mass beyond n_max for mean |alpha|^2 (truncation adequacy).
double poisson_tail_mass(double mean, int n_max);

/// |alpha> truncated to the cutoff and renormalized.
/// Throws CutoffError if the Poisson tail beyond n_max exceeds tail_tol.
PureState coherent_state(ComplexAmplitude alpha, FockCutoff cutoff);

/// Rank-one density matrix |psi><psi|.
FieldState projector(const PureState& psi);

/// Matrix elements <n|D(beta)|m> on the truncated basis, computed by
/// exponentiating beta*adag - conj(beta)*a on an enlarged basis and cropping.
/// Throws CutoffError if the cropped matrix fails to be unitary within
/// unitarity_tol on the inner block n,m <= n_max/2.
Eigen::MatrixXcd displacement_matrix(ComplexAmplitude beta, FockCutoff cutoff,
                                     double unitarity_tol = 1e-8);

/// Displacement applied to a density matrix: D(beta) rho D(-beta).
/// The product is evaluated on an enlarged basis; if the displaced state
/// carries more than cutoff.tail_tol probability at or above n_max the
/// truncation is inadequate and CutoffError is thrown.
FieldState apply_displacement(const FieldState& state, ComplexAmplitude beta);

/// Reusable displacement for repeated application at fixed beta.
class Displacement {
public:
    Displacement(ComplexAmplitude beta, FockCutoff cutoff);

    FieldState apply(const FieldState& state) const;
    /// Cropped matrix <n|D(beta)|m>, n,m <= n_max.
    Eigen::MatrixXcd cropped() const;
    /// Full matrix on the enlarged basis (dim + buffer rows/cols).
    const Eigen::MatrixXcd& enlarged() const { return big_; }

    static constexpr int kBuffer = 16;

private:
    Eigen::MatrixXcd big_;
    FockCutoff cutoff_;
    ComplexAmplitude beta_;
};

/// Diagonal of rho as a probability vector. Entries in (-1e-9, 0) are clamped
/// to zero; entries below -1e-9 raise InvalidStateError.
PhotonStatistics photon_statistics(const FieldState& state);

/// sum_n sqrt(n+1) rho_{n,n+1}; the real part is the measurable field quadrature.
Complex field_amplitude(const FieldState& state);

/// <N> = sum_n n rho_{n,n}.
double mean_photon(const FieldState& state);

}  // namespace maser
