#include "maser/fock.hpp"

#include <cmath>
#include <sstream>

namespace maser {

namespace {

constexpr double kHermTol = 1e-12;
constexpr double kTraceTol = 1e-9;
constexpr double kDiagErrorTol = -1e-9;

std::string fmt(double x) {
    std::ostringstream os;
    os << x;
    return os.str();
}

}  // namespace

double hermiticity_defect(const Eigen::MatrixXcd& rho) {
    return (rho - rho.adjoint()).cwiseAbs().maxCoeff();
}

double trace_defect(const Eigen::MatrixXcd& rho) {
    return std::abs(rho.trace() - Complex(1.0, 0.0));
}

void check_valid(const FieldState& state) {
    state.cutoff.validate();
    if (state.rho.rows() != state.cutoff.dim() || state.rho.cols() != state.cutoff.dim())
        throw InvalidStateError("density matrix dimension does not match cutoff");
    const double h = hermiticity_defect(state.rho);
    if (h > kHermTol)
        throw InvalidStateError("hermiticity defect " + fmt(h) + " exceeds 1e-12");
    const double t = trace_defect(state.rho);
    if (t > kTraceTol)
        throw InvalidStateError("trace defect " + fmt(t) + " exceeds 1e-9");
    for (int n = 0; n < state.rho.rows(); ++n) {
        const double d = state.rho(n, n).real();
        if (d < kDiagErrorTol)
            throw InvalidStateError("diagonal entry rho(" + std::to_string(n) + "," +
                                    std::to_string(n) + ") = " + fmt(d) + " below -1e-9");
    }
}

double poisson_tail_mass(double mean, int n_max) {
    if (mean <= 0.0) return 0.0;
    // 1 - CDF(n_max), summed from the term at n_max+1 upward until negligible.
    double log_term = -mean + (n_max + 1) * std::log(mean) - std::lgamma(n_max + 2.0);
    double term = std::exp(log_term);
    double tail = 0.0;
    for (int n = n_max + 1; n < n_max + 2000; ++n) {
        tail += term;
        term *= mean / (n + 1);
        if (term < 1e-300) break;
    }
    return tail;
}

PureState coherent_state(ComplexAmplitude alpha, FockCutoff cutoff) {
    cutoff.validate();
    const double a2 = std::norm(alpha.value);
    const double tail = poisson_tail_mass(a2, cutoff.n_max);
    if (tail > cutoff.tail_tol)
        throw CutoffError("coherent state |alpha|^2 = " + fmt(a2) + " has tail mass " +
                          fmt(tail) + " beyond n_max = " + std::to_string(cutoff.n_max));
    PureState psi{Eigen::VectorXcd::Zero(cutoff.dim()), cutoff};
    // c_n = exp(-|a|^2/2) a^n / sqrt(n!) via the stable ratio recurrence.
    psi.c[0] = std::exp(-0.5 * a2);
    for (int n = 1; n < cutoff.dim(); ++n)
        psi.c[n] = psi.c[n - 1] * alpha.value / std::sqrt(static_cast<double>(n));
    psi.c /= psi.c.norm();
    return psi;
}

FieldState projector(const PureState& psi) {
    return FieldState{psi.c * psi.c.adjoint(), psi.cutoff};
}

namespace {

// exp(beta*adag - conj(beta)*a) on a basis of the given dimension, via the
// eigendecomposition of the Hermitian generator i(beta*adag - conj(beta)*a);
// the result is unitary to machine precision on that basis.
Eigen::MatrixXcd displacement_enlarged(Complex beta, int dim) {
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(dim, dim);
    const Complex i_unit(0.0, 1.0);
    for (int n = 0; n < dim - 1; ++n) {
        const double s = std::sqrt(n + 1.0);
        h(n + 1, n) = i_unit * beta * s;          // i * beta * adag
        h(n, n + 1) = -i_unit * std::conj(beta) * s;  // -i * conj(beta) * a
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
    const auto& w = es.eigenvalues();
    Eigen::VectorXcd phases(dim);
    for (int j = 0; j < dim; ++j) phases[j] = std::exp(Complex(0.0, -w[j]));
    return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

Displacement::Displacement(ComplexAmplitude beta, FockCutoff cutoff)
    : big_(displacement_enlarged(beta.value, cutoff.dim() + kBuffer)),
      cutoff_(cutoff),
      beta_(beta) {
    cutoff.validate();
}

Eigen::MatrixXcd Displacement::cropped() const {
    return big_.topLeftCorner(cutoff_.dim(), cutoff_.dim());
}

FieldState Displacement::apply(const FieldState& state) const {
    check_valid(state);
    if (state.cutoff.n_max != cutoff_.n_max)
        throw InvalidStateError("state cutoff does not match displacement cutoff");
    const int dim = cutoff_.dim();
    const int big = dim + kBuffer;
    Eigen::MatrixXcd rho_big = Eigen::MatrixXcd::Zero(big, big);
    rho_big.topLeftCorner(dim, dim) = state.rho;
    Eigen::MatrixXcd out = big_ * rho_big * big_.adjoint();
    // Mass pushed to or past n_max is visible on the enlarged diagonal; it is
    // exactly what the crop would discard.
    double spill = 0.0;
    for (int n = cutoff_.n_max; n < big; ++n) spill += out(n, n).real();
    if (spill > state.cutoff.tail_tol)
        throw CutoffError("displaced state carries " + fmt(spill) +
                          " probability at or above n_max = " + std::to_string(cutoff_.n_max));
    return FieldState{out.topLeftCorner(dim, dim), state.cutoff};
}

Eigen::MatrixXcd displacement_matrix(ComplexAmplitude beta, FockCutoff cutoff,
                                     double unitarity_tol) {
    cutoff.validate();
    Displacement d(beta, cutoff);
    Eigen::MatrixXcd m = d.cropped();
    const int half = cutoff.n_max / 2 + 1;
    Eigen::MatrixXcd gram = m.adjoint() * m;
    const double defect =
        (gram.topLeftCorner(half, half) - Eigen::MatrixXcd::Identity(half, half))
            .cwiseAbs()
            .maxCoeff();
    if (defect > unitarity_tol)
        throw CutoffError("displacement matrix unitarity defect " + fmt(defect) +
                          " on the inner block n,m <= " + std::to_string(cutoff.n_max / 2) +
                          " (|beta|^2 = " + fmt(std::norm(beta.value)) +
                          " too large for n_max = " + std::to_string(cutoff.n_max) + ")");
    return m;
}

FieldState apply_displacement(const FieldState& state, ComplexAmplitude beta) {
    return Displacement(beta, state.cutoff).apply(state);
}

PhotonStatistics photon_statistics(const FieldState& state) {
    check_valid(state);
    const int dim = state.cutoff.dim();
    PhotonStatistics stats{Eigen::VectorXd(dim)};
    for (int n = 0; n < dim; ++n) {
        double d = state.rho(n, n).real();
        if (d < 0.0) d = 0.0;  // check_valid already rejected anything below -1e-9
        stats.p[n] = d;
    }
    const double s = stats.p.sum();
    if (std::abs(s - 1.0) > kTraceTol)
        throw InvalidStateError("photon statistics sum " + fmt(s) + " deviates from 1");
    return stats;
}

Complex field_amplitude(const FieldState& state) {
    check_valid(state);
    Complex a(0.0, 0.0);
    for (int n = 0; n + 1 < state.cutoff.dim(); ++n)
        a += std::sqrt(n + 1.0) * state.rho(n, n + 1);
    return a;
}

double mean_photon(const FieldState& state) {
    check_valid(state);
    double m = 0.0;
    for (int n = 0; n < state.cutoff.dim(); ++n) m += n * state.rho(n, n).real();
    return m < 0.0 ? 0.0 : m;
}

}  // namespace maser
