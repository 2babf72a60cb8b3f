#include <doctest.h>

#include <cmath>

#include "maser/fock.hpp"
#include "oracles.hpp"

using namespace maser;

namespace {

FieldState coherent_projector(double alpha, int n_max) {
    return projector(coherent_state(ComplexAmplitude{alpha}, FockCutoff{n_max}));
}

}  // namespace

TEST_SUITE("fock") {

TEST_CASE("coherent state: vacuum") {
    const PureState psi = coherent_state(ComplexAmplitude{0.0}, FockCutoff{8});
    CHECK(psi.c[0] == Complex(1.0, 0.0));
    for (int n = 1; n < 9; ++n) CHECK(std::abs(psi.c[n]) == 0.0);
}

TEST_CASE("coherent state matches the Poisson distribution") {
    const PureState psi = coherent_state(ComplexAmplitude{1.0}, FockCutoff{32});
    CHECK(std::norm(psi.c[0]) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    const Eigen::VectorXd ref = oracles::poisson_vector(1.0, 33);
    for (int n = 0; n < 33; ++n) CHECK(std::norm(psi.c[n]) == doctest::Approx(ref[n]).epsilon(1e-10));
}

TEST_CASE("coherent state mean photon number is |alpha|^2") {
    const PureState psi = coherent_state(ComplexAmplitude{3.0654}, FockCutoff{64});
    double mean = 0.0;
    for (int n = 0; n < psi.c.size(); ++n) mean += n * std::norm(psi.c[n]);
    CHECK(mean == doctest::Approx(9.3967).epsilon(2e-6));
    CHECK(std::abs(mean - 3.0654 * 3.0654) < 1e-8);
}

TEST_CASE("coherent state raises when the cutoff cannot hold the tail") {
    CHECK_THROWS_AS(coherent_state(ComplexAmplitude{6.0}, FockCutoff{16}), CutoffError);
    CHECK_THROWS_AS(coherent_state(ComplexAmplitude{2.0}, FockCutoff{8}), CutoffError);
}

TEST_CASE("displacement matrix: beta = 0 is the identity") {
    const Eigen::MatrixXcd d = displacement_matrix(ComplexAmplitude{0.0}, FockCutoff{16});
    CHECK((d - Eigen::MatrixXcd::Identity(17, 17)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("displacement matrix: vacuum column equals the coherent amplitudes") {
    const FockCutoff cutoff{48};
    const Complex beta(0.8, -0.4);
    const Eigen::MatrixXcd d = displacement_matrix(ComplexAmplitude{beta}, cutoff);
    const PureState ref = coherent_state(ComplexAmplitude{beta}, cutoff);
    for (int n = 0; n <= 24; ++n) CHECK(std::abs(d(n, 0) - ref.c[n]) < 1e-8);
}

TEST_CASE("displacement matrix: D(-beta) is the adjoint of D(beta)") {
    const FockCutoff cutoff{32};
    const Complex beta(0.6, 0.3);
    const Eigen::MatrixXcd d = displacement_matrix(ComplexAmplitude{beta}, cutoff);
    const Eigen::MatrixXcd dm = displacement_matrix(ComplexAmplitude{-beta}, cutoff);
    CHECK((dm - d.adjoint()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("displacement matrix agrees with the Laguerre closed form") {
    const Complex beta(0.7, 0.3);
    const Eigen::MatrixXcd d = displacement_matrix(ComplexAmplitude{beta}, FockCutoff{24});
    const Eigen::MatrixXcd ref = oracles::displacement_matrix_laguerre(beta, 25);
    double max_dev = 0.0;
    for (int n = 0; n <= 12; ++n)
        for (int m = 0; m <= 12; ++m) max_dev = std::max(max_dev, std::abs(d(n, m) - ref(n, m)));
    CHECK(max_dev < 1e-10);
}

TEST_CASE("displacement matrix rejects amplitudes too large for the cutoff") {
    // The displaced inner-block columns spill past n_max at this size.
    CHECK_THROWS_AS(displacement_matrix(ComplexAmplitude{3.0654}, FockCutoff{64}), CutoffError);
}

TEST_CASE("apply_displacement: counter-field of the matched state gives the vacuum") {
    const FieldState rho = coherent_projector(3.0654, 96);
    const FieldState shifted = apply_displacement(rho, ComplexAmplitude{-3.0654});
    const PhotonStatistics stats = photon_statistics(shifted);
    CHECK(stats.p[0] > 1.0 - 1e-6);
    CHECK(mean_photon(shifted) < 1e-6);
}

TEST_CASE("apply_displacement: beta = 0 leaves the state unchanged") {
    const FieldState rho = coherent_projector(1.5, 32);
    const FieldState out = apply_displacement(rho, ComplexAmplitude{0.0});
    CHECK((out.rho - rho.rho).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("apply_displacement matches the dense triple product on a toy state") {
    const FockCutoff cutoff{32};
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(33, 33);
    rho(0, 0) = 0.5;
    rho(1, 1) = 0.3;
    rho(2, 2) = 0.2;
    rho(0, 1) = Complex(0.1, 0.05);
    rho(1, 0) = std::conj(rho(0, 1));
    rho(0, 2) = Complex(-0.02, 0.04);
    rho(2, 0) = std::conj(rho(0, 2));
    const FieldState state{rho, cutoff};

    const Complex beta(0.2, -0.1);
    const FieldState out = apply_displacement(state, ComplexAmplitude{beta});
    const Eigen::MatrixXcd d = displacement_matrix(ComplexAmplitude{beta}, cutoff);
    const Eigen::MatrixXcd ref = d * rho * d.adjoint();
    CHECK((out.rho - ref).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("apply_displacement preserves Hermiticity, trace and normalization") {
    const FieldState rho = coherent_projector(2.0, 48);
    const FieldState out = apply_displacement(rho, ComplexAmplitude{Complex(0.9, 0.7)});
    CHECK(hermiticity_defect(out.rho) < 1e-12);
    CHECK(trace_defect(out.rho) < 1e-9);
    CHECK(photon_statistics(out).sum() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("apply_displacement round trip returns the original state") {
    const FieldState rho = coherent_projector(1.2, 40);
    const ComplexAmplitude beta{Complex(0.8, 0.5)};
    const FieldState back =
        apply_displacement(apply_displacement(rho, beta), ComplexAmplitude{-beta.value});
    double max_dev = 0.0;
    for (int n = 0; n <= 20; ++n)
        for (int m = 0; m <= 20; ++m) max_dev = std::max(max_dev, std::abs(back.rho(n, m) - rho.rho(n, m)));
    CHECK(max_dev < 1e-8);
}

TEST_CASE("photon_statistics basics") {
    const FockCutoff cutoff{8};
    Eigen::MatrixXcd vac = Eigen::MatrixXcd::Zero(9, 9);
    vac(0, 0) = 1.0;
    const PhotonStatistics pv = photon_statistics(FieldState{vac, cutoff});
    CHECK(pv.p[0] == 1.0);
    CHECK(pv.p.tail(8).cwiseAbs().maxCoeff() == 0.0);

    Eigen::MatrixXcd mix = Eigen::MatrixXcd::Zero(9, 9);
    mix(0, 0) = 0.5;
    mix(1, 1) = 0.5;
    const PhotonStatistics pm = photon_statistics(FieldState{mix, cutoff});
    CHECK(pm.p[0] == 0.5);
    CHECK(pm.p[1] == 0.5);
}

TEST_CASE("photon_statistics of a coherent state is Poisson") {
    const PhotonStatistics stats = photon_statistics(coherent_projector(1.0, 32));
    const Eigen::VectorXd ref = oracles::poisson_vector(1.0, 33);
    CHECK((stats.p - ref).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("photon_statistics rejects a significantly negative diagonal") {
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(5, 5);
    rho(0, 0) = 1.0 + 1e-6;
    rho(1, 1) = -1e-6;
    CHECK_THROWS_AS(photon_statistics(FieldState{rho, FockCutoff{4}}), InvalidStateError);
}

TEST_CASE("field_amplitude") {
    const FockCutoff cutoff{16};
    Eigen::MatrixXcd vac = Eigen::MatrixXcd::Zero(17, 17);
    vac(0, 0) = 1.0;
    CHECK(std::abs(field_amplitude(FieldState{vac, cutoff})) == 0.0);

    Eigen::MatrixXcd fock = Eigen::MatrixXcd::Zero(17, 17);
    fock(5, 5) = 1.0;
    CHECK(std::abs(field_amplitude(FieldState{fock, cutoff})) == 0.0);

    const FieldState coh = coherent_projector(1.3, 32);
    CHECK(field_amplitude(coh).real() == doctest::Approx(1.3).epsilon(1e-10));
    CHECK(std::abs(field_amplitude(coh).imag()) < 1e-12);
}

TEST_CASE("mean_photon") {
    const FockCutoff cutoff{16};
    Eigen::MatrixXcd vac = Eigen::MatrixXcd::Zero(17, 17);
    vac(0, 0) = 1.0;
    CHECK(mean_photon(FieldState{vac, cutoff}) == 0.0);

    Eigen::MatrixXcd fock = Eigen::MatrixXcd::Zero(17, 17);
    fock(5, 5) = 1.0;
    CHECK(mean_photon(FieldState{fock, cutoff}) == 5.0);

    CHECK(mean_photon(coherent_projector(3.0654, 64)) == doctest::Approx(9.3967).epsilon(1e-7));
}

TEST_CASE("check_valid rejects malformed states") {
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(5, 5);
    rho(0, 0) = 1.0;
    rho(0, 1) = Complex(0.1, 0.0);  // missing conjugate partner
    CHECK_THROWS_AS(check_valid(FieldState{rho, FockCutoff{4}}), InvalidStateError);

    Eigen::MatrixXcd low_trace = Eigen::MatrixXcd::Zero(5, 5);
    low_trace(0, 0) = 0.9;
    CHECK_THROWS_AS(check_valid(FieldState{low_trace, FockCutoff{4}}), InvalidStateError);
}

}  // TEST_SUITE
