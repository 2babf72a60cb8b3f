#include <doctest.h>

#include <cmath>

#include "maser/mme.hpp"
#include "oracles.hpp"

using namespace maser;

namespace {

MicromaserParams fig1_params() { return MicromaserParams{0.494, 12.300, 10.0, 0.03}; }

MicromaserParams pure_decay() { return MicromaserParams{0.494, 12.300, 0.0, 0.0}; }

}  // namespace

TEST_SUITE("mme") {

TEST_CASE("coefficients in the pure-decay limit") {
    const MicromaserParams params = pure_decay();
    for (int n = 0; n < 6; ++n) {
        for (int m = 0; m < 6; ++m) {
            const MmeCoefficients co = mme_coefficients(params, n, m);
            CHECK(co.a == 0.0);
            CHECK(co.c == doctest::Approx(std::sqrt((n + 1.0) * (m + 1.0))).epsilon(1e-14));
        }
        CHECK(mme_coefficients(params, n, n).b == doctest::Approx(-double(n)).epsilon(1e-14));
    }
}

TEST_CASE("coefficient A_{1,1} at the canonical parameters") {
    const MmeCoefficients co = mme_coefficients(fig1_params(), 1, 1);
    const double expected = 10.0 * std::sin(0.494) * std::sin(0.494) + 0.03;
    CHECK(co.a == doctest::Approx(expected).epsilon(1e-14));
    CHECK(co.a == doctest::Approx(2.2782).epsilon(1e-4));
}

TEST_CASE("coefficients are symmetric under n <-> m") {
    const MicromaserParams params = fig1_params();
    const int pairs[][2] = {{0, 3}, {2, 7}, {5, 5}, {1, 12}, {9, 4}};
    for (const auto& p : pairs) {
        const MmeCoefficients ab = mme_coefficients(params, p[0], p[1]);
        const MmeCoefficients ba = mme_coefficients(params, p[1], p[0]);
        CHECK(ab.a == ba.a);
        CHECK(ab.b == ba.b);
        CHECK(ab.c == ba.c);
    }
}

TEST_CASE("band generator: zero-temperature decay chain at k = 0") {
    const BandGenerator gen = build_band_generator(pure_decay(), 0, FockCutoff{12});
    for (int i = 0; i < gen.size(); ++i) {
        CHECK(gen.diag[i] == doctest::Approx(-double(i)).epsilon(1e-14));
        if (i > 0) CHECK(gen.sub[i] == 0.0);
        if (i + 1 < gen.size()) CHECK(gen.super[i] == doctest::Approx(double(i + 1)).epsilon(1e-14));
    }
}

TEST_CASE("band generator action matches the coefficients elementwise") {
    const MicromaserParams params = fig1_params();
    const FockCutoff cutoff{16};
    for (int k : {0, 1, 3}) {
        const BandGenerator gen = build_band_generator(params, k, cutoff);
        for (int j = 1; j + 1 < gen.size(); ++j) {  // interior one-hot probes
            Eigen::VectorXcd v = Eigen::VectorXcd::Zero(gen.size());
            v[j] = 1.0;
            Eigen::VectorXcd out;
            gen.apply(v, out);
            CHECK(out[j].real() == doctest::Approx(mme_coefficients(params, j, j + k).b));
            CHECK(out[j - 1].real() ==
                  doctest::Approx(mme_coefficients(params, j - 1, j - 1 + k).c));
            CHECK(out[j + 1].real() ==
                  doctest::Approx(mme_coefficients(params, j + 1, j + 1 + k).a));
        }
    }
}

TEST_CASE("k = 0 band generator conserves trace: columns sum to zero") {
    const Eigen::MatrixXd l0 = build_band_generator(fig1_params(), 0, FockCutoff{64}).dense();
    CHECK(l0.colwise().sum().cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("k = 0 band generator has a one-dimensional null space") {
    const Eigen::MatrixXd l0 = build_band_generator(fig1_params(), 0, FockCutoff{64}).dense();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(l0);
    const auto& sv = svd.singularValues();
    const int n = static_cast<int>(sv.size());
    CHECK(sv[n - 1] < 1e-10 * sv[0]);
    CHECK(sv[n - 2] > 1e-10 * sv[0]);
}

TEST_CASE("evolve: t_end = 0 returns the state unchanged") {
    const FieldState rho = projector(coherent_state(ComplexAmplitude{2.0}, FockCutoff{48}));
    const EvolveResult res = evolve(rho, fig1_params(), 0.0, 0);
    CHECK(res.record.times.size() == 1);
    CHECK((res.final_state.rho - rho.rho).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("evolve conserves the trace over gamma*t = 50") {
    const FieldState rho = projector(coherent_state(ComplexAmplitude{3.0654}, FockCutoff{64}));
    EvolveOptions opts;
    opts.k_max = 1;
    const EvolveResult res = evolve(rho, fig1_params(), 50.0, 50, opts);
    CHECK(res.max_trace_defect < 1e-9);
    CHECK(res.max_hermiticity_defect < 1e-12);
}

TEST_CASE("band evolution matches the dense-matrix master equation") {
    // Oracle: RK4 on the full (n,m) recursion, no band decomposition.
    const MicromaserParams params = fig1_params();
    const FockCutoff cutoff{12};
    const FieldState rho0 = projector(coherent_state(ComplexAmplitude{1.2}, cutoff));

    EvolveOptions opts;
    opts.k_max = -1;
    const EvolveResult res = evolve(rho0, params, 0.7, 7, opts);
    const Eigen::MatrixXcd ref = oracles::mme_dense_evolve(params, rho0.rho, 0.7, 1e-3);
    CHECK((res.final_state.rho - ref).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("matrix-exponential jumps agree with RK4 stepping") {
    const MicromaserParams params = fig1_params();
    const FockCutoff cutoff{32};
    const FieldState rho0 = projector(coherent_state(ComplexAmplitude{1.5}, cutoff));

    EvolveOptions opts;
    opts.k_max = 4;
    const EvolveResult rk4 = evolve(rho0, params, 2.0, 4, opts);

    BandState bs = BandState::from_field_state(rho0, 4);
    const BandPropagatorSet props(params, cutoff, 0.5, 4);
    for (int i = 0; i < 4; ++i) props.advance(bs);
    CHECK((bs.to_field_state().rho - rk4.final_state.rho).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("long evolution kills the coherences and reaches the steady diagonal") {
    const MicromaserParams params = fig1_params();
    const FockCutoff cutoff{64};
    const FieldState rho0 = projector(coherent_state(ComplexAmplitude{3.0654}, cutoff));

    BandState bs = BandState::from_field_state(rho0, -1);
    const BandPropagatorSet props(params, cutoff, 10.0);
    for (int i = 0; i < 20; ++i) props.advance(bs);  // gamma*t = 200 >> 1/D
    const FieldState rho = bs.to_field_state();

    double off_diag = 0.0;
    for (int n = 0; n < cutoff.dim(); ++n)
        for (int m = 0; m < cutoff.dim(); ++m)
            if (m != n) off_diag = std::max(off_diag, std::abs(rho.rho(n, m)));
    CHECK(off_diag < 1e-3);

    const PhotonStatistics pss = steady_state(params, cutoff);
    CHECK((photon_statistics(rho).p - pss.p).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("evolve raises when the cutoff cannot hold the growing field") {
    MicromaserParams params = fig1_params();
    params.r_over_gamma = 40.0;  // pushes the working point far above n_max = 8
    Eigen::MatrixXcd vac = Eigen::MatrixXcd::Zero(9, 9);
    vac(0, 0) = 1.0;
    CHECK_THROWS_AS(evolve(FieldState{vac, FockCutoff{8}}, params, 10.0, 10), CutoffError);
}

TEST_CASE("evolve raises on a too-coarse integrator step") {
    const FieldState rho = projector(coherent_state(ComplexAmplitude{2.0}, FockCutoff{48}));
    EvolveOptions opts;
    opts.k_max = 2;
    opts.step = 0.05;  // (|B| h)^5 error term is far above the gate at this step
    CHECK_THROWS_AS(evolve(rho, fig1_params(), 10.0, 10, opts), StepSizeError);
}

TEST_CASE("steady state: thermal distribution at zero pumping") {
    MicromaserParams params = fig1_params();
    params.r_over_gamma = 0.0;
    params.nbar = 0.2;
    const PhotonStatistics pss = steady_state(params, FockCutoff{64});
    const Eigen::VectorXd ref = oracles::thermal_vector(0.2, 65);
    CHECK((pss.p - ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("steady state agrees with the detailed-balance recursion") {
    const PhotonStatistics pss = steady_state(fig1_params(), FockCutoff{64});
    const Eigen::VectorXd ref = oracles::detailed_balance_steady(fig1_params(), 65);
    CHECK((pss.p - ref).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("steady state mean matches the quoted working point within 10%") {
    const PhotonStatistics pss = steady_state(fig1_params(), FockCutoff{64});
    CHECK(pss.mean() == doctest::Approx(9.40).epsilon(0.10));
}

TEST_CASE("steady state raises when the support does not fit") {
    MicromaserParams params = fig1_params();
    CHECK_THROWS_AS(steady_state(params, FockCutoff{8}), CutoffError);
}

TEST_CASE("matched alpha") {
    SUBCASE("inverts the Poisson mean") {
        const PhotonStatistics synthetic{oracles::poisson_vector(9.3967, 65)};
        CHECK(alpha_from_statistics(synthetic).value.real() ==
              doctest::Approx(3.0654).epsilon(1e-4));
    }
    SUBCASE("canonical parameters land near the quoted amplitude") {
        const ComplexAmplitude alpha = matched_alpha(fig1_params(), FockCutoff{64});
        CHECK(alpha.value.real() == doctest::Approx(3.0654).epsilon(0.10));
        CHECK(alpha.value.imag() == 0.0);
    }
    SUBCASE("vacuum steady state gives alpha = 0") {
        const ComplexAmplitude alpha = matched_alpha(pure_decay(), FockCutoff{32});
        CHECK(alpha.value.real() == 0.0);
    }
}

TEST_CASE("coherence decay rate: fit and eigenvalue methods agree") {
    const FockCutoff cutoff{64};
    const double d_fit = coherence_decay_rate(fig1_params(), cutoff, DecayRateMethod::fit);
    const double d_eig = coherence_decay_rate(fig1_params(), cutoff, DecayRateMethod::eigen);
    CHECK(d_fit == doctest::Approx(0.049).epsilon(0.10));
    CHECK(d_eig == doctest::Approx(0.049).epsilon(0.10));
    CHECK(std::abs(d_fit - d_eig) / d_eig < 0.02);
}

TEST_CASE("coherence decay rate: pure-decay limit gives gamma/2") {
    const FockCutoff cutoff{32};
    CHECK(coherence_decay_rate(pure_decay(), cutoff, DecayRateMethod::eigen) ==
          doctest::Approx(0.5).epsilon(1e-10));
    CHECK(coherence_decay_rate(pure_decay(), cutoff, DecayRateMethod::fit, 2.0) ==
          doctest::Approx(0.5).epsilon(0.005));
}

TEST_CASE("log of the decaying field amplitude is affine in time") {
    EvolveOptions opts;
    opts.k_max = 1;
    const FockCutoff cutoff{64};
    const ComplexAmplitude alpha = matched_alpha(fig1_params(), cutoff);
    const EvolveResult res =
        evolve(projector(coherent_state(alpha, cutoff)), fig1_params(), 100.0, 200, opts);

    // Least-squares line through log |re_a| over the window above 1e-3 of start.
    double sw = 0, st = 0, sl = 0, stt = 0, stl = 0;
    const double y0 = std::abs(res.record.re_a.front());
    for (std::size_t i = 0; i < res.record.times.size(); ++i) {
        const double y = std::abs(res.record.re_a[i]);
        if (y < 1e-3 * y0) break;
        const double t = res.record.times[i];
        const double l = std::log(y);
        sw += 1;
        st += t;
        sl += l;
        stt += t * t;
        stl += t * l;
    }
    const double slope = (sw * stl - st * sl) / (sw * stt - st * st);
    const double icept = (sl * stt - st * stl) / (sw * stt - st * st);
    double rss = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < res.record.times.size(); ++i) {
        const double y = std::abs(res.record.re_a[i]);
        if (y < 1e-3 * y0) break;
        const double r = std::log(y) - (icept + slope * res.record.times[i]);
        rss += r * r;
        ++count;
    }
    CHECK(std::sqrt(rss / count) < 0.01);
}

TEST_CASE("two initial states relax to the same photon statistics") {
    const MicromaserParams params = fig1_params();
    const FockCutoff cutoff{64};
    EvolveOptions opts;
    opts.k_max = 0;
    opts.record_photon_stats = true;

    Eigen::MatrixXcd vac = Eigen::MatrixXcd::Zero(65, 65);
    vac(0, 0) = 1.0;
    const EvolveResult from_vacuum = evolve(FieldState{vac, cutoff}, params, 100.0, 20, opts);
    const EvolveResult from_coherent =
        evolve(projector(coherent_state(matched_alpha(params, cutoff), cutoff)), params, 100.0,
               20, opts);
    CHECK((from_vacuum.record.photon_stats.back().p - from_coherent.record.photon_stats.back().p)
              .cwiseAbs()
              .maxCoeff() < 1e-6);
}

TEST_CASE("frozen statistics under the matched initial state") {
    const MicromaserParams params = fig1_params();
    const FockCutoff cutoff{64};
    EvolveOptions opts;
    opts.k_max = 0;
    opts.record_photon_stats = true;
    const double d = coherence_decay_rate(params, cutoff, DecayRateMethod::eigen);
    const EvolveResult res =
        evolve(projector(coherent_state(matched_alpha(params, cutoff), cutoff)), params,
               3.0 / d, 60, opts);
    const Eigen::VectorXd p0 = res.record.photon_stats.front().p;
    double dev = 0.0;
    for (const auto& st : res.record.photon_stats)
        dev = std::max(dev, (st.p - p0).cwiseAbs().maxCoeff());
    CHECK(dev < 0.02);
}

TEST_CASE("pump excited probability") {
    SUBCASE("vacuum input") {
        PhotonStatistics vac{Eigen::VectorXd::Zero(8)};
        vac.p[0] = 1.0;
        const double c = std::cos(0.494);
        CHECK(pump_excited_prob(vac, 0.494) == doctest::Approx(c * c).epsilon(1e-14));
    }
    SUBCASE("full Rabi transfer at g_tau sqrt(n+1) = pi/2") {
        PhotonStatistics fock{Eigen::VectorXd::Zero(8)};
        fock.p[3] = 1.0;
        const double g_tau = M_PI / 2.0 / std::sqrt(4.0);
        CHECK(pump_excited_prob(fock, g_tau) < 1e-14);
    }
    SUBCASE("stationary statistics give a constant output during diffusion") {
        const MicromaserParams params = fig1_params();
        const FockCutoff cutoff{64};
        const PhotonStatistics pss = steady_state(params, cutoff);
        const double pe0 = pump_excited_prob(pss, params.g_tau);
        CHECK(pe0 > 0.0);
        CHECK(pe0 < 1.0);

        Eigen::MatrixXcd diag = Eigen::MatrixXcd::Zero(65, 65);
        for (int n = 0; n < 65; ++n) diag(n, n) = pss.p[n];
        EvolveOptions opts;
        opts.k_max = 0;
        opts.record_photon_stats = true;
        const double d = coherence_decay_rate(params, cutoff, DecayRateMethod::eigen);
        const EvolveResult res = evolve(FieldState{diag, cutoff}, params, 2.0 / d, 20, opts);
        const double pe_late = pump_excited_prob(res.record.photon_stats.back(), params.g_tau);
        CHECK(std::abs(pe_late - pe0) < 1e-9);
    }
}

}  // TEST_SUITE
