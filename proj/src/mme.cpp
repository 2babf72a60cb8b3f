#include "maser/mme.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <sstream>

#include "maser/fitkit.hpp"

namespace maser {

namespace {

std::string fmt(double x) {
    std::ostringstream os;
    os << x;
    return os.str();
}

}  // namespace

void MicromaserParams::validate() const {
    if (!(g_tau > 0.0)) throw ConfigError("g_tau must be > 0");
    if (!(g_over_gamma > 0.0)) throw ConfigError("g_over_gamma must be > 0");
    if (!(r_over_gamma >= 0.0)) throw ConfigError("r_over_gamma must be >= 0");
    if (!(nbar >= 0.0)) throw ConfigError("nbar must be >= 0");
}

MmeCoefficients mme_coefficients(const MicromaserParams& params, int n, int m) {
    const double r = params.r_over_gamma;
    const double nb = params.nbar;
    const double gt = params.g_tau;
    MmeCoefficients co;
    co.a = r * std::sin(gt * std::sqrt(double(n))) * std::sin(gt * std::sqrt(double(m))) +
           nb * std::sqrt(double(n) * double(m));
    co.b = -r * (1.0 - std::cos(gt * std::sqrt(n + 1.0)) * std::cos(gt * std::sqrt(m + 1.0))) -
           0.5 * (nb + 1.0) * (n + m) - 0.5 * nb * (n + m + 2.0);
    co.c = (nb + 1.0) * std::sqrt((n + 1.0) * (m + 1.0));
    return co;
}

void BandGenerator::apply(const Eigen::VectorXcd& v, Eigen::VectorXcd& out) const {
    const int s = size();
    out.resize(s);
    for (int i = 0; i < s; ++i) {
        Complex acc = diag[i] * v[i];
        if (i > 0) acc += sub[i] * v[i - 1];
        if (i + 1 < s) acc += super[i] * v[i + 1];
        out[i] = acc;
    }
}

Eigen::MatrixXd BandGenerator::dense() const {
    const int s = size();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(s, s);
    for (int i = 0; i < s; ++i) {
        m(i, i) = diag[i];
        if (i > 0) m(i, i - 1) = sub[i];
        if (i + 1 < s) m(i, i + 1) = super[i];
    }
    return m;
}

BandGenerator build_band_generator(const MicromaserParams& params, int k, FockCutoff cutoff) {
    params.validate();
    cutoff.validate();
    if (k < 0 || k > cutoff.n_max)
        throw ConfigError("band offset k must satisfy 0 <= k <= n_max");
    const int s = cutoff.n_max - k + 1;
    BandGenerator gen;
    gen.k = k;
    gen.sub = Eigen::VectorXd::Zero(s);
    gen.diag = Eigen::VectorXd::Zero(s);
    gen.super = Eigen::VectorXd::Zero(s);
    for (int i = 0; i < s; ++i) {
        const MmeCoefficients co = mme_coefficients(params, i, i + k);
        gen.diag[i] = co.b;
        if (i > 0) gen.sub[i] = co.a;
        if (i + 1 < s) gen.super[i] = co.c;
    }
    if (k == 0) {
        // Close the chain at the cutoff: cancel the upward flux out of n_max
        // (the A coefficient that would feed the discarded level n_max+1).
        const MmeCoefficients top = mme_coefficients(params, cutoff.n_max + 1, cutoff.n_max + 1);
        gen.diag[s - 1] += top.a;
    }
    return gen;
}

BandState BandState::from_field_state(const FieldState& state, int k_max) {
    check_valid(state);
    const int n_max = state.cutoff.n_max;
    if (k_max < 0 || k_max > n_max) k_max = n_max;
    BandState bs{{}, state.cutoff};
    bs.bands.reserve(k_max + 1);
    for (int k = 0; k <= k_max; ++k) {
        Eigen::VectorXcd v(n_max - k + 1);
        for (int n = 0; n + k <= n_max; ++n) v[n] = state.rho(n, n + k);
        bs.bands.push_back(std::move(v));
    }
    return bs;
}

FieldState BandState::to_field_state() const {
    const int dim = cutoff.dim();
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(dim, dim);
    for (int k = 0; k < static_cast<int>(bands.size()); ++k) {
        const auto& v = bands[k];
        for (int n = 0; n < v.size(); ++n) {
            rho(n, n + k) = v[n];
            rho(n + k, n) = std::conj(v[n]);
        }
    }
    // The k = 0 band carries real diagonals up to roundoff; enforce exactly.
    for (int n = 0; n < dim; ++n) rho(n, n) = Complex(rho(n, n).real(), 0.0);
    return FieldState{std::move(rho), cutoff};
}

namespace {

struct Rk4Scratch {
    Eigen::VectorXcd k1, k2, k3, k4, tmp;
};

void rk4_step(const BandGenerator& gen, Eigen::VectorXcd& v, double h, Rk4Scratch& s) {
    gen.apply(v, s.k1);
    s.tmp = v + (0.5 * h) * s.k1;
    gen.apply(s.tmp, s.k2);
    s.tmp = v + (0.5 * h) * s.k2;
    gen.apply(s.tmp, s.k3);
    s.tmp = v + h * s.k3;
    gen.apply(s.tmp, s.k4);
    v += (h / 6.0) * (s.k1 + 2.0 * s.k2 + 2.0 * s.k3 + s.k4);
}

void integrate_interval(const std::vector<BandGenerator>& gens, std::vector<Eigen::VectorXcd>& bands,
                        double interval, double max_step, Rk4Scratch& s) {
    if (interval <= 0.0) return;
    const int steps = std::max(1, static_cast<int>(std::ceil(interval / max_step)));
    const double h = interval / steps;
    for (int step = 0; step < steps; ++step)
        for (std::size_t k = 0; k < gens.size(); ++k) rk4_step(gens[k], bands[k], h, s);
}

double re_field_amplitude_from_band1(const Eigen::VectorXcd& v1) {
    double a = 0.0;
    for (int n = 0; n < v1.size(); ++n) a += std::sqrt(n + 1.0) * v1[n].real();
    return a;
}

PhotonStatistics stats_from_band0(const Eigen::VectorXcd& v0, double t) {
    PhotonStatistics stats{Eigen::VectorXd(v0.size())};
    for (int n = 0; n < v0.size(); ++n) {
        double d = v0[n].real();
        if (d < -1e-9)
            throw InvalidStateError("diagonal entry " + fmt(d) + " below -1e-9 at gamma*t = " +
                                    fmt(t));
        stats.p[n] = d < 0.0 ? 0.0 : d;
    }
    return stats;
}

}  // namespace

EvolveResult evolve(const FieldState& state, const MicromaserParams& params, double t_end,
                    int n_samples, const EvolveOptions& options) {
    params.validate();
    check_valid(state);
    if (t_end < 0.0) throw std::invalid_argument("t_end must be >= 0");

    const int n_max = state.cutoff.n_max;
    int k_max = options.k_max;
    if (k_max < 0 || k_max > n_max) k_max = n_max;

    EvolveResult result;
    BandState bs = BandState::from_field_state(state, k_max);

    auto sample = [&](double t) {
        const Eigen::VectorXcd& v0 = bs.bands[0];
        const double tail = std::abs(v0[v0.size() - 1]);
        if (tail > state.cutoff.tail_tol)
            throw CutoffError("top-level occupation " + fmt(tail) + " exceeds tail tolerance at gamma*t = " + fmt(t));
        result.record.times.push_back(t);
        result.record.re_a.push_back(k_max >= 1 ? re_field_amplitude_from_band1(bs.bands[1]) : 0.0);
        if (options.record_photon_stats)
            result.record.photon_stats.push_back(stats_from_band0(v0, t));
        double trace = 0.0;
        for (int n = 0; n < v0.size(); ++n) trace += v0[n].real();
        result.max_trace_defect = std::max(result.max_trace_defect, std::abs(trace - 1.0));
    };

    sample(0.0);
    if (t_end == 0.0) {
        result.final_state = bs.to_field_state();
        result.max_hermiticity_defect = hermiticity_defect(result.final_state.rho);
        return result;
    }
    if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");

    std::vector<BandGenerator> gens;
    gens.reserve(k_max + 1);
    for (int k = 0; k <= k_max; ++k) gens.push_back(build_band_generator(params, k, state.cutoff));

    const double interval = t_end / n_samples;
    Rk4Scratch scratch;

    // Halved-step accuracy gate over the first interval, where the fast
    // transients live.
    {
        std::vector<Eigen::VectorXcd> shadow = bs.bands;
        integrate_interval(gens, shadow, interval, 0.5 * options.step, scratch);
        integrate_interval(gens, bs.bands, interval, options.step, scratch);
        double diff = 0.0;
        for (std::size_t k = 0; k < shadow.size(); ++k)
            diff = std::max(diff, (bs.bands[k] - shadow[k]).cwiseAbs().maxCoeff());
        if (diff > options.step_check_tol)
            throw StepSizeError("halved-step check: local error estimate " + fmt(diff) +
                                " exceeds " + fmt(options.step_check_tol) +
                                " over the first sample interval");
        bs.bands = std::move(shadow);  // keep the more accurate solution
    }
    sample(interval);

    for (int i = 2; i <= n_samples; ++i) {
        integrate_interval(gens, bs.bands, interval, options.step, scratch);
        sample(i * interval);
    }

    result.final_state = bs.to_field_state();
    result.max_hermiticity_defect = hermiticity_defect(result.final_state.rho);
    return result;
}

BandPropagatorSet::BandPropagatorSet(const MicromaserParams& params, FockCutoff cutoff, double dt,
                                     int k_max)
    : dt_(dt) {
    params.validate();
    cutoff.validate();
    if (!(dt > 0.0)) throw ConfigError("propagator dt must be > 0");
    if (k_max < 0 || k_max > cutoff.n_max) k_max = cutoff.n_max;
    props_.reserve(k_max + 1);
    for (int k = 0; k <= k_max; ++k) {
        Eigen::MatrixXd l = build_band_generator(params, k, cutoff).dense();
        props_.push_back((l * dt).exp());
    }
}

void BandPropagatorSet::advance(BandState& state) const {
    if (state.bands.size() > props_.size())
        throw std::invalid_argument("band state holds more bands than propagators");
    for (std::size_t k = 0; k < state.bands.size(); ++k) {
        const Eigen::MatrixXd& p = props_[k];
        Eigen::VectorXd re = p * state.bands[k].real();
        Eigen::VectorXd im = p * state.bands[k].imag();
        state.bands[k].real() = re;
        state.bands[k].imag() = im;
    }
}

PhotonStatistics steady_state(const MicromaserParams& params, FockCutoff cutoff) {
    params.validate();
    cutoff.validate();
    const Eigen::MatrixXd l0 = build_band_generator(params, 0, cutoff).dense();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(l0, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    const int n = static_cast<int>(sv.size());
    const double smax = sv[0];
    if (n >= 2 && sv[n - 2] <= 1e-10 * smax)
        throw DegenerateNullspaceError("k = 0 generator null space is not one-dimensional "
                                       "(second singular value " + fmt(sv[n - 2]) + ")");
    Eigen::VectorXd v = svd.matrixV().col(n - 1);
    const double total = v.sum();
    if (std::abs(total) < 1e-300)
        throw DegenerateNullspaceError("null vector has zero total mass");
    v /= total;
    for (int i = 0; i < n; ++i) {
        if (v[i] < -1e-9)
            throw DegenerateNullspaceError("null vector entry " + fmt(v[i]) + " is not a probability");
        if (v[i] < 0.0) v[i] = 0.0;
    }
    v /= v.sum();
    if (v[n - 1] > cutoff.tail_tol)
        throw CutoffError("steady state occupies the top level with p = " + fmt(v[n - 1]));
    return PhotonStatistics{std::move(v)};
}

ComplexAmplitude alpha_from_statistics(const PhotonStatistics& stats) {
    return ComplexAmplitude{Complex(std::sqrt(std::max(0.0, stats.mean())), 0.0)};
}

ComplexAmplitude matched_alpha(const MicromaserParams& params, FockCutoff cutoff) {
    return alpha_from_statistics(steady_state(params, cutoff));
}

namespace {

double decay_rate_eigen(const MicromaserParams& params, FockCutoff cutoff) {
    const Eigen::MatrixXd l1 = build_band_generator(params, 1, cutoff).dense();
    Eigen::EigenSolver<Eigen::MatrixXd> es(l1, false);
    double slowest = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < es.eigenvalues().size(); ++i)
        slowest = std::max(slowest, es.eigenvalues()[i].real());
    const double d = -slowest;
    if (!(d > 0.0)) throw FitError("k = 1 band has a non-decaying eigenvalue, D = " + fmt(d));
    return d;
}

}  // namespace

double coherence_decay_rate(const MicromaserParams& params, FockCutoff cutoff,
                            DecayRateMethod method, std::optional<double> initial_alpha) {
    params.validate();
    cutoff.validate();
    if (method == DecayRateMethod::eigen) return decay_rate_eigen(params, cutoff);

    ComplexAmplitude alpha =
        initial_alpha ? ComplexAmplitude{Complex(*initial_alpha, 0.0)} : matched_alpha(params, cutoff);
    if (std::norm(alpha.value) < 1e-12)
        throw FitError("initial coherent amplitude is zero; no coherence to track");

    const double d_guess = decay_rate_eigen(params, cutoff);
    const double t_end = 7.2 / d_guess;  // ~3 decades of decay plus margin
    const int n_samples = 240;

    EvolveOptions opts;
    opts.k_max = 1;
    const EvolveResult res = evolve(projector(coherent_state(alpha, cutoff)), params, t_end,
                                    n_samples, opts);

    const double y0 = std::abs(res.record.re_a.front());
    std::vector<double> t, y;
    for (std::size_t i = 0; i < res.record.times.size(); ++i) {
        if (std::abs(res.record.re_a[i]) < 1e-3 * y0) break;
        t.push_back(res.record.times[i]);
        y.push_back(res.record.re_a[i]);
    }
    const DecayFit fit = fit_offset_exponential(t, y, 0.0);
    return fit.d;
}

double pump_excited_prob(const PhotonStatistics& stats, double g_tau) {
    double pe = 0.0;
    for (int n = 0; n < stats.p.size(); ++n) {
        const double c = std::cos(g_tau * std::sqrt(n + 1.0));
        pe += stats.p[n] * c * c;
    }
    return pe;
}

}  // namespace maser
