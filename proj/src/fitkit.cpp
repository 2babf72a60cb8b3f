#include "maser/fitkit.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

namespace maser {

namespace {

constexpr int kMaxIterations = 200;
constexpr double kRelTol = 1e-10;

void check_inputs(std::span<const double> t, std::span<const double> y, std::size_t min_points,
                  std::span<const double> sigma) {
    if (t.size() != y.size()) throw std::invalid_argument("t and y must have equal length");
    if (t.size() < min_points)
        throw FitError("need at least " + std::to_string(min_points) + " points, got " +
                       std::to_string(t.size()));
    for (std::size_t i = 1; i < t.size(); ++i)
        if (!(t[i] > t[i - 1])) throw std::invalid_argument("t must be strictly increasing");
    if (!sigma.empty() && sigma.size() != y.size())
        throw std::invalid_argument("sigma must match y in length");
}

double weight(std::span<const double> sigma, std::size_t i) {
    return sigma.empty() ? 1.0 : 1.0 / sigma[i];
}

double objective(std::span<const double> t, std::span<const double> y,
                 std::span<const double> sigma, double k, double d, double c) {
    double sse = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double r = (y[i] - (k * std::exp(-d * t[i]) + c)) * weight(sigma, i);
        sse += r * r;
    }
    return sse;
}

}  // namespace

namespace detail {

std::pair<double, double> loglinear_init(std::span<const double> t, std::span<const double> y,
                                         double offset) {
    // Regress log|y - offset| = log|K| - D t over points carrying signal.
    double zmax = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) zmax = std::max(zmax, std::abs(y[i] - offset));
    if (zmax <= 0.0) return {0.0, 0.0};
    double sw = 0, st = 0, sl = 0, stt = 0, stl = 0;
    double sign_acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double z = y[i] - offset;
        if (std::abs(z) < 1e-12 * zmax) continue;
        const double l = std::log(std::abs(z));
        sw += 1.0;
        st += t[i];
        sl += l;
        stt += t[i] * t[i];
        stl += t[i] * l;
        sign_acc += (z > 0 ? 1.0 : -1.0) * std::abs(z);
    }
    const double det = sw * stt - st * st;
    if (sw < 2.0 || std::abs(det) < 1e-300) return {sign_acc >= 0 ? zmax : -zmax, 0.0};
    const double slope = (sw * stl - st * sl) / det;
    const double intercept = (sl * stt - st * stl) / det;
    const double k = (sign_acc >= 0 ? 1.0 : -1.0) * std::exp(intercept);
    return {k, -slope};
}

}  // namespace detail

DecayFit fit_offset_exponential(std::span<const double> t, std::span<const double> y,
                                std::optional<double> fixed_offset,
                                std::span<const double> sigma) {
    check_inputs(t, y, 4, sigma);
    const std::size_t n = t.size();

    double ymin = y[0], ymax = y[0];
    for (double v : y) {
        ymin = std::min(ymin, v);
        ymax = std::max(ymax, v);
    }
    if (ymax - ymin < 1e-12)
        throw DegenerateDataError("y is constant within 1e-12; decay rate undefined");

    double c = fixed_offset.value_or(y[n - 1]);
    auto [k, d] = detail::loglinear_init(t, y, c);
    if (!(d > 0.0)) d = 1.0 / std::max(t[n - 1] - t[0], 1e-12);
    if (k == 0.0) k = (y[0] - c != 0.0) ? y[0] - c : ymax - ymin;

    const bool fit_c = !fixed_offset.has_value();
    const int np = fit_c ? 3 : 2;

    double sse = objective(t, y, sigma, k, d, c);
    double lambda = 1e-3;
    bool converged = false;

    for (int iter = 0; iter < kMaxIterations && !converged; ++iter) {
        Eigen::MatrixXd jtj = Eigen::MatrixXd::Zero(np, np);
        Eigen::VectorXd jtr = Eigen::VectorXd::Zero(np);
        for (std::size_t i = 0; i < n; ++i) {
            const double w = weight(sigma, i);
            const double e = std::exp(-d * t[i]);
            const double r = (y[i] - (k * e + c)) * w;
            Eigen::VectorXd j(np);
            j[0] = e * w;
            j[1] = -k * t[i] * e * w;
            if (fit_c) j[2] = w;
            jtj += j * j.transpose();
            jtr += j * r;
        }
        // Levenberg damping on the normal equations; x10 on reject, /3 on accept.
        bool accepted = false;
        for (int tries = 0; tries < 60 && !accepted; ++tries) {
            Eigen::MatrixXd a = jtj;
            for (int p = 0; p < np; ++p) a(p, p) += lambda * std::max(jtj(p, p), 1e-300);
            const Eigen::VectorXd delta = a.ldlt().solve(jtr);
            const double k_new = k + delta[0];
            const double d_new = d + delta[1];
            const double c_new = fit_c ? c + delta[2] : c;
            if (d_new > 0.0) {
                const double sse_new = objective(t, y, sigma, k_new, d_new, c_new);
                if (sse_new <= sse) {
                    double rel = 0.0;
                    for (int p = 0; p < np; ++p) {
                        const double base = std::max(std::abs(p == 0 ? k : (p == 1 ? d : c)), 1e-300);
                        rel = std::max(rel, std::abs(delta[p]) / base);
                    }
                    k = k_new;
                    d = d_new;
                    c = c_new;
                    sse = sse_new;
                    lambda = std::max(lambda / 3.0, 1e-14);
                    accepted = true;
                    if (rel < kRelTol) converged = true;
                    break;
                }
            }
            lambda *= 10.0;
            if (lambda > 1e14) break;
        }
        if (!accepted) break;  // no improving step left at any damping
    }

    if (!converged) {
        // A stalled search at an already-excellent minimum still counts.
        const double scale = std::max({std::abs(ymax), std::abs(ymin), 1e-300});
        if (std::sqrt(sse / n) > 1e-6 * scale)
            throw FitError("offset-exponential fit did not converge");
    }
    if (!(d > 0.0)) throw FitError("fitted decay rate is not positive");
    return DecayFit{k, d, c, std::sqrt(sse / n), static_cast<int>(n)};
}

DecayFit fit_saturating_exponential(std::span<const double> t, std::span<const double> y,
                                    double amplitude) {
    check_inputs(t, y, 3, {});
    const std::size_t n = t.size();

    double ymax_abs = 0.0;
    for (double v : y) ymax_abs = std::max(ymax_abs, std::abs(v));
    if (ymax_abs < 1e-12) throw DegenerateDataError("y is identically zero; rate undefined");
    if (amplitude == 0.0) throw std::invalid_argument("amplitude must be nonzero");

    // Initialize from the pointwise inversions D = -log(1 - y/A)/t.
    double d = 0.0;
    int used = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double frac = y[i] / amplitude;
        if (t[i] > 0.0 && frac > 0.0 && frac < 1.0) {
            d += -std::log1p(-frac) / t[i];
            ++used;
        }
    }
    d = used > 0 ? d / used : 1.0 / std::max(t[n - 1] - t[0], 1e-12);
    if (!(d > 0.0)) d = 1.0 / std::max(t[n - 1] - t[0], 1e-12);

    auto sse_at = [&](double dd) {
        double sse = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = y[i] - amplitude * (1.0 - std::exp(-dd * t[i]));
            sse += r * r;
        }
        return sse;
    };

    double sse = sse_at(d);
    double lambda = 1e-3;
    bool converged = false;
    for (int iter = 0; iter < kMaxIterations && !converged; ++iter) {
        double jtj = 0.0, jtr = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double e = std::exp(-d * t[i]);
            const double r = y[i] - amplitude * (1.0 - e);
            const double j = amplitude * t[i] * e;  // d(model)/dD
            jtj += j * j;
            jtr += j * r;
        }
        bool accepted = false;
        for (int tries = 0; tries < 60 && !accepted; ++tries) {
            const double delta = jtr / (jtj * (1.0 + lambda) + 1e-300);
            const double d_new = d + delta;
            if (d_new > 0.0) {
                const double sse_new = sse_at(d_new);
                if (sse_new <= sse) {
                    const double rel = std::abs(delta) / std::max(std::abs(d), 1e-300);
                    d = d_new;
                    sse = sse_new;
                    lambda = std::max(lambda / 3.0, 1e-14);
                    accepted = true;
                    if (rel < kRelTol) converged = true;
                    break;
                }
            }
            lambda *= 10.0;
            if (lambda > 1e14) break;
        }
        if (!accepted) break;
    }

    if (!converged && std::sqrt(sse / n) > 1e-6 * std::max(std::abs(amplitude), ymax_abs))
        throw FitError("saturating-exponential fit did not converge");
    if (!(d > 0.0)) throw FitError("fitted rate is not positive");
    return DecayFit{-amplitude, d, amplitude, std::sqrt(sse / n), static_cast<int>(n)};
}

}  // namespace maser
