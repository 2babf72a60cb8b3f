#include "maser/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include "maser/mcwf.hpp"
#include "maser/probe.hpp"

namespace maser {

namespace {

constexpr const char* kVersion = "1.0.0";

int log_level() {
    static const int level = [] {
        const char* env = std::getenv("MASER_LOG");
        if (!env) return 0;
        if (std::strcmp(env, "debug") == 0) return 2;
        if (std::strcmp(env, "info") == 0) return 1;
        return 0;
    }();
    return level;
}

void log_info(const std::string& msg) {
    if (log_level() >= 1) std::cerr << "[masersim] " << msg << "\n";
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

struct RawConfig {
    // key -> (value text, first line number)
    std::map<std::string, std::pair<std::string, int>> entries;
};

const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "g_tau", "g_over_gamma", "r_over_gamma", "nbar",  "n_max",  "alpha",
        "g_tau_p", "t_end", "n_samples", "fit_start", "seed", "n_trajectories",
        "dt", "bands", "threads"};
    return keys;
}

bool is_known_key(const std::string& key) {
    for (const auto& k : known_keys())
        if (k == key) return true;
    return false;
}

RawConfig tokenize(const std::string& text, std::vector<std::string>& errors) {
    RawConfig raw;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            errors.push_back("line " + std::to_string(lineno) + " is not of the form key = value");
            continue;
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            errors.push_back("line " + std::to_string(lineno) + " is not of the form key = value");
            continue;
        }
        if (!is_known_key(key)) {
            errors.push_back("unknown key '" + key + "' (line " + std::to_string(lineno) + ")");
            continue;
        }
        const auto it = raw.entries.find(key);
        if (it != raw.entries.end()) {
            errors.push_back("duplicate key '" + key + "' (lines " +
                             std::to_string(it->second.second) + " and " + std::to_string(lineno) +
                             ")");
            continue;
        }
        raw.entries[key] = {value, lineno};
    }
    return raw;
}

class ConfigReader {
public:
    ConfigReader(const RawConfig& raw, std::vector<std::string>& errors,
                 std::vector<std::string>& defaulted)
        : raw_(raw), errors_(errors), defaulted_(defaulted) {}

    bool has(const std::string& key) const { return raw_.entries.count(key) > 0; }

    double number(const std::string& key, double fallback) {
        const auto it = raw_.entries.find(key);
        if (it == raw_.entries.end()) {
            defaulted_.push_back(key);
            return fallback;
        }
        return parse(key, it->second);
    }

    std::optional<double> optional_number(const std::string& key) {
        const auto it = raw_.entries.find(key);
        if (it == raw_.entries.end()) {
            defaulted_.push_back(key);
            return std::nullopt;
        }
        return parse(key, it->second);
    }

    long long integer(const std::string& key, long long fallback) {
        const double v = number(key, static_cast<double>(fallback));
        if (v != std::floor(v)) {
            errors_.push_back("value for '" + key + "' must be an integer");
            return fallback;
        }
        return static_cast<long long>(v);
    }

private:
    double parse(const std::string& key, const std::pair<std::string, int>& entry) {
        const std::string& text = entry.first;
        char* end = nullptr;
        const double v = std::strtod(text.c_str(), &end);
        if (end == text.c_str() || *end != '\0' || !std::isfinite(v)) {
            errors_.push_back("value for '" + key + "' is not a number (line " +
                              std::to_string(entry.second) + ")");
            return 0.0;
        }
        return v;
    }

    const RawConfig& raw_;
    std::vector<std::string>& errors_;
    std::vector<std::string>& defaulted_;
};

struct ScenarioDefaults {
    int n_max;
    double g_tau_p_factor;  // multiplies g_tau when >= 0, else fixed value below
    double g_tau_p_fixed;
    double t_end;
    int n_samples;
};

ScenarioDefaults defaults_for(Scenario s) {
    switch (s) {
        case Scenario::steady:
            return {64, 1.0, -1.0, 150.0, 300};
        case Scenario::diffuse:
            return {64, 1.0, -1.0, 150.0, 300};
        case Scenario::probe:
            // The counter-displaced field spreads to roughly twice the mean
            // photon number, so it needs headroom past the diffuse default.
            return {96, 1.0, -1.0, 150.0, 300};
        case Scenario::shorttime:
            return {96, -1.0, 0.1, 60.0, 120};
        case Scenario::mcwf:
            return {64, 1.0, -1.0, 20.0, 10};
    }
    return {64, 1.0, -1.0, 150.0, 300};
}

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

}  // namespace

const char* scenario_name(Scenario s) {
    switch (s) {
        case Scenario::steady: return "steady";
        case Scenario::diffuse: return "diffuse";
        case Scenario::probe: return "probe";
        case Scenario::shorttime: return "shorttime";
        case Scenario::mcwf: return "mcwf";
    }
    return "unknown";
}

std::string format_value(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

ScenarioConfig validate_config(const std::string& text, Scenario scenario) {
    std::vector<std::string> errors;
    const RawConfig raw = tokenize(text, errors);
    if (raw.entries.empty() && errors.empty())
        errors.push_back("config file contains no keys");

    ScenarioConfig cfg;
    ConfigReader reader(raw, errors, cfg.defaulted_keys);
    const ScenarioDefaults def = defaults_for(scenario);

    cfg.params.g_tau = reader.number("g_tau", 0.494);
    cfg.params.g_over_gamma = reader.number("g_over_gamma", 12.300);
    cfg.params.r_over_gamma = reader.number("r_over_gamma", 10.0);
    cfg.params.nbar = reader.number("nbar", 0.03);
    cfg.n_max = static_cast<int>(reader.integer("n_max", def.n_max));
    cfg.alpha = reader.optional_number("alpha");
    cfg.g_tau_p = reader.number(
        "g_tau_p", def.g_tau_p_factor >= 0.0 ? def.g_tau_p_factor * cfg.params.g_tau
                                             : def.g_tau_p_fixed);
    cfg.t_end = reader.number("t_end", def.t_end);
    cfg.n_samples = static_cast<int>(reader.integer("n_samples", def.n_samples));
    cfg.fit_start = reader.optional_number("fit_start");
    cfg.seed = static_cast<std::uint64_t>(reader.integer("seed", 12345));
    cfg.n_trajectories = static_cast<int>(reader.integer("n_trajectories", 2000));
    cfg.dt = reader.number("dt", 2e-3);
    cfg.bands = static_cast<int>(reader.integer("bands", 3));
    cfg.threads = static_cast<int>(reader.integer("threads", 0));

    if (!(cfg.params.g_tau > 0.0)) errors.push_back("g_tau must be > 0");
    if (!(cfg.params.g_over_gamma > 0.0)) errors.push_back("g_over_gamma must be > 0");
    if (!(cfg.params.r_over_gamma >= 0.0)) errors.push_back("r_over_gamma must be >= 0");
    if (!(cfg.params.nbar >= 0.0)) errors.push_back("nbar must be >= 0");
    if (cfg.n_max < 1) errors.push_back("n_max must be >= 1");
    if (cfg.alpha && !(*cfg.alpha > 0.0)) errors.push_back("alpha must be > 0");
    if (!(cfg.g_tau_p > 0.0)) errors.push_back("g_tau_p must be > 0");
    if (!(cfg.t_end > 0.0)) errors.push_back("t_end must be > 0");
    if (cfg.n_samples < 1) errors.push_back("n_samples must be >= 1");
    if (cfg.fit_start && !(*cfg.fit_start >= 0.0)) errors.push_back("fit_start must be >= 0");
    if (cfg.n_trajectories < 1) errors.push_back("n_trajectories must be >= 1");
    if (!(cfg.dt > 0.0)) errors.push_back("dt must be > 0");
    if (cfg.bands < -1) errors.push_back("bands must be >= -1 (-1 keeps all bands)");
    if (cfg.threads < 0) errors.push_back("threads must be >= 0");

    if (!errors.empty()) throw ConfigError(join(errors, "\n"));
    return cfg;
}

ScenarioConfig load_config_file(const std::filesystem::path& path, Scenario scenario) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return validate_config(buf.str(), scenario);
}

namespace {

struct OutputFile {
    std::string name;
    std::string content;
};

std::string metadata_block(Scenario scenario, const ScenarioConfig& cfg, double alpha_used) {
    std::ostringstream os;
    os << "# masersim " << scenario_name(scenario) << "\n";
    os << "# version = " << kVersion << "\n";
    os << "# units: time in gamma*t, rates in units of gamma, observables dimensionless\n";
    os << "# g_tau = " << format_value(cfg.params.g_tau) << "\n";
    os << "# g_over_gamma = " << format_value(cfg.params.g_over_gamma) << "\n";
    os << "# r_over_gamma = " << format_value(cfg.params.r_over_gamma) << "\n";
    os << "# nbar = " << format_value(cfg.params.nbar) << "\n";
    os << "# n_max = " << cfg.n_max << "\n";
    os << "# alpha = " << format_value(alpha_used)
       << (cfg.alpha ? "" : " (auto-matched)") << "\n";
    os << "# g_tau_p = " << format_value(cfg.g_tau_p) << "\n";
    os << "# t_end = " << format_value(cfg.t_end) << "\n";
    os << "# n_samples = " << cfg.n_samples << "\n";
    os << "# seed = " << cfg.seed << "\n";
    os << "# n_trajectories = " << cfg.n_trajectories << "\n";
    os << "# dt = " << format_value(cfg.dt) << "\n";
    os << "# bands = " << cfg.bands << "\n";
    if (!cfg.defaulted_keys.empty())
        os << "# defaulted: " << join(cfg.defaulted_keys, ",") << "\n";
    return os.str();
}

std::vector<double> uniform_times(double t_end, int n_samples) {
    std::vector<double> t(n_samples + 1);
    for (int i = 0; i <= n_samples; ++i) t[i] = t_end * i / n_samples;
    return t;
}

double resolve_alpha(const ScenarioConfig& cfg) {
    if (cfg.alpha) return *cfg.alpha;
    return matched_alpha(cfg.params, cfg.cutoff()).value.real();
}

using Summary = std::map<std::string, std::string>;

void put(Summary& s, const std::string& key, double v) { s[key] = format_value(v); }

// ---- steady ----------------------------------------------------------------

std::vector<OutputFile> run_steady(const ScenarioConfig& cfg, Summary& summary) {
    const FockCutoff cutoff = cfg.cutoff();
    const PhotonStatistics pss = steady_state(cfg.params, cutoff);
    const double alpha = alpha_from_statistics(pss).value.real();
    const PureState matched = coherent_state(ComplexAmplitude{alpha}, cutoff);

    put(summary, "mean_photon", pss.mean());
    put(summary, "matched_alpha", alpha);
    put(summary, "top_level_occupation", pss.p[pss.p.size() - 1]);

    std::ostringstream csv;
    csv << metadata_block(Scenario::steady, cfg, alpha);
    csv << "n,p_ss,p_coherent_match\n";
    for (int n = 0; n < pss.p.size(); ++n)
        csv << n << "," << format_value(pss.p[n]) << ","
            << format_value(std::norm(matched.c[n])) << "\n";
    return {{"photon_stats.csv", csv.str()}};
}

// ---- diffuse ---------------------------------------------------------------

std::vector<OutputFile> run_diffuse(const ScenarioConfig& cfg, Summary& summary) {
    const FockCutoff cutoff = cfg.cutoff();
    const double alpha = resolve_alpha(cfg);

    EvolveOptions opts;
    opts.k_max = cfg.bands;
    opts.record_photon_stats = true;
    const FieldState initial = projector(coherent_state(ComplexAmplitude{alpha}, cutoff));
    const EvolveResult res = evolve(initial, cfg.params, cfg.t_end, cfg.n_samples, opts);

    const double d_eigen = coherence_decay_rate(cfg.params, cutoff, DecayRateMethod::eigen);

    // Fit window: from 0 until the signal falls below 1e-3 of its start.
    const double y0 = std::abs(res.record.re_a.front());
    std::vector<double> tw, yw;
    for (std::size_t i = 0; i < res.record.times.size(); ++i) {
        if (std::abs(res.record.re_a[i]) < 1e-3 * y0) break;
        tw.push_back(res.record.times[i]);
        yw.push_back(res.record.re_a[i]);
    }
    const DecayFit fit = fit_offset_exponential(tw, yw, 0.0);

    double log_rss = 0.0;
    for (std::size_t i = 0; i < tw.size(); ++i) {
        const double r = std::log(std::abs(yw[i])) - (std::log(std::abs(fit.k)) - fit.d * tw[i]);
        log_rss += r * r;
    }
    const double rms_log = std::sqrt(log_rss / tw.size());

    // Frozen-statistics and pump-blindness diagnostics over the record.
    const Eigen::VectorXd p0 = res.record.photon_stats.front().p;
    double frozen_dev = 0.0, pe_min = 1.0, pe_max = 0.0;
    for (const auto& st : res.record.photon_stats) {
        frozen_dev = std::max(frozen_dev, (st.p - p0).cwiseAbs().maxCoeff());
        const double pe = pump_excited_prob(st, cfg.params.g_tau);
        pe_min = std::min(pe_min, pe);
        pe_max = std::max(pe_max, pe);
    }

    put(summary, "alpha", alpha);
    put(summary, "D_fit_over_gamma", fit.d);
    put(summary, "D_eigen_over_gamma", d_eigen);
    put(summary, "re_a_initial", res.record.re_a.front());
    put(summary, "rms_log_residual", rms_log);
    put(summary, "fit_window_end", tw.back());
    summary["fit_points"] = std::to_string(fit.n_points);
    put(summary, "max_trace_defect", res.max_trace_defect);
    put(summary, "max_hermiticity_defect", res.max_hermiticity_defect);
    put(summary, "frozen_stats_max_dev", frozen_dev);
    put(summary, "pump_excited_prob_drift", pe_max - pe_min);

    std::ostringstream series;
    series << metadata_block(Scenario::diffuse, cfg, alpha);
    series << "gamma_t,re_a\n";
    for (std::size_t i = 0; i < res.record.times.size(); ++i)
        series << format_value(res.record.times[i]) << "," << format_value(res.record.re_a[i])
               << "\n";

    std::ostringstream stats;
    stats << metadata_block(Scenario::diffuse, cfg, alpha);
    stats << "n,p_initial,p_final\n";
    const Eigen::VectorXd pf = res.record.photon_stats.back().p;
    for (int n = 0; n < p0.size(); ++n)
        stats << n << "," << format_value(p0[n]) << "," << format_value(pf[n]) << "\n";

    return {{"series.csv", series.str()}, {"photon_stats.csv", stats.str()}};
}

// ---- probe -----------------------------------------------------------------

std::vector<OutputFile> run_probe(const ScenarioConfig& cfg, Summary& summary) {
    const FockCutoff cutoff = cfg.cutoff();
    const double alpha = resolve_alpha(cfg);

    ProbeConfig probe;
    probe.g_tau_p = cfg.g_tau_p;
    probe.alpha = ComplexAmplitude{alpha};
    probe.interrogation_times = uniform_times(cfg.t_end, cfg.n_samples);

    const ProtocolSeries series = run_protocol(cfg.params, probe, cutoff);
    const double d_eigen = coherence_decay_rate(cfg.params, cutoff, DecayRateMethod::eigen);
    const double fit_start = cfg.fit_start ? *cfg.fit_start : 1.5 / d_eigen;
    const DecayFit fit = extract_linewidth_late_time(series, fit_start);
    const ProtocolConstants consts = fit_constants(
        cfg.params, probe, projector(coherent_state(probe.alpha, cutoff)), cutoff);

    std::size_t imin = 0;
    for (std::size_t i = 0; i < series.p_e.size(); ++i)
        if (series.p_e[i] < series.p_e[imin]) imin = i;

    put(summary, "alpha", alpha);
    put(summary, "D_late_over_gamma", fit.d);
    put(summary, "K_fit", fit.k);
    put(summary, "p_inf_fit", fit.c);
    put(summary, "K_formula", consts.k);
    put(summary, "p_inf_formula", consts.p_inf);
    put(summary, "fit_start", fit_start);
    put(summary, "rms_residual", fit.rms_residual);
    put(summary, "D_eigen_over_gamma", d_eigen);
    put(summary, "pe_min", series.p_e[imin]);
    put(summary, "pe_min_time", series.times[imin]);
    put(summary, "pe_initial", series.p_e.front());
    put(summary, "pe_final", series.p_e.back());

    std::ostringstream csv;
    csv << metadata_block(Scenario::probe, cfg, alpha);
    csv << "gamma_t,p_e,p_g,mean_n\n";
    for (std::size_t i = 0; i < series.times.size(); ++i)
        csv << format_value(series.times[i]) << "," << format_value(series.p_e[i]) << ","
            << format_value(series.p_g[i]) << "," << format_value(series.mean_n[i]) << "\n";

    std::ostringstream stats;
    stats << metadata_block(Scenario::probe, cfg, alpha);
    stats << "n,p_tilde_final\n";
    const Eigen::VectorXd& pf = series.stats.back().p;
    for (int n = 0; n < pf.size(); ++n) stats << n << "," << format_value(pf[n]) << "\n";

    return {{"series.csv", csv.str()}, {"photon_stats.csv", stats.str()}};
}

// ---- shorttime -------------------------------------------------------------

std::vector<OutputFile> run_shorttime(const ScenarioConfig& cfg, Summary& summary) {
    const FockCutoff cutoff = cfg.cutoff();
    const double alpha = resolve_alpha(cfg);

    ProbeConfig probe;
    probe.g_tau_p = cfg.g_tau_p;
    probe.alpha = ComplexAmplitude{alpha};
    probe.interrogation_times = uniform_times(cfg.t_end, cfg.n_samples);

    const ProtocolSeries series = run_protocol(cfg.params, probe, cutoff);
    const ValidityCheck validity = check_shorttime_validity(series.stats.front(), cfg.g_tau_p);
    const DecayFit fit = extract_linewidth_shorttime(series, probe);
    const double d_eigen = coherence_decay_rate(cfg.params, cutoff, DecayRateMethod::eigen);

    const double gtp2 = cfg.g_tau_p * cfg.g_tau_p;

    put(summary, "alpha", alpha);
    put(summary, "D_shorttime_over_gamma", fit.d);
    put(summary, "amplitude", 2.0 * alpha * alpha);
    put(summary, "D_eigen_over_gamma", d_eigen);
    summary["validity_ok"] = validity.valid ? "yes" : "no";
    summary["validity_n_eff"] = std::to_string(validity.n_eff);
    put(summary, "validity_phase", validity.phase);
    put(summary, "rms_residual", fit.rms_residual);
    summary["fit_points"] = std::to_string(fit.n_points);

    std::ostringstream csv;
    csv << metadata_block(Scenario::shorttime, cfg, alpha);
    csv << "gamma_t,p_g,mean_n_est,mean_n_exact\n";
    for (std::size_t i = 0; i < series.times.size(); ++i)
        csv << format_value(series.times[i]) << "," << format_value(series.p_g[i]) << ","
            << format_value(series.p_g[i] / gtp2 - 1.0) << ","
            << format_value(series.mean_n[i]) << "\n";

    return {{"series.csv", csv.str()}};
}

// ---- mcwf ------------------------------------------------------------------

std::vector<OutputFile> run_mcwf(const ScenarioConfig& cfg, Summary& summary) {
    const FockCutoff cutoff = cfg.cutoff();
    const double alpha = resolve_alpha(cfg);

    TrajectoryConfig traj;
    traj.master_seed = cfg.seed;
    traj.n_trajectories = cfg.n_trajectories;
    traj.dt = cfg.dt;
    traj.t_end = cfg.t_end;
    traj.sample_times = uniform_times(cfg.t_end, cfg.n_samples);
    traj.n_threads = cfg.threads;

    const PureState initial = coherent_state(ComplexAmplitude{alpha}, cutoff);
    const EnsembleEstimate est = run_ensemble(initial, cfg.params, traj);

    put(summary, "alpha", alpha);
    summary["seed"] = std::to_string(cfg.seed);
    summary["n_trajectories"] = std::to_string(cfg.n_trajectories);
    put(summary, "dt", cfg.dt);
    put(summary, "final_mean_photon", est.mean_photon.back());
    put(summary, "final_mean_photon_se", est.mean_photon_se.back());
    put(summary, "final_re_a", est.re_a.back());
    put(summary, "final_re_a_se", est.re_a_se.back());

    std::ostringstream csv;
    csv << metadata_block(Scenario::mcwf, cfg, alpha);
    csv << "gamma_t,mean_photon,mean_photon_se,re_a,re_a_se\n";
    for (std::size_t i = 0; i < est.times.size(); ++i)
        csv << format_value(est.times[i]) << "," << format_value(est.mean_photon[i]) << ","
            << format_value(est.mean_photon_se[i]) << "," << format_value(est.re_a[i]) << ","
            << format_value(est.re_a_se[i]) << "\n";

    std::ostringstream stats;
    stats << metadata_block(Scenario::mcwf, cfg, alpha);
    stats << "n,p_final,p_final_se\n";
    const Eigen::VectorXd& pf = est.photon_stats.back();
    const Eigen::VectorXd& se = est.photon_stats_se.back();
    for (int n = 0; n < pf.size(); ++n)
        stats << n << "," << format_value(pf[n]) << "," << format_value(se[n]) << "\n";

    return {{"series.csv", csv.str()}, {"photon_stats.csv", stats.str()}};
}

}  // namespace

ScenarioResult run_scenario(Scenario scenario, const ScenarioConfig& cfg,
                            const std::filesystem::path& out_dir) {
    log_info(std::string("running scenario '") + scenario_name(scenario) + "'");

    ScenarioResult result;
    std::vector<OutputFile> files;
    switch (scenario) {
        case Scenario::steady: files = run_steady(cfg, result.summary); break;
        case Scenario::diffuse: files = run_diffuse(cfg, result.summary); break;
        case Scenario::probe: files = run_probe(cfg, result.summary); break;
        case Scenario::shorttime: files = run_shorttime(cfg, result.summary); break;
        case Scenario::mcwf: files = run_mcwf(cfg, result.summary); break;
    }

    // Summary is a file too; assemble it before any disk write.
    const double alpha_echo =
        result.summary.count("alpha") ? std::strtod(result.summary["alpha"].c_str(), nullptr)
                                      : (result.summary.count("matched_alpha")
                                             ? std::strtod(result.summary["matched_alpha"].c_str(),
                                                           nullptr)
                                             : 0.0);
    std::ostringstream sum;
    sum << metadata_block(scenario, cfg, alpha_echo);
    for (const auto& [key, value] : result.summary) sum << key << " = " << value << "\n";
    files.push_back({"summary.txt", sum.str()});

    std::filesystem::create_directories(out_dir);
    for (const auto& f : files) {
        const auto path = out_dir / f.name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw ConfigError("cannot write output file: " + path.string());
        out << f.content;
        out.close();
        result.files.push_back(path);
        log_info("wrote " + path.string());
    }
    return result;
}

}  // namespace maser
