#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "sleepeda/dataset.hpp"
#include "sleepeda/errors.hpp"
#include "sleepeda/rng.hpp"
#include "sleepeda/types.hpp"

namespace sleepeda {

enum class SqLink { Probit, Logit };

// Parameterized latent model behind the six features, SE, and SQ. Loadings
// and paths are standardized: every observed column and the latent response
// behind SQ have unit variance, so raw and standardized coefficients
// coincide. magnitude_loadings map to the five Magnitude indicators in column
// order; storm_count is the lone Storms indicator with an additional
// cross-loading on Magnitude.
struct GroundTruthModel {
    std::array<double, 5> magnitude_loadings = {0.98, 0.96, 0.94, 0.92, 0.90};
    double storm_loading = 0.83;
    double cross_loading = -0.09;
    double latent_correlation = 0.0;  // corr(Magnitude, Storms)
    double path_mag_se = 0.31;
    double path_se_sq = 0.61;
    SqLink sq_link = SqLink::Probit;
};

inline const std::vector<std::string>& feature_column_names() {
    static const std::vector<std::string> names = {"peak_epoch_count", "storm_count",
                                                   "storm_mean",       "storm_sd",
                                                   "storm_max",        "peak_count"};
    return names;
}

// Residual variance of each observed column implied by unit total variance.
struct ModelNoise {
    std::array<double, 5> magnitude_indicators;
    double storm_indicator;
    double se;
    double sq_latent;
};

inline ModelNoise derive_noise(const GroundTruthModel& m) {
    if (std::abs(m.latent_correlation) >= 1.0)
        throw ConfigError("latent correlation must lie in (-1, 1)");
    if (std::abs(m.path_mag_se) >= 1.0 || std::abs(m.path_se_sq) >= 1.0)
        throw ConfigError("standardized paths must lie in (-1, 1)");
    ModelNoise noise{};
    for (std::size_t i = 0; i < 5; ++i) {
        const double explained = m.magnitude_loadings[i] * m.magnitude_loadings[i];
        if (explained >= 1.0)
            throw ConfigError("magnitude loading " + std::to_string(i + 1) +
                              " implies non-positive indicator noise");
        noise.magnitude_indicators[i] = 1.0 - explained;
    }
    const double storm_explained = m.cross_loading * m.cross_loading +
                                   m.storm_loading * m.storm_loading +
                                   2.0 * m.cross_loading * m.storm_loading * m.latent_correlation;
    if (storm_explained >= 1.0)
        throw ConfigError("storm loadings imply non-positive indicator noise");
    noise.storm_indicator = 1.0 - storm_explained;
    noise.se = 1.0 - m.path_mag_se * m.path_mag_se;
    noise.sq_latent = 1.0 - m.path_se_sq * m.path_se_sq;
    return noise;
}

// Analytic covariance over (features..., se, sq_latent), all unit variance.
inline Eigen::MatrixXd implied_covariance(const GroundTruthModel& m) {
    derive_noise(m);  // validates
    const double phi = m.latent_correlation;
    // Loadings of each observed variable on (Magnitude, Storms).
    std::vector<std::array<double, 2>> on_latents;
    on_latents.push_back({m.magnitude_loadings[0], 0.0});       // peak_epoch_count
    on_latents.push_back({m.cross_loading, m.storm_loading});   // storm_count
    on_latents.push_back({m.magnitude_loadings[1], 0.0});       // storm_mean
    on_latents.push_back({m.magnitude_loadings[2], 0.0});       // storm_sd
    on_latents.push_back({m.magnitude_loadings[3], 0.0});       // storm_max
    on_latents.push_back({m.magnitude_loadings[4], 0.0});       // peak_count
    on_latents.push_back({m.path_mag_se, 0.0});                 // se
    on_latents.push_back({m.path_se_sq * m.path_mag_se, 0.0});  // sq_latent via se

    Eigen::MatrixXd sigma(8, 8);
    auto cov_latent = [&](const std::array<double, 2>& a, const std::array<double, 2>& b) {
        return a[0] * b[0] + a[1] * b[1] + phi * (a[0] * b[1] + a[1] * b[0]);
    };
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
            sigma(i, j) = i == j ? 1.0 : cov_latent(on_latents[static_cast<std::size_t>(i)],
                                                    on_latents[static_cast<std::size_t>(j)]);
    // se and sq_latent share the se noise term beyond their latent parts.
    const double se_noise = 1.0 - m.path_mag_se * m.path_mag_se;
    sigma(6, 7) = sigma(7, 6) = m.path_se_sq * (m.path_mag_se * m.path_mag_se + se_noise);

    Eigen::LLT<Eigen::MatrixXd> llt(sigma);
    if (llt.info() != Eigen::Success)
        throw ConfigError("implied covariance is not positive definite");
    return sigma;
}

struct TabularTruth {
    std::vector<double> magnitude;
    std::vector<double> storms;
    std::vector<double> sq_latent;
    GroundTruthModel model;
};

struct TabularSample {
    MixedDataset data;
    TabularTruth truth;
};

// Samples the latent model row by row with a fixed draw order, so a fixed
// seed reproduces the dataset bit for bit.
inline TabularSample generate_tabular(const GroundTruthModel& model, std::size_t n,
                                      std::uint64_t seed) {
    if (n < 10) throw ValidationError("generate_tabular requires n >= 10");
    const ModelNoise noise = derive_noise(model);
    implied_covariance(model);  // positive-definiteness gate

    Rng rng = make_rng(seed);
    const double phi = model.latent_correlation;
    const double phi_resid = std::sqrt(1.0 - phi * phi);

    std::vector<std::vector<double>> cols(8, std::vector<double>(n));
    TabularTruth truth;
    truth.model = model;
    truth.magnitude.resize(n);
    truth.storms.resize(n);
    truth.sq_latent.resize(n);

    for (std::size_t i = 0; i < n; ++i) {
        const double mag = standard_normal(rng);
        const double storms = phi * mag + phi_resid * standard_normal(rng);
        truth.magnitude[i] = mag;
        truth.storms[i] = storms;

        cols[0][i] = model.magnitude_loadings[0] * mag +
                     std::sqrt(noise.magnitude_indicators[0]) * standard_normal(rng);
        cols[1][i] = model.cross_loading * mag + model.storm_loading * storms +
                     std::sqrt(noise.storm_indicator) * standard_normal(rng);
        for (std::size_t f = 1; f < 5; ++f)
            cols[f + 1][i] = model.magnitude_loadings[f] * mag +
                             std::sqrt(noise.magnitude_indicators[f]) * standard_normal(rng);

        const double se = model.path_mag_se * mag + std::sqrt(noise.se) * standard_normal(rng);
        cols[6][i] = se;

        double shock = 0.0;
        if (model.sq_link == SqLink::Probit) {
            shock = std::sqrt(noise.sq_latent) * standard_normal(rng);
        } else {
            // Logistic noise scaled to the same variance as the probit shock.
            std::uniform_real_distribution<double> unif(0.0, 1.0);
            double u = unif(rng);
            u = std::min(std::max(u, 1e-12), 1.0 - 1e-12);
            const double logistic_scale =
                std::sqrt(noise.sq_latent * 3.0) / 3.14159265358979323846;
            shock = logistic_scale * std::log(u / (1.0 - u));
        }
        const double sq_latent = model.path_se_sq * se + shock;
        truth.sq_latent[i] = sq_latent;
        cols[7][i] = sq_latent > 0.0 ? 1.0 : 0.0;
    }

    TabularSample out;
    out.truth = std::move(truth);
    const auto& feature_names = feature_column_names();
    for (std::size_t f = 0; f < 6; ++f)
        out.data.add_column(feature_names[f], ColumnKind::Continuous, std::move(cols[f]));
    out.data.add_column("se", ColumnKind::Continuous, std::move(cols[6]));
    out.data.add_column("sq", ColumnKind::Discrete, std::move(cols[7]));
    check_dataset(out.data);
    return out;
}

// Scripted EDA trace: scripted events plus deterministic storm-block event
// trains, each rendered as one canonical skin-conductance response.
struct TraceEvent {
    double time_s = 0.0;
    double amplitude_us = 0.0;
};

struct StormBlock {
    double start_s = 0.0;
    double end_s = 0.0;
    double interval_s = 0.0;
    double amplitude_us = 0.0;
};

struct TraceScript {
    double duration_s = 28800.0;
    double rate_hz = 4.0;
    double baseline_us = 0.3;
    double noise_sd_us = 0.005;
    double rise_s = 2.0;
    double decay_tau_s = 8.0;
    std::vector<TraceEvent> events;
    std::vector<StormBlock> storm_blocks;
};

struct PlantedTruth {
    std::vector<TraceEvent> events;  // scripted + storm-derived, ascending
};

inline std::vector<TraceEvent> expand_events(const TraceScript& script) {
    std::vector<TraceEvent> all = script.events;
    for (const auto& block : script.storm_blocks) {
        if (!(block.interval_s > 0.0) || !(block.end_s > block.start_s))
            throw ScriptError("storm block needs end > start and a positive interval");
        for (double t = block.start_s; t < block.end_s; t += block.interval_s)
            all.push_back(TraceEvent{t, block.amplitude_us});
    }
    std::sort(all.begin(), all.end(),
              [](const TraceEvent& a, const TraceEvent& b) { return a.time_s < b.time_s; });
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (all[i].time_s < 0.0 || all[i].time_s >= script.duration_s)
            throw ScriptError("event at " + format_double(all[i].time_s) +
                              " s lies outside the trace");
        if (!(all[i].amplitude_us > 0.0)) throw ScriptError("event amplitude must be positive");
        if (i > 0 && all[i].time_s - all[i - 1].time_s < 1.0)
            throw ScriptError("events at " + format_double(all[i - 1].time_s) + " s and " +
                              format_double(all[i].time_s) + " s are closer than 1 s");
    }
    return all;
}

// Half-cosine rise to the full amplitude, then exponential decay.
inline double scr_shape(double tau_s, double rise_s, double decay_tau_s) {
    if (tau_s < 0.0) return 0.0;
    if (tau_s < rise_s) return 0.5 * (1.0 - std::cos(3.14159265358979323846 * tau_s / rise_s));
    return std::exp(-(tau_s - rise_s) / decay_tau_s);
}

struct TraceSample {
    SignalTrace trace;
    PlantedTruth truth;
};

inline TraceSample generate_eda_trace(const TraceScript& script, std::uint64_t seed) {
    if (script.rate_hz < 1.0) throw DomainError("generate_eda_trace requires rate_hz >= 1");
    if (!(script.duration_s > 0.0)) throw ScriptError("duration must be positive");
    if (script.noise_sd_us < 0.0) throw ScriptError("noise sd must be non-negative");

    TraceSample out;
    out.truth.events = expand_events(script);
    out.trace.channel_label = Channel::Eda;
    out.trace.start_time_s = 0.0;
    out.trace.rate_hz = script.rate_hz;

    const auto n = static_cast<std::size_t>(script.duration_s * script.rate_hz);
    out.trace.samples.assign(n, script.baseline_us);

    // Events affect a bounded window: the rise plus eight decay constants.
    const double influence_s = script.rise_s + 8.0 * script.decay_tau_s;
    for (const auto& ev : out.truth.events) {
        const auto first = static_cast<std::size_t>(
            std::max(0.0, std::ceil(ev.time_s * script.rate_hz)));
        const auto last = std::min(
            n, static_cast<std::size_t>(std::ceil((ev.time_s + influence_s) * script.rate_hz)));
        for (std::size_t i = first; i < last; ++i) {
            const double tau = static_cast<double>(i) / script.rate_hz - ev.time_s;
            out.trace.samples[i] +=
                ev.amplitude_us * scr_shape(tau, script.rise_s, script.decay_tau_s);
        }
    }

    if (script.noise_sd_us > 0.0) {
        Rng rng = make_rng(seed);
        for (auto& v : out.trace.samples) v += script.noise_sd_us * standard_normal(rng);
    }
    return out;
}

// Declarative script file: `key = value` lines, `#` comments. Repeatable
// keys: `event = TIME_S AMPLITUDE_US` and
// `storm = START_S END_S INTERVAL_S AMPLITUDE_US`.
inline TraceScript parse_trace_script(std::string_view text) {
    TraceScript script;
    const auto lines = split_lines(text);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string_view line = lines[i];
        if (auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ScriptError("line " + std::to_string(i + 1) + ": expected key = value");
        const std::string key(trim(line.substr(0, eq)));
        const std::string_view value = trim(line.substr(eq + 1));

        auto numbers = [&](std::size_t want) {
            std::vector<double> out;
            for (auto f : split_fields(value, ' ')) {
                if (trim(f).empty()) continue;
                auto v = try_parse_double(f);
                if (!v)
                    throw ScriptError("line " + std::to_string(i + 1) + ": bad number in '" +
                                      std::string(value) + "'");
                out.push_back(*v);
            }
            if (out.size() != want)
                throw ScriptError("line " + std::to_string(i + 1) + ": '" + key + "' needs " +
                                  std::to_string(want) + " value(s)");
            return out;
        };

        if (key == "duration_s")
            script.duration_s = numbers(1)[0];
        else if (key == "rate_hz")
            script.rate_hz = numbers(1)[0];
        else if (key == "baseline_us")
            script.baseline_us = numbers(1)[0];
        else if (key == "noise_sd_us")
            script.noise_sd_us = numbers(1)[0];
        else if (key == "rise_s")
            script.rise_s = numbers(1)[0];
        else if (key == "decay_tau_s")
            script.decay_tau_s = numbers(1)[0];
        else if (key == "event") {
            const auto v = numbers(2);
            script.events.push_back(TraceEvent{v[0], v[1]});
        } else if (key == "storm") {
            const auto v = numbers(4);
            script.storm_blocks.push_back(StormBlock{v[0], v[1], v[2], v[3]});
        } else {
            throw ScriptError("line " + std::to_string(i + 1) + ": unknown key '" + key + "'");
        }
    }
    return script;
}

}  // namespace sleepeda
