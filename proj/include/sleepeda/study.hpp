#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "sleepeda/actigraphy.hpp"
#include "sleepeda/errors.hpp"
#include "sleepeda/ingest.hpp"
#include "sleepeda/rng.hpp"
#include "sleepeda/synth.hpp"
#include "sleepeda/types.hpp"

namespace sleepeda {

// Parameters for a synthetic raw study: a tree of per-night trace files plus
// a report log, driven by the same latent model as the tabular generator so
// the full ingest-to-report pipeline has a self-contained demo input.
struct StudyOptions {
    int nights = 96;
    int participants = 8;
    double trace_duration_s = 3600.0;
    double rate_hz = 4.0;
    double epoch_len_s = 30.0;
    double path_mag_se = 0.31;
    double path_se_sq = 0.61;
    std::uint64_t seed = 0;
};

struct StudyPaths {
    std::string traces_dir;
    std::string report_log;
    std::string truth_path;
};

namespace study_detail {

inline void write_file(const std::filesystem::path& path, std::string_view content) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

// One night's latent draws and the script-level quantities derived from them.
struct NightPlan {
    double magnitude = 0.0;
    double storms = 0.0;
    double se_latent = 0.0;
    double sq_latent = 0.0;
    double se_fraction = 0.0;
    int sq_rating = 0;
};

inline NightPlan draw_night(Rng& rng, const StudyOptions& opts) {
    NightPlan plan;
    plan.magnitude = standard_normal(rng);
    plan.storms = standard_normal(rng);
    const double b1 = opts.path_mag_se;
    const double b2 = opts.path_se_sq;
    plan.se_latent = b1 * plan.magnitude + std::sqrt(1.0 - b1 * b1) * standard_normal(rng);
    plan.sq_latent = b2 * plan.se_latent + std::sqrt(1.0 - b2 * b2) * standard_normal(rng);
    plan.se_fraction = std::clamp(0.85 + 0.06 * plan.se_latent, 0.50, 0.99);
    if (plan.sq_latent < -0.67)
        plan.sq_rating = 1;
    else if (plan.sq_latent < 0.0)
        plan.sq_rating = 2;
    else if (plan.sq_latent < 0.67)
        plan.sq_rating = 3;
    else
        plan.sq_rating = 4;
    return plan;
}

// Background events occupy non-adjacent epochs in the front segment of the
// night, so they can never run together into a storm; storm blocks live in a
// reserved tail. Epoch-aligned placement keeps every event's peak inside its
// own epoch, and the 1-second event-separation rule holds by construction.
inline TraceScript night_script(Rng& rng, const NightPlan& plan, const StudyOptions& opts) {
    TraceScript script;
    script.duration_s = opts.trace_duration_s;
    script.rate_hz = opts.rate_hz;
    script.baseline_us = 1.0 + 0.2 * std::abs(standard_normal(rng));
    script.noise_sd_us = 0.005;

    const double storm_region = std::min(2000.0, 0.55 * script.duration_s);
    const double background_end = script.duration_s - storm_region;

    std::vector<int> slots;  // every other epoch, so no two are consecutive
    for (int e = 1; (e + 1) * opts.epoch_len_s <= background_end; e += 2) slots.push_back(e);
    std::shuffle(slots.begin(), slots.end(), rng);

    const int n_background = std::min(
        static_cast<int>(slots.size()),
        std::clamp(static_cast<int>(std::lround(18.0 + 6.0 * plan.magnitude)), 5, 27));
    const double amp_gain = 1.0 + 0.3 * std::tanh(plan.magnitude);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int e = 0; e < n_background; ++e) {
        const double t =
            slots[static_cast<std::size_t>(e)] * opts.epoch_len_s + 3.0 + 4.0 * unit(rng);
        const double amplitude = (0.10 + 0.05 * unit(rng)) * amp_gain;
        script.events.push_back(TraceEvent{t, amplitude});
        // A same-epoch echo keeps the raw peak count from collapsing onto the
        // peak-epoch count. The echo peak lands 13-23 s past the epoch start,
        // so it needs a wide enough epoch.
        if (opts.epoch_len_s >= 26.0 && unit(rng) < 0.45)
            script.events.push_back(TraceEvent{t + 8.0 + 6.0 * unit(rng), amplitude * 0.9});
    }

    // Block count tracks the storm latent with a magnitude component; block
    // length tracks magnitude alone. An s-only count would sit exactly at the
    // eigenvalue-1 retention boundary and make the factor count flip from
    // sample to sample.
    const int n_storms = std::clamp(
        static_cast<int>(std::lround(4.0 + 0.8 * plan.storms + 0.5 * plan.magnitude)), 2, 7);
    for (int b = 0; b < n_storms; ++b) {
        const int length_epochs = std::clamp(
            2 + static_cast<int>(std::lround(0.8 * plan.magnitude +
                                             0.5 * standard_normal(rng))),
            2, 5);
        const double start = background_end + 30.0 + b * 210.0;
        const double end = start + length_epochs * opts.epoch_len_s;
        if (end >= script.duration_s - 1.0) break;
        script.storm_blocks.push_back(StormBlock{start, end, 28.0, 0.15});
    }
    return script;
}

// Still wrist: (0, 0, 1 g) exactly; a wake epoch doubles the z magnitude so
// the Cole sum crosses threshold at that epoch.
inline std::vector<SignalTrace> night_acc(Rng& rng, const NightPlan& plan,
                                          const StudyOptions& opts, double start_time_s) {
    const auto samples =
        static_cast<std::size_t>(opts.trace_duration_s * opts.rate_hz);
    const auto epochs = static_cast<std::size_t>(opts.trace_duration_s / opts.epoch_len_s);
    const auto per_epoch = static_cast<std::size_t>(opts.epoch_len_s * opts.rate_hz);

    const int wake_target =
        static_cast<int>(std::lround((1.0 - plan.se_fraction) * static_cast<double>(epochs)));
    std::vector<std::size_t> order(epochs);
    for (std::size_t e = 0; e < epochs; ++e) order[e] = e;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> wake(epochs, false);
    for (int w = 0; w < wake_target; ++w) wake[order[static_cast<std::size_t>(w)]] = true;

    std::vector<SignalTrace> axes(3);
    const Channel labels[3] = {Channel::AccX, Channel::AccY, Channel::AccZ};
    for (std::size_t a = 0; a < 3; ++a) {
        axes[a].channel_label = labels[a];
        axes[a].start_time_s = start_time_s;
        axes[a].rate_hz = opts.rate_hz;
        axes[a].samples.assign(samples, 0.0);
    }
    for (std::size_t i = 0; i < samples; ++i) {
        const std::size_t e = std::min(i / per_epoch, epochs - 1);
        axes[2].samples[i] = wake[e] ? 2.0 : 1.0;
    }
    return axes;
}

}  // namespace study_detail

// Writes <out_dir>/traces/<participant>/<date>/{EDA.csv,ACC.csv},
// <out_dir>/reports.csv, and <out_dir>/truth.csv. Each night consumes its own
// derived seed stream, so regeneration is bit-identical, nights could be
// produced in parallel, and studies with different seeds share no streams.
inline StudyPaths write_synthetic_study(const std::string& out_dir, const StudyOptions& opts) {
    namespace fs = std::filesystem;
    if (opts.nights < 2) throw ConfigError("a study needs at least 2 nights");
    if (opts.participants < 1 || opts.participants > opts.nights)
        throw ConfigError("participants must be in [1, nights]");
    if (!(opts.rate_hz >= 1.0)) throw ConfigError("rate_hz must be at least 1");
    if (!(opts.trace_duration_s >= 4.0 * opts.epoch_len_s))
        throw ConfigError("trace_duration_s must cover at least 4 epochs");
    if (std::abs(opts.path_mag_se) >= 1.0 || std::abs(opts.path_se_sq) >= 1.0)
        throw ConfigError("standardized paths must lie strictly inside (-1, 1)");

    StudyPaths paths;
    paths.traces_dir = (fs::path(out_dir) / "traces").string();
    paths.report_log = (fs::path(out_dir) / "reports.csv").string();
    paths.truth_path = (fs::path(out_dir) / "truth.csv").string();

    std::string reports = std::string(kReportLogHeader) + "\n";
    std::string truth = "participant_id,night_date,magnitude,storms,se_latent,sq_latent\n";

    const int per_participant =
        (opts.nights + opts.participants - 1) / opts.participants;
    const Date first_night = parse_date("2024-03-01");

    for (int night = 0; night < opts.nights; ++night) {
        Rng rng = make_rng(derive_stream(opts.seed, static_cast<std::uint64_t>(night)));
        const study_detail::NightPlan plan = study_detail::draw_night(rng, opts);

        const int participant = night / per_participant;
        char pid[16];
        std::snprintf(pid, sizeof(pid), "p%02d", participant + 1);
        Date date = first_night;
        for (int d = 0; d < night % per_participant; ++d) date = next_day(date);

        const double start_time_s = local_midnight_utc_s(date, 0.0) + 22.0 * 3600.0;
        const TraceScript script = study_detail::night_script(rng, plan, opts);
        TraceSample eda = generate_eda_trace(script, rng());
        eda.trace.start_time_s = start_time_s;
        const std::vector<SignalTrace> acc =
            study_detail::night_acc(rng, plan, opts, start_time_s);

        const fs::path night_dir =
            fs::path(paths.traces_dir) / pid / format_date(date);
        study_detail::write_file(night_dir / "EDA.csv", serialize_channel_file({eda.trace}));
        study_detail::write_file(night_dir / "ACC.csv", serialize_channel_file(acc));

        const double in_bed = 480.0;
        reports += std::string(pid) + "," + format_date(date) + "," +
                   format_double(plan.se_fraction * in_bed) + "," + format_double(in_bed) +
                   "," + std::to_string(plan.sq_rating) + "\n";
        truth += std::string(pid) + "," + format_date(date) + "," +
                 format_double(plan.magnitude) + "," + format_double(plan.storms) + "," +
                 format_double(plan.se_latent) + "," + format_double(plan.sq_latent) + "\n";
    }

    study_detail::write_file(paths.report_log, reports);
    study_detail::write_file(paths.truth_path, truth);
    return paths;
}

}  // namespace sleepeda
