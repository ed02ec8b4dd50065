#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sleepeda/csv.hpp"
#include "sleepeda/errors.hpp"
#include "sleepeda/types.hpp"

namespace sleepeda {

struct FeatureConfig {
    double smoothing_window_s = 2.0;
    double min_amplitude_us = 0.05;
    double min_rise_rate_us_per_s = 0.01;
    double epoch_len_s = 30.0;
    int storm_min_epochs = 2;
};

inline void check_config(const FeatureConfig& c) {
    if (!(c.smoothing_window_s > 0.0) || !(c.min_amplitude_us > 0.0) ||
        !(c.min_rise_rate_us_per_s > 0.0) || !(c.epoch_len_s > 0.0) || c.storm_min_epochs < 1)
        throw ValidationError("feature config fields must be strictly positive");
}

struct PeakEvent {
    std::size_t sample_index = 0;
    double time_offset_s = 0.0;
    double amplitude_us = 0.0;         // rise above the preceding trough
    double rise_rate_us_per_s = 0.0;   // amplitude / rise time
};

struct EpochFlags {
    double epoch_len_s = 30.0;
    std::vector<bool> flags;  // epoch contains at least one peak
};

struct Storm {
    std::size_t start_epoch = 0;
    std::size_t length_epochs = 0;
};

// All storm statistics are in units of epochs.
struct EdaFeatureVector {
    long long peak_epoch_count = 0;
    long long storm_count = 0;
    double storm_mean = 0.0;
    double storm_sd = 0.0;
    double storm_max = 0.0;
    long long peak_count = 0;
};

// Centered moving average; the window is rounded to an odd sample count and
// truncated at the trace ends.
inline std::vector<double> smooth_centered(const std::vector<double>& x, double window_s,
                                           double rate_hz) {
    long long len = std::llround(window_s * rate_hz);
    if (len < 1) len = 1;
    const std::size_t half = static_cast<std::size_t>(len / 2);
    const std::size_t n = x.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = (i >= half) ? i - half : 0;
        const std::size_t hi = std::min(n - 1, i + half);
        double s = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) s += x[j];
        out[i] = s / static_cast<double>(hi - lo + 1);
    }
    return out;
}

// A peak is a local maximum of the smoothed trace whose rise from the
// preceding trough meets both the amplitude and the mean-slope thresholds. A
// maximum must be confirmed by a following descent; a plateau belongs to the
// sample where the rise ended.
inline std::vector<PeakEvent> detect_peaks(const SignalTrace& trace,
                                           const FeatureConfig& config = {}) {
    check_config(config);
    check_trace(trace);
    if (trace.channel_label != Channel::Eda)
        throw ChannelError("detect_peaks requires an EDA trace");
    if (trace.rate_hz < 1.0) throw DomainError("detect_peaks requires rate_hz >= 1");

    const std::vector<double> s =
        smooth_centered(trace.samples, config.smoothing_window_s, trace.rate_hz);
    std::vector<PeakEvent> peaks;
    const std::size_t n = s.size();
    if (n < 2) return peaks;

    std::size_t trough_idx = 0;
    double trough_val = s[0];
    std::size_t peak_idx = 0;
    int last_sign = 0;
    for (std::size_t i = 1; i < n; ++i) {
        const double step = s[i] - s[i - 1];
        const int sign = (step > 0.0) - (step < 0.0);
        if (sign == 0) continue;
        if (sign > 0) {
            if (last_sign <= 0) {
                trough_idx = i - 1;
                trough_val = s[i - 1];
            }
            peak_idx = i;
        } else if (last_sign > 0) {
            const double rise = s[peak_idx] - trough_val;
            const double rise_s = static_cast<double>(peak_idx - trough_idx) / trace.rate_hz;
            const double rate = rise / rise_s;
            if (rise >= config.min_amplitude_us && rate >= config.min_rise_rate_us_per_s) {
                PeakEvent p;
                p.sample_index = peak_idx;
                p.time_offset_s = static_cast<double>(peak_idx) / trace.rate_hz;
                p.amplitude_us = rise;
                p.rise_rate_us_per_s = rate;
                peaks.push_back(p);
            }
        }
        last_sign = sign;
    }
    return peaks;
}

inline EpochFlags epoch_peaks(const std::vector<PeakEvent>& peaks, double duration_s,
                              const FeatureConfig& config = {}) {
    check_config(config);
    if (!(duration_s > 0.0)) throw DomainError("duration must be positive");
    EpochFlags out;
    out.epoch_len_s = config.epoch_len_s;
    const auto epochs = static_cast<std::size_t>(std::ceil(duration_s / config.epoch_len_s));
    out.flags.assign(epochs, false);
    for (const auto& p : peaks) {
        if (p.time_offset_s >= duration_s)
            throw RangeError("peak at " + format_double(p.time_offset_s) +
                             " s lies beyond the trace duration " + format_double(duration_s));
        const auto e = static_cast<std::size_t>(p.time_offset_s / config.epoch_len_s);
        out.flags[e] = true;
    }
    return out;
}

// Maximal runs of consecutive peak-epochs of at least storm_min_epochs.
inline std::vector<Storm> detect_storms(const EpochFlags& flags, const FeatureConfig& config = {}) {
    check_config(config);
    std::vector<Storm> storms;
    std::size_t i = 0;
    const std::size_t n = flags.flags.size();
    while (i < n) {
        if (!flags.flags[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < n && flags.flags[j]) ++j;
        if (j - i >= static_cast<std::size_t>(config.storm_min_epochs))
            storms.push_back(Storm{i, j - i});
        i = j;
    }
    return storms;
}

inline EdaFeatureVector summarize_features(const std::vector<PeakEvent>& peaks,
                                           const EpochFlags& flags,
                                           const std::vector<Storm>& storms) {
    EdaFeatureVector fv;
    fv.peak_count = static_cast<long long>(peaks.size());
    fv.peak_epoch_count =
        static_cast<long long>(std::count(flags.flags.begin(), flags.flags.end(), true));
    fv.storm_count = static_cast<long long>(storms.size());
    if (storms.empty()) return fv;
    double sum = 0.0;
    double mx = 0.0;
    for (const auto& st : storms) {
        sum += static_cast<double>(st.length_epochs);
        mx = std::max(mx, static_cast<double>(st.length_epochs));
    }
    const double mean = sum / static_cast<double>(storms.size());
    double ss = 0.0;
    for (const auto& st : storms) {
        const double d = static_cast<double>(st.length_epochs) - mean;
        ss += d * d;
    }
    fv.storm_mean = mean;
    fv.storm_sd = storms.size() > 1 ? std::sqrt(ss / static_cast<double>(storms.size() - 1)) : 0.0;
    fv.storm_max = mx;
    return fv;
}

inline EdaFeatureVector extract_night_features(const NightSession& session,
                                               const FeatureConfig& config = {}) {
    const auto peaks = detect_peaks(session.eda, config);
    const auto flags = epoch_peaks(peaks, session.eda.duration_s(), config);
    const auto storms = detect_storms(flags, config);
    return summarize_features(peaks, flags, storms);
}

inline constexpr std::string_view kFeatureCsvHeader =
    "participant_id,night_date,peak_epoch_count,storm_count,storm_mean,storm_sd,storm_max,peak_count";

inline std::string feature_csv_row(const std::string& participant_id, Date night_date,
                                   const EdaFeatureVector& fv) {
    return participant_id + "," + format_date(night_date) + "," +
           std::to_string(fv.peak_epoch_count) + "," + std::to_string(fv.storm_count) + "," +
           format_double(fv.storm_mean) + "," + format_double(fv.storm_sd) + "," +
           format_double(fv.storm_max) + "," + std::to_string(fv.peak_count);
}

}  // namespace sleepeda
