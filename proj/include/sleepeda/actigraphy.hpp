#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sleepeda/csv.hpp"
#include "sleepeda/errors.hpp"
#include "sleepeda/types.hpp"

namespace sleepeda {

struct ActivityCounts {
    double epoch_len_s = 30.0;
    std::vector<double> counts;
};

enum class SleepState { Sleep, Wake };

struct SleepWakeSeries {
    double epoch_len_s = 30.0;
    std::vector<SleepState> states;
};

// Weighted scoring window over lags -4..+2; an epoch is WAKE when the scaled
// weighted sum reaches 1.
struct ColeWeights {
    double scale = 1e-5;
    std::array<double, 7> w = {404.0, 598.0, 326.0, 441.0, 1408.0, 508.0, 350.0};
};

// Per sample, activity is the absolute deviation of the acceleration
// magnitude from 1 g; per epoch, the maximum deviation times count_gain.
inline ActivityCounts activity_counts(const SignalTrace& x, const SignalTrace& y,
                                      const SignalTrace& z, double epoch_len_s = 30.0,
                                      double count_gain = 100.0) {
    if (!(epoch_len_s > 0.0)) throw ConfigError("epoch_len_s must be positive");
    if (!(count_gain > 0.0)) throw ConfigError("count_gain must be positive");
    check_trace(x);
    check_trace(y);
    check_trace(z);
    if (x.samples.size() != y.samples.size() || x.samples.size() != z.samples.size())
        throw AlignmentError("accelerometer axes differ in length");
    if (x.rate_hz != y.rate_hz || x.rate_hz != z.rate_hz)
        throw AlignmentError("accelerometer axes differ in sampling rate");

    ActivityCounts out;
    out.epoch_len_s = epoch_len_s;
    const std::size_t n = x.samples.size();
    const auto epochs = static_cast<std::size_t>(
        std::ceil(static_cast<double>(n) / (epoch_len_s * x.rate_hz)));
    out.counts.assign(epochs, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double mag =
            std::sqrt(x.samples[i] * x.samples[i] + y.samples[i] * y.samples[i] +
                      z.samples[i] * z.samples[i]);
        const double dev = std::abs(mag - 1.0);
        const auto e = static_cast<std::size_t>(
            static_cast<double>(i) / (epoch_len_s * x.rate_hz));
        if (dev > out.counts[e]) out.counts[e] = dev;
    }
    for (auto& c : out.counts) c *= count_gain;
    return out;
}

// D_i = scale * sum_{k=-4..+2} w_k * counts_{i+k}, zero-padded outside the
// series; SLEEP iff D_i < 1.
inline SleepWakeSeries cole_sleep_wake(const ActivityCounts& counts,
                                       const ColeWeights& weights = {}) {
    if (!(weights.scale > 0.0)) throw ConfigError("Cole scale must be positive");
    SleepWakeSeries out;
    out.epoch_len_s = counts.epoch_len_s;
    const auto n = static_cast<long long>(counts.counts.size());
    out.states.reserve(counts.counts.size());
    for (long long i = 0; i < n; ++i) {
        double d = 0.0;
        for (int k = -4; k <= 2; ++k) {
            const long long j = i + k;
            if (j < 0 || j >= n) continue;
            d += weights.w[static_cast<std::size_t>(k + 4)] * counts.counts[static_cast<std::size_t>(j)];
        }
        d *= weights.scale;
        out.states.push_back(d < 1.0 ? SleepState::Sleep : SleepState::Wake);
    }
    return out;
}

inline double sleep_efficiency(const NightReport& report) {
    if (!(report.minutes_in_bed > 0.0)) throw DomainError("minutes_in_bed must be positive");
    if (report.minutes_asleep < 0.0 || report.minutes_asleep > report.minutes_in_bed)
        throw ValidationError("minutes_asleep outside [0, minutes_in_bed]");
    return report.minutes_asleep / report.minutes_in_bed;
}

inline double sensor_sleep_efficiency(const SleepWakeSeries& series) {
    if (series.states.empty()) throw DomainError("sleep/wake series is empty");
    std::size_t asleep = 0;
    for (auto s : series.states)
        if (s == SleepState::Sleep) ++asleep;
    return static_cast<double>(asleep) / static_cast<double>(series.states.size());
}

enum class SqClass { Poor, Good };

inline SqClass sq_binarize(int rating) {
    if (rating < 1 || rating > 4)
        throw ValidationError("sq_rating " + std::to_string(rating) + " outside 1-4");
    return rating >= 3 ? SqClass::Good : SqClass::Poor;
}

inline constexpr std::string_view kTargetCsvHeader =
    "participant_id,night_date,se_selfreport,se_sensor,sq_binary";

inline std::string target_csv_row(const std::string& participant_id, Date night_date,
                                  double se_selfreport, double se_sensor, SqClass sq) {
    return participant_id + "," + format_date(night_date) + "," + format_double(se_selfreport) +
           "," + format_double(se_sensor) + "," + (sq == SqClass::Good ? "1" : "0");
}

}  // namespace sleepeda
