#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "sleepeda/csv.hpp"
#include "sleepeda/errors.hpp"

namespace sleepeda {

enum class Channel { Eda, AccX, AccY, AccZ };

inline std::string_view channel_name(Channel c) {
    switch (c) {
        case Channel::Eda: return "EDA";
        case Channel::AccX: return "ACC_X";
        case Channel::AccY: return "ACC_Y";
        case Channel::AccZ: return "ACC_Z";
    }
    return "?";
}

using Date = std::chrono::year_month_day;

inline Date parse_date(std::string_view text) {
    // ISO-8601 calendar date, YYYY-MM-DD.
    if (text.size() != 10 || text[4] != '-' || text[7] != '-')
        throw ParseError("bad date '" + std::string(text) + "', expected YYYY-MM-DD");
    auto y = try_parse_int(text.substr(0, 4));
    auto m = try_parse_int(text.substr(5, 2));
    auto d = try_parse_int(text.substr(8, 2));
    if (!y || !m || !d)
        throw ParseError("bad date '" + std::string(text) + "', expected YYYY-MM-DD");
    Date date{std::chrono::year(static_cast<int>(*y)),
              std::chrono::month(static_cast<unsigned>(*m)),
              std::chrono::day(static_cast<unsigned>(*d))};
    if (!date.ok()) throw ParseError("invalid calendar date '" + std::string(text) + "'");
    return date;
}

inline std::string format_date(Date date) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(date.year()),
                  static_cast<unsigned>(date.month()), static_cast<unsigned>(date.day()));
    return buf;
}

inline Date next_day(Date date) {
    return Date{std::chrono::sys_days(date) + std::chrono::days(1)};
}

// Seconds since the Unix epoch of local midnight on `date`, for a zone at
// fixed offset `utc_offset_s` east of UTC.
inline double local_midnight_utc_s(Date date, double utc_offset_s) {
    const auto days = std::chrono::sys_days(date).time_since_epoch().count();
    return static_cast<double>(days) * 86400.0 - utc_offset_s;
}

// One uniformly sampled sensor channel. samples are microsiemens for EDA and
// g for accelerometer axes.
struct SignalTrace {
    Channel channel_label = Channel::Eda;
    double start_time_s = 0.0;  // UTC seconds
    double rate_hz = 0.0;       // > 0
    std::vector<double> samples;

    double duration_s() const { return static_cast<double>(samples.size()) / rate_hz; }
    double end_time_s() const { return start_time_s + duration_s(); }
};

inline void check_trace(const SignalTrace& t) {
    if (!(t.rate_hz > 0.0)) throw ValidationError("trace rate must be positive");
    if (t.samples.empty()) throw EmptyTraceError("trace has no samples");
    for (double v : t.samples)
        if (!std::isfinite(v)) throw ValidationError("trace contains a non-finite sample");
}

// One night's self-report.
struct NightReport {
    std::string participant_id;
    Date night_date{};
    double minutes_asleep = 0.0;
    double minutes_in_bed = 0.0;
    int sq_rating = 0;  // 1..4
};

inline void check_report(const NightReport& r) {
    if (r.sq_rating < 1 || r.sq_rating > 4)
        throw ValidationError("sq_rating " + std::to_string(r.sq_rating) + " outside 1-4 for " +
                              r.participant_id + " " + format_date(r.night_date));
    if (r.minutes_asleep < 0.0) throw ValidationError("minutes_asleep negative");
    if (!(r.minutes_in_bed > 0.0)) throw ValidationError("minutes_in_bed must be positive");
    if (r.minutes_asleep > r.minutes_in_bed)
        throw ValidationError("minutes_asleep exceeds minutes_in_bed for " + r.participant_id +
                              " " + format_date(r.night_date));
}

// A fully assembled night: EDA, the three accelerometer axes, and the report.
struct NightSession {
    std::string participant_id;
    Date night_date{};
    SignalTrace eda;
    SignalTrace acc_x, acc_y, acc_z;
    NightReport report;
};

}  // namespace sleepeda
