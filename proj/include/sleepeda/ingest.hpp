#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sleepeda/csv.hpp"
#include "sleepeda/errors.hpp"
#include "sleepeda/types.hpp"

namespace sleepeda {

// Channel files use a two-line header: start UTC timestamp, then sampling
// rate. EDA rows carry one column, ACC rows three (X,Y,Z). An ACC file yields
// three traces sharing start and rate.
inline std::vector<SignalTrace> parse_channel_file(std::string_view bytes, Channel expected) {
    const auto lines = split_lines(bytes);
    if (lines.size() < 1) throw ParseError("channel file is empty");
    auto start = try_parse_double(lines[0]);
    if (!start) throw ParseError("line 1: bad start timestamp '" + std::string(lines[0]) + "'");
    if (lines.size() < 2) throw ParseError("channel file missing sampling-rate line");
    auto rate = try_parse_double(lines[1]);
    if (!rate || !(*rate > 0.0))
        throw ParseError("line 2: bad sampling rate '" + std::string(lines[1]) + "'");
    if (lines.size() <= 2) throw EmptyTraceError("channel file has a header but no samples");

    const bool is_acc = expected != Channel::Eda;
    const std::size_t columns = is_acc ? 3 : 1;
    std::vector<std::vector<double>> cols(columns);
    for (auto& c : cols) c.reserve(lines.size() - 2);

    for (std::size_t i = 2; i < lines.size(); ++i) {
        const auto fields = split_fields(lines[i]);
        if (fields.size() != columns)
            throw ParseError("line " + std::to_string(i + 1) + ": expected " +
                             std::to_string(columns) + " column(s), got " +
                             std::to_string(fields.size()));
        for (std::size_t c = 0; c < columns; ++c) {
            auto v = try_parse_double(fields[c]);
            if (!v)
                throw ParseError("line " + std::to_string(i + 1) + ": non-numeric sample '" +
                                 std::string(fields[c]) + "'");
            cols[c].push_back(*v);
        }
    }

    std::vector<SignalTrace> traces;
    const Channel labels[3] = {Channel::AccX, Channel::AccY, Channel::AccZ};
    for (std::size_t c = 0; c < columns; ++c) {
        SignalTrace t;
        t.channel_label = is_acc ? labels[c] : Channel::Eda;
        t.start_time_s = *start;
        t.rate_hz = *rate;
        t.samples = std::move(cols[c]);
        check_trace(t);
        traces.push_back(std::move(t));
    }
    return traces;
}

// Inverse of parse_channel_file for one trace (EDA) or an axis triple (ACC).
inline std::string serialize_channel_file(const std::vector<SignalTrace>& traces) {
    if (traces.empty()) throw ValidationError("nothing to serialize");
    std::string out = format_double(traces[0].start_time_s) + "\n" +
                      format_double(traces[0].rate_hz) + "\n";
    const std::size_t n = traces[0].samples.size();
    for (const auto& t : traces)
        if (t.samples.size() != n) throw ValidationError("traces differ in length");
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < traces.size(); ++c) {
            if (c) out += ',';
            out += format_double(traces[c].samples[i]);
        }
        out += '\n';
    }
    return out;
}

inline constexpr std::string_view kReportLogHeader =
    "participant_id,night_date,minutes_asleep,minutes_in_bed,sq_rating";

inline std::vector<NightReport> parse_report_log(std::string_view bytes) {
    const auto lines = split_lines(bytes);
    if (lines.empty() || trim(lines[0]) != kReportLogHeader)
        throw ParseError("report log must start with header '" + std::string(kReportLogHeader) +
                         "'");
    std::vector<NightReport> reports;
    std::set<std::pair<std::string, Date>> seen;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        const auto fields = split_fields(lines[i]);
        if (fields.size() != 5)
            throw ParseError("line " + std::to_string(i + 1) + ": expected 5 fields, got " +
                             std::to_string(fields.size()));
        NightReport r;
        r.participant_id = std::string(trim(fields[0]));
        if (r.participant_id.empty())
            throw ParseError("line " + std::to_string(i + 1) + ": empty participant_id");
        r.night_date = parse_date(trim(fields[1]));
        auto asleep = try_parse_double(fields[2]);
        auto in_bed = try_parse_double(fields[3]);
        auto sq = try_parse_int(fields[4]);
        if (!asleep || !in_bed || !sq)
            throw ParseError("line " + std::to_string(i + 1) + ": non-numeric field");
        r.minutes_asleep = *asleep;
        r.minutes_in_bed = *in_bed;
        r.sq_rating = static_cast<int>(*sq);
        check_report(r);
        if (!seen.insert({r.participant_id, r.night_date}).second)
            throw DuplicateError("duplicate report for " + r.participant_id + " " +
                                 format_date(r.night_date));
        reports.push_back(std::move(r));
    }
    return reports;
}

// Identity a trace file carries via its path, `<participant>/<date>/<CHANNEL>.csv`.
struct KeyedTrace {
    std::string participant_id;
    Date night_date{};
    SignalTrace trace;
};

// Extracts (participant, date, channel kind) from a relative path. The final
// component must be EDA.csv or ACC.csv.
struct TracePathInfo {
    std::string participant_id;
    Date night_date{};
    Channel file_kind = Channel::Eda;  // Eda or AccX standing for the ACC triple
};

inline TracePathInfo parse_trace_path(std::string_view path) {
    std::vector<std::string_view> parts;
    std::size_t pos = 0;
    while (true) {
        std::size_t s = path.find('/', pos);
        if (s == std::string_view::npos) {
            parts.push_back(path.substr(pos));
            break;
        }
        parts.push_back(path.substr(pos, s - pos));
        pos = s + 1;
    }
    if (parts.size() < 3)
        throw ParseError("trace path '" + std::string(path) +
                         "' must be <participant>/<date>/<CHANNEL>.csv");
    TracePathInfo info;
    info.participant_id = std::string(parts[parts.size() - 3]);
    info.night_date = parse_date(parts[parts.size() - 2]);
    const std::string_view file = parts.back();
    if (file == "EDA.csv")
        info.file_kind = Channel::Eda;
    else if (file == "ACC.csv")
        info.file_kind = Channel::AccX;
    else
        throw ParseError("unrecognized channel file name '" + std::string(file) + "'");
    return info;
}

struct AssembleOptions {
    // Zone offset east of UTC, seconds. The night window for a report dated D
    // is [D 18:00, D+1 14:00] local time; a trace belongs to the night when
    // its span intersects that window.
    double utc_offset_s = 0.0;
};

struct AssembleResult {
    std::vector<NightSession> sessions;
    std::vector<std::string> warnings;
};

inline AssembleResult assemble_sessions(const std::vector<KeyedTrace>& traces,
                                        const std::vector<NightReport>& reports,
                                        const AssembleOptions& opts = {}) {
    AssembleResult result;
    using Key = std::pair<std::string, Date>;

    std::map<Key, const NightReport*> report_by_night;
    for (const auto& r : reports) {
        check_report(r);
        if (!report_by_night.emplace(Key{r.participant_id, r.night_date}, &r).second)
            throw DuplicateError("duplicate report for " + r.participant_id + " " +
                                 format_date(r.night_date));
    }

    std::map<Key, std::map<Channel, const SignalTrace*>> traces_by_night;
    for (const auto& kt : traces) {
        const Key key{kt.participant_id, kt.night_date};
        const std::string night = kt.participant_id + " " + format_date(kt.night_date);
        auto rit = report_by_night.find(key);
        if (rit == report_by_night.end()) {
            result.warnings.push_back("trace " + std::string(channel_name(kt.trace.channel_label)) +
                                      " for " + night + " has no report");
            continue;
        }
        const double window_start =
            local_midnight_utc_s(kt.night_date, opts.utc_offset_s) + 18.0 * 3600.0;
        const double window_end =
            local_midnight_utc_s(next_day(kt.night_date), opts.utc_offset_s) + 14.0 * 3600.0;
        if (kt.trace.end_time_s() <= window_start || kt.trace.start_time_s >= window_end) {
            result.warnings.push_back("trace " + std::string(channel_name(kt.trace.channel_label)) +
                                      " for " + night + " lies outside the night window");
            continue;
        }
        auto& slots = traces_by_night[key];
        if (!slots.emplace(kt.trace.channel_label, &kt.trace).second) {
            result.warnings.push_back("duplicate " + std::string(channel_name(kt.trace.channel_label)) +
                                      " trace for " + night + ", keeping the first");
        }
    }

    for (const auto& [key, report] : report_by_night) {
        const std::string night = key.first + " " + format_date(key.second);
        auto tit = traces_by_night.find(key);
        const auto* slots = (tit == traces_by_night.end()) ? nullptr : &tit->second;
        auto has = [&](Channel c) { return slots && slots->count(c) > 0; };
        std::vector<std::string_view> missing;
        for (Channel c : {Channel::Eda, Channel::AccX, Channel::AccY, Channel::AccZ})
            if (!has(c)) missing.push_back(channel_name(c));
        if (!missing.empty()) {
            std::string what = "night " + night + " missing";
            for (auto m : missing) what += " " + std::string(m);
            result.warnings.push_back(what);
            continue;
        }
        NightSession s;
        s.participant_id = key.first;
        s.night_date = key.second;
        s.eda = *slots->at(Channel::Eda);
        s.acc_x = *slots->at(Channel::AccX);
        s.acc_y = *slots->at(Channel::AccY);
        s.acc_z = *slots->at(Channel::AccZ);
        s.report = *report;
        result.sessions.push_back(std::move(s));
    }
    return result;
}

}  // namespace sleepeda
