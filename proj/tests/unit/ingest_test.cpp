#include <catch_amalgamated.hpp>

#include "sleepeda/ingest.hpp"

using namespace sleepeda;

namespace {

std::string repeat_line(const std::string& line, int times) {
    std::string out;
    for (int i = 0; i < times; ++i) out += line + "\n";
    return out;
}

}  // namespace

TEST_CASE("EDA channel file parses header and samples") {
    const std::string text = "1500000000\n4\n" + repeat_line("0.3", 8);
    const auto traces = parse_channel_file(text, Channel::Eda);
    REQUIRE(traces.size() == 1);
    const auto& t = traces[0];
    CHECK(t.channel_label == Channel::Eda);
    CHECK(t.start_time_s == 1500000000.0);
    CHECK(t.rate_hz == 4.0);
    CHECK(t.samples.size() == 8);
    CHECK(t.duration_s() == Catch::Approx(2.0));
}

TEST_CASE("ACC channel file yields three axes sharing start and rate") {
    const std::string text = "1500000000\n32\n" + repeat_line("0.0,0.0,1.0", 5);
    const auto traces = parse_channel_file(text, Channel::AccX);
    REQUIRE(traces.size() == 3);
    CHECK(traces[0].channel_label == Channel::AccX);
    CHECK(traces[1].channel_label == Channel::AccY);
    CHECK(traces[2].channel_label == Channel::AccZ);
    for (const auto& t : traces) {
        CHECK(t.start_time_s == 1500000000.0);
        CHECK(t.rate_hz == 32.0);
        CHECK(t.samples.size() == 5);
    }
    CHECK(traces[2].samples[0] == 1.0);
}

TEST_CASE("header-only channel file raises EmptyTraceError") {
    CHECK_THROWS_AS(parse_channel_file("1500000000\n4\n", Channel::Eda), EmptyTraceError);
}

TEST_CASE("malformed channel headers raise ParseError") {
    CHECK_THROWS_AS(parse_channel_file("not-a-number\n4\n0.3\n", Channel::Eda), ParseError);
    CHECK_THROWS_AS(parse_channel_file("1500000000\n0\n0.3\n", Channel::Eda), ParseError);
    CHECK_THROWS_AS(parse_channel_file("1500000000\n", Channel::Eda), ParseError);
}

TEST_CASE("ACC row with two columns names the offending line") {
    const std::string text = "1500000000\n32\n0,0,1\n0.1,0.2\n";
    try {
        parse_channel_file(text, Channel::AccX);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 4") != std::string::npos);
    }
}

TEST_CASE("non-numeric sample names the offending line") {
    const std::string text = "1500000000\n4\n0.3\nabc\n";
    try {
        parse_channel_file(text, Channel::Eda);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 4") != std::string::npos);
    }
}

TEST_CASE("channel file round-trips through serialization") {
    const std::string text = "1519912800.5\n4\n0.3\n0.30000000000000004\n1e-3\n-0.25\n";
    const auto traces = parse_channel_file(text, Channel::Eda);
    const std::string again = serialize_channel_file(traces);
    const auto reparsed = parse_channel_file(again, Channel::Eda);
    REQUIRE(reparsed.size() == 1);
    CHECK(reparsed[0].start_time_s == traces[0].start_time_s);
    CHECK(reparsed[0].rate_hz == traces[0].rate_hz);
    CHECK(reparsed[0].samples == traces[0].samples);
}

TEST_CASE("report log parses rows into validated reports") {
    const std::string text =
        "participant_id,night_date,minutes_asleep,minutes_in_bed,sq_rating\n"
        "p1,2018-03-01,420,480,3\n"
        "p2,2018-03-01,300,400,1\n";
    const auto reports = parse_report_log(text);
    REQUIRE(reports.size() == 2);
    CHECK(reports[0].participant_id == "p1");
    CHECK(format_date(reports[0].night_date) == "2018-03-01");
    CHECK(reports[0].minutes_asleep == 420.0);
    CHECK(reports[0].minutes_in_bed == 480.0);
    CHECK(reports[0].sq_rating == 3);
}

TEST_CASE("report log rejects bad rows") {
    const std::string header = "participant_id,night_date,minutes_asleep,minutes_in_bed,sq_rating\n";
    CHECK_THROWS_AS(parse_report_log(header + "p1,2018-03-01,420,480,5\n"), ValidationError);
    CHECK_THROWS_AS(parse_report_log(header + "p1,2018-03-01,500,480,3\n"), ValidationError);
    CHECK_THROWS_AS(
        parse_report_log(header + "p1,2018-03-01,420,480,3\np1,2018-03-01,400,480,2\n"),
        DuplicateError);
    CHECK_THROWS_AS(parse_report_log("wrong,header\n"), ParseError);
}

namespace {

KeyedTrace make_keyed(const std::string& pid, const std::string& date, Channel c,
                      double start_s, double rate, std::size_t n) {
    KeyedTrace kt;
    kt.participant_id = pid;
    kt.night_date = parse_date(date);
    kt.trace.channel_label = c;
    kt.trace.start_time_s = start_s;
    kt.trace.rate_hz = rate;
    kt.trace.samples.assign(n, c == Channel::Eda ? 0.3 : 1.0);
    return kt;
}

NightReport make_report(const std::string& pid, const std::string& date) {
    NightReport r;
    r.participant_id = pid;
    r.night_date = parse_date(date);
    r.minutes_asleep = 420;
    r.minutes_in_bed = 480;
    r.sq_rating = 3;
    return r;
}

}  // namespace

TEST_CASE("assemble_sessions matches complete nights") {
    // 2018-03-01 22:00 UTC, within the night window for that date at offset 0.
    const double start = local_midnight_utc_s(parse_date("2018-03-01"), 0.0) + 22 * 3600.0;
    std::vector<KeyedTrace> traces;
    traces.push_back(make_keyed("p1", "2018-03-01", Channel::Eda, start, 4, 100));
    traces.push_back(make_keyed("p1", "2018-03-01", Channel::AccX, start, 32, 100));
    traces.push_back(make_keyed("p1", "2018-03-01", Channel::AccY, start, 32, 100));
    traces.push_back(make_keyed("p1", "2018-03-01", Channel::AccZ, start, 32, 100));
    const std::vector<NightReport> reports = {make_report("p1", "2018-03-01")};

    const auto result = assemble_sessions(traces, reports);
    REQUIRE(result.sessions.size() == 1);
    CHECK(result.warnings.empty());
    CHECK(result.sessions[0].participant_id == "p1");
    CHECK(result.sessions[0].eda.samples.size() == 100);
}

TEST_CASE("assemble_sessions warns on unmatched inputs") {
    const double start = local_midnight_utc_s(parse_date("2018-03-01"), 0.0) + 22 * 3600.0;

    SECTION("EDA trace with no report") {
        std::vector<KeyedTrace> traces = {
            make_keyed("p1", "2018-03-01", Channel::Eda, start, 4, 100)};
        const auto result = assemble_sessions(traces, {});
        CHECK(result.sessions.empty());
        REQUIRE(result.warnings.size() == 1);
        CHECK(result.warnings[0].find("2018-03-01") != std::string::npos);
    }

    SECTION("report with no traces") {
        const auto result = assemble_sessions({}, {make_report("p1", "2018-03-01")});
        CHECK(result.sessions.empty());
        REQUIRE(result.warnings.size() == 1);
        CHECK(result.warnings[0].find("missing") != std::string::npos);
    }

    SECTION("trace outside the night window is excluded with a warning") {
        // Noon on the report date precedes the 18:00 window start.
        const double noon = local_midnight_utc_s(parse_date("2018-03-01"), 0.0) + 12 * 3600.0;
        std::vector<KeyedTrace> traces = {
            make_keyed("p1", "2018-03-01", Channel::Eda, noon, 4, 100)};
        const auto result = assemble_sessions(traces, {make_report("p1", "2018-03-01")});
        CHECK(result.sessions.empty());
        REQUIRE(result.warnings.size() == 2);
        CHECK(result.warnings[0].find("outside the night window") != std::string::npos);
    }
}

TEST_CASE("assemble_sessions accounts for every input") {
    const double start = local_midnight_utc_s(parse_date("2018-03-01"), 0.0) + 22 * 3600.0;
    std::vector<KeyedTrace> traces;
    traces.push_back(make_keyed("p1", "2018-03-01", Channel::Eda, start, 4, 100));
    traces.push_back(make_keyed("p1", "2018-03-01", Channel::AccX, start, 32, 100));
    traces.push_back(make_keyed("p2", "2018-03-02", Channel::Eda, start + 86400.0, 4, 100));
    std::vector<NightReport> reports = {make_report("p1", "2018-03-01"),
                                        make_report("p3", "2018-03-05")};
    const auto result = assemble_sessions(traces, reports);
    CHECK(result.sessions.empty());
    // p1 night incomplete, p2 trace unmatched, p3 report unmatched.
    CHECK(result.warnings.size() == 3);
}

TEST_CASE("trace path convention carries identity") {
    const auto info = parse_trace_path("p7/2018-03-02/EDA.csv");
    CHECK(info.participant_id == "p7");
    CHECK(format_date(info.night_date) == "2018-03-02");
    CHECK(info.file_kind == Channel::Eda);
    const auto acc = parse_trace_path("data/p7/2018-03-02/ACC.csv");
    CHECK(acc.participant_id == "p7");
    CHECK(acc.file_kind == Channel::AccX);
    CHECK_THROWS_AS(parse_trace_path("p7/2018-03-02/TEMP.csv"), ParseError);
    CHECK_THROWS_AS(parse_trace_path("EDA.csv"), ParseError);
}
