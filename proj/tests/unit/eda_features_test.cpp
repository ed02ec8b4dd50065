#include <catch_amalgamated.hpp>

#include <cmath>

#include "sleepeda/eda_features.hpp"

using namespace sleepeda;

namespace {

SignalTrace eda_trace(std::vector<double> samples, double rate = 4.0) {
    SignalTrace t;
    t.channel_label = Channel::Eda;
    t.start_time_s = 0.0;
    t.rate_hz = rate;
    t.samples = std::move(samples);
    return t;
}

// Baseline with one triangular bump: rise over rise_s seconds, equal decay.
SignalTrace bump_trace(double baseline, double amplitude, double rise_s, double rate,
                       double total_s) {
    const auto n = static_cast<std::size_t>(total_s * rate);
    std::vector<double> s(n, baseline);
    const double t0 = total_s / 2.0 - rise_s;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / rate;
        if (t >= t0 && t < t0 + rise_s)
            s[i] = baseline + amplitude * (t - t0) / rise_s;
        else if (t >= t0 + rise_s && t < t0 + 2 * rise_s)
            s[i] = baseline + amplitude * (1.0 - (t - t0 - rise_s) / rise_s);
    }
    return eda_trace(std::move(s), rate);
}

EpochFlags flags_from(std::vector<bool> bits) {
    EpochFlags f;
    f.epoch_len_s = 30.0;
    f.flags = std::move(bits);
    return f;
}

}  // namespace

TEST_CASE("constant trace has no peaks") {
    const auto t = eda_trace(std::vector<double>(400, 0.3));
    CHECK(detect_peaks(t).empty());
}

TEST_CASE("single planted bump yields exactly one peak") {
    const auto t = bump_trace(0.3, 0.2, 5.0, 4.0, 60.0);
    const auto peaks = detect_peaks(t);
    REQUIRE(peaks.size() == 1);
    CHECK(peaks[0].amplitude_us > 0.15);
    CHECK(peaks[0].amplitude_us <= 0.2 + 1e-12);
    CHECK(peaks[0].rise_rate_us_per_s > 0.02);
    CHECK(peaks[0].time_offset_s == Catch::Approx(30.0).margin(2.0));
}

TEST_CASE("sub-threshold bumps are rejected") {
    SECTION("amplitude below min_amplitude_us") {
        const auto t = bump_trace(0.3, 0.03, 5.0, 4.0, 60.0);
        CHECK(detect_peaks(t).empty());
    }
    SECTION("rise rate below min_rise_rate_us_per_s") {
        // 0.08 uS over 20 s is 0.004 uS/s.
        const auto t = bump_trace(0.3, 0.08, 20.0, 4.0, 120.0);
        CHECK(detect_peaks(t).empty());
    }
}

TEST_CASE("detect_peaks rejects non-EDA traces and tiny rates") {
    auto t = eda_trace(std::vector<double>(100, 0.3));
    t.channel_label = Channel::AccX;
    CHECK_THROWS_AS(detect_peaks(t), ChannelError);
    auto slow = eda_trace(std::vector<double>(100, 0.3), 0.5);
    CHECK_THROWS_AS(detect_peaks(slow), DomainError);
}

TEST_CASE("adding a constant offset leaves features unchanged") {
    auto base = bump_trace(0.3, 0.2, 5.0, 4.0, 120.0);
    auto shifted = base;
    for (auto& v : shifted.samples) v += 1.7;
    const auto a = detect_peaks(base);
    const auto b = detect_peaks(shifted);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].sample_index == b[i].sample_index);
        CHECK(a[i].amplitude_us == Catch::Approx(b[i].amplitude_us));
    }
}

TEST_CASE("lowering the amplitude threshold never loses peaks") {
    const auto t = bump_trace(0.3, 0.06, 3.0, 4.0, 90.0);
    FeatureConfig strict;
    strict.min_amplitude_us = 0.05;
    FeatureConfig loose = strict;
    loose.min_amplitude_us = 0.01;
    CHECK(detect_peaks(t, loose).size() >= detect_peaks(t, strict).size());
}

TEST_CASE("epoch_peaks examples") {
    FeatureConfig cfg;

    SECTION("no peaks means all flags false") {
        const auto f = epoch_peaks({}, 300.0, cfg);
        CHECK(f.flags.size() == 10);
        for (bool b : f.flags) CHECK_FALSE(b);
    }

    SECTION("peaks at 10 s and 20 s share epoch 0") {
        std::vector<PeakEvent> peaks(2);
        peaks[0].time_offset_s = 10.0;
        peaks[1].time_offset_s = 20.0;
        const auto f = epoch_peaks(peaks, 300.0, cfg);
        CHECK(f.flags[0]);
        CHECK(std::count(f.flags.begin(), f.flags.end(), true) == 1);
    }

    SECTION("peaks at 10 s and 50 s fill epochs 0 and 1") {
        std::vector<PeakEvent> peaks(2);
        peaks[0].time_offset_s = 10.0;
        peaks[1].time_offset_s = 50.0;
        const auto f = epoch_peaks(peaks, 300.0, cfg);
        CHECK(std::count(f.flags.begin(), f.flags.end(), true) == 2);
        CHECK(f.flags[0]);
        CHECK(f.flags[1]);
    }

    SECTION("peak beyond duration raises RangeError") {
        std::vector<PeakEvent> peaks(1);
        peaks[0].time_offset_s = 301.0;
        CHECK_THROWS_AS(epoch_peaks(peaks, 300.0, cfg), RangeError);
    }
}

TEST_CASE("detect_storms finds maximal runs") {
    FeatureConfig cfg;

    SECTION("all false yields no storms") {
        CHECK(detect_storms(flags_from({false, false, false}), cfg).empty());
    }

    SECTION("run of one is below the minimum") {
        const auto storms = detect_storms(flags_from({true, true, false, true}), cfg);
        REQUIRE(storms.size() == 1);
        CHECK(storms[0].start_epoch == 0);
        CHECK(storms[0].length_epochs == 2);
    }

    SECTION("two runs of lengths 3 and 2") {
        const auto storms = detect_storms(flags_from({true, true, true, false, true, true}), cfg);
        REQUIRE(storms.size() == 2);
        CHECK(storms[0].length_epochs == 3);
        CHECK(storms[1].start_epoch == 4);
        CHECK(storms[1].length_epochs == 2);
    }
}

TEST_CASE("feature summary hand example") {
    const auto flags = flags_from({true, true, true, false, true, true});
    const auto storms = detect_storms(flags, {});
    std::vector<PeakEvent> peaks(7);
    const auto fv = summarize_features(peaks, flags, storms);
    CHECK(fv.peak_epoch_count == 5);
    CHECK(fv.storm_count == 2);
    CHECK(fv.storm_mean == Catch::Approx(2.5));
    CHECK(fv.storm_sd == Catch::Approx(std::sqrt(0.5)).epsilon(1e-4));
    CHECK(fv.storm_max == 3.0);
    CHECK(fv.peak_count == 7);
}

TEST_CASE("degenerate storm statistics") {
    SECTION("no storms zeroes the statistics") {
        const auto fv = summarize_features({}, flags_from({false, false}), {});
        CHECK(fv.storm_count == 0);
        CHECK(fv.storm_mean == 0.0);
        CHECK(fv.storm_sd == 0.0);
        CHECK(fv.storm_max == 0.0);
    }
    SECTION("single storm has zero sd") {
        const auto flags = flags_from({true, true, true, true});
        const auto fv = summarize_features({}, flags, detect_storms(flags, {}));
        CHECK(fv.storm_count == 1);
        CHECK(fv.storm_mean == 4.0);
        CHECK(fv.storm_sd == 0.0);
        CHECK(fv.storm_max == 4.0);
    }
}

TEST_CASE("flat trace produces the all-zero feature vector") {
    NightSession s;
    s.eda = eda_trace(std::vector<double>(4 * 300, 0.42));
    const auto fv = extract_night_features(s);
    CHECK(fv.peak_epoch_count == 0);
    CHECK(fv.storm_count == 0);
    CHECK(fv.storm_mean == 0.0);
    CHECK(fv.storm_sd == 0.0);
    CHECK(fv.storm_max == 0.0);
    CHECK(fv.peak_count == 0);
}

TEST_CASE("feature CSV row formats all eight columns") {
    EdaFeatureVector fv;
    fv.peak_epoch_count = 5;
    fv.storm_count = 2;
    fv.storm_mean = 2.5;
    fv.storm_sd = 0.5;
    fv.storm_max = 3;
    fv.peak_count = 7;
    CHECK(feature_csv_row("p1", parse_date("2018-03-01"), fv) ==
          "p1,2018-03-01,5,2,2.5,0.5,3,7");
}
