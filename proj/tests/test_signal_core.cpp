#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "ppgaf/errors.hpp"
#include "ppgaf/rng.hpp"
#include "ppgaf/signal.hpp"
#include "ppgaf/util.hpp"
#include "ppgaf/waveform_io.hpp"

using namespace ppgaf;

namespace {

Waveform make_wave(double fs, double duration_s, float value = 0.0f) {
    Waveform w;
    w.patient_id = "p1";
    w.fs_hz = fs;
    w.start_time_ms = 0;
    w.samples.assign(static_cast<size_t>(std::llround(fs * duration_s)), value);
    return w;
}

}  // namespace

TEST_CASE("segment_stream tiles exactly") {
    Waveform w = make_wave(40.0, 90.0);
    auto segs = segment_stream(w, 30.0);
    REQUIRE(segs.size() == 3);
    CHECK(segs[0].t_start_ms == 0);
    CHECK(segs[1].t_start_ms == 30000);
    CHECK(segs[2].t_start_ms == 60000);
    for (const auto& s : segs) CHECK(s.samples.size() == 1200);
}

TEST_CASE("segment_stream drops trailing remainder") {
    Waveform w = make_wave(40.0, 89.0);
    CHECK(segment_stream(w, 30.0).size() == 2);
}

TEST_CASE("segment_stream at 240 Hz gives 7200-sample windows") {
    Waveform w = make_wave(240.0, 30.0);
    auto segs = segment_stream(w, 30.0);
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].samples.size() == 7200);
}

TEST_CASE("segment_stream: short waveform yields empty sequence") {
    Waveform w = make_wave(40.0, 10.0);
    CHECK(segment_stream(w, 30.0).empty());
}

TEST_CASE("segment_stream concatenation equals a source prefix when overlap is 0") {
    Rng rng(7);
    Waveform w = make_wave(17.0, 13.7);
    for (auto& v : w.samples) v = static_cast<float>(rng.normal());
    auto segs = segment_stream(w, 2.0);
    size_t at = 0;
    for (const auto& s : segs)
        for (float v : s.samples) CHECK(v == w.samples[at++]);
    CHECK(at <= w.samples.size());
}

TEST_CASE("extend_by_prefix examples") {
    CHECK(extend_by_prefix({1, 2, 3, 4, 5}, 7) == std::vector<float>{1, 2, 3, 4, 5, 1, 2});
    CHECK(extend_by_prefix({1, 2}, 2) == std::vector<float>{1, 2});
    CHECK_THROWS_AS(extend_by_prefix({1, 2}, 5), DeficitTooLarge);

    // 25 s at 240 Hz extended to 30 s
    std::vector<float> sig(6000);
    for (size_t i = 0; i < sig.size(); ++i) sig[i] = static_cast<float>(i % 97);
    auto out = extend_by_prefix(sig, 7200);
    REQUIRE(out.size() == 7200);
    for (size_t i = 0; i < 1200; ++i) CHECK(out[6000 + i] == sig[i]);
}

TEST_CASE("resample rate ratio and constants") {
    Waveform w = make_wave(80.0, 30.0, 5.0f);
    REQUIRE(w.samples.size() == 2400);
    Waveform r = resample(w, 240.0);
    CHECK(r.samples.size() == 7200);
    for (float v : r.samples) CHECK(v == doctest::Approx(5.0f));
    CHECK(r.patient_id == w.patient_id);
    CHECK(r.start_time_ms == w.start_time_ms);
}

TEST_CASE("resample [0,1] at 1 Hz to 2 Hz holds the endpoint") {
    Waveform w;
    w.patient_id = "p";
    w.fs_hz = 1.0;
    w.samples = {0.0f, 1.0f};
    Waveform r = resample(w, 2.0);
    REQUIRE(r.samples.size() == 4);
    CHECK(r.samples[0] == doctest::Approx(0.0));
    CHECK(r.samples[1] == doctest::Approx(0.5));
    CHECK(r.samples[2] == doctest::Approx(1.0));
    CHECK(r.samples[3] == doctest::Approx(1.0));
}

TEST_CASE("resample round trip: length within one sample, exact at knots") {
    Rng rng(3);
    Waveform w = make_wave(40.0, 11.0);
    for (auto& v : w.samples) v = static_cast<float>(rng.normal());
    Waveform up = resample(w, 120.0);
    Waveform back = resample(up, 40.0);
    CHECK(std::llabs(static_cast<long long>(back.samples.size()) -
                     static_cast<long long>(w.samples.size())) <= 1);
    // 120 = 3 * 40: knots land exactly on source samples
    const size_t n = std::min(back.samples.size(), w.samples.size());
    for (size_t i = 0; i < n; ++i) CHECK(back.samples[i] == doctest::Approx(w.samples[i]).epsilon(1e-6));
}

TEST_CASE("minmax_normalize examples and idempotence") {
    CHECK(minmax_normalize({2, 4, 6}) == std::vector<float>{0.0f, 0.5f, 1.0f});
    CHECK(minmax_normalize({5, 5, 5}) == std::vector<float>{0.0f, 0.0f, 0.0f});
    CHECK(minmax_normalize({-1, 0, 3}) == std::vector<float>{0.0f, 0.25f, 1.0f});

    Rng rng(11);
    std::vector<float> x(257);
    for (auto& v : x) v = static_cast<float>(rng.normal(3.0, 2.0));
    auto once = minmax_normalize(x);
    auto twice = minmax_normalize(once);
    CHECK(once == twice);
    CHECK(*std::min_element(once.begin(), once.end()) == 0.0f);
    CHECK(*std::max_element(once.begin(), once.end()) == 1.0f);
}

TEST_CASE("estimate_quality on a pure sinusoid is GOOD with SQI near 1") {
    Segment s;
    s.patient_id = "p";
    s.fs_hz = 40.0;
    s.normalized = true;
    s.samples.resize(1200);
    for (size_t i = 0; i < s.samples.size(); ++i)
        s.samples[i] = 0.5f + 0.5f * static_cast<float>(std::sin(2.0 * M_PI * 1.2 * i / 40.0));
    QualityFlag q = estimate_quality(s);
    CHECK(q.value == Quality::GOOD);
    CHECK(q.source == QualitySource::HEURISTIC);
    CHECK(q.sqi > 0.9);
}

TEST_CASE("estimate_quality on seeded white noise is BAD with small SQI") {
    Rng rng(123);
    Segment s;
    s.fs_hz = 240.0;
    s.samples.resize(7200);
    for (auto& v : s.samples) v = static_cast<float>(rng.uniform());
    QualityFlag q = estimate_quality(s);
    CHECK(q.value == Quality::BAD);
    CHECK(q.sqi < 0.2);
}

TEST_CASE("estimate_quality flags constant segments BAD") {
    Segment s;
    s.fs_hz = 40.0;
    s.samples.assign(1200, 0.0f);
    QualityFlag q = estimate_quality(s);
    CHECK(q.value == Quality::BAD);
    CHECK(q.sqi == 0.0);
}

TEST_CASE("PPGW1 round trip") {
    Rng rng(5);
    Waveform w;
    w.patient_id = "patient/42";
    w.fs_hz = 62.5;
    w.start_time_ms = 123456789;
    w.samples.resize(999);
    for (auto& v : w.samples) v = static_cast<float>(rng.normal());

    const std::string path = "test_ppgw1_tmp.ppgw";
    write_ppgw1(path, w);
    Waveform r = read_ppgw1(path);
    CHECK(r.patient_id == w.patient_id);
    CHECK(r.fs_hz == w.fs_hz);
    CHECK(r.start_time_ms == w.start_time_ms);
    CHECK(r.samples == w.samples);

    // deterministic bytes
    write_ppgw1(path + "2", w);
    CHECK(sha256_file_hex(path) == sha256_file_hex(path + "2"));
    std::filesystem::remove(path);
    std::filesystem::remove(path + "2");
}

TEST_CASE("PPGW1 rejects corrupt input") {
    const std::string path = "test_ppgw1_bad.ppgw";
    write_file_bytes(path, "NOTAWAVE", 8);
    CHECK_THROWS_AS(read_ppgw1(path), IoError);
    std::filesystem::remove(path);
}
