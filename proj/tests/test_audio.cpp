#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "avphon/audio_features.hpp"
#include "oracles.hpp"

using namespace avphon;

namespace {

AudioSignal sine(double seconds, double hz, int rate = 16000, double amp = 0.5) {
    AudioSignal s;
    s.sample_rate = rate;
    s.samples.resize(static_cast<Eigen::Index>(seconds * rate));
    for (Eigen::Index i = 0; i < s.samples.size(); ++i)
        s.samples[i] = amp * std::sin(2.0 * std::numbers::pi * hz * i / rate);
    return s;
}

AudioSignal white(double seconds, uint64_t seed, int rate = 16000, double sigma = 1.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, sigma);
    AudioSignal s;
    s.sample_rate = rate;
    s.samples.resize(static_cast<Eigen::Index>(seconds * rate));
    for (Eigen::Index i = 0; i < s.samples.size(); ++i) s.samples[i] = g(rng);
    return s;
}

}  // namespace

TEST_CASE("window count: 1 s at 16 kHz gives 98 windows of 25/10 ms") {
    const auto grid = audio::frame_signal(sine(1.0, 440.0));
    CHECK(grid.size() == 98);
    CHECK(grid.centers.front() == doctest::Approx(0.0125));
    CHECK(grid.centers[1] - grid.centers[0] == doctest::Approx(0.010));
}

TEST_CASE("window count boundary cases") {
    AudioSignal exact;
    exact.sample_rate = 16000;
    exact.samples = Vec::Ones(400);
    CHECK(audio::frame_signal(exact).size() == 1);

    AudioSignal tooshort;
    tooshort.sample_rate = 16000;
    tooshort.samples = Vec::Ones(160);
    CHECK_THROWS_WITH_AS(audio::frame_signal(tooshort), doctest::Contains("too short"),
                         DataError);
}

TEST_CASE("window count formula holds across random durations") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const int samples = 400 + static_cast<int>(rng() % 32000);
        AudioSignal s;
        s.sample_rate = 16000;
        s.samples = Vec::Zero(samples);
        const auto grid = audio::frame_signal(s);
        const auto expected = (samples - 400) / 160 + 1;
        CHECK(static_cast<Eigen::Index>(grid.size()) == expected);
    }
}

TEST_CASE("mfcc of silence is finite and carries only the log floor") {
    const Vec window = Vec::Zero(400);
    const Vec coeffs = audio::compute_mfcc(window, 16000);
    CHECK(coeffs.allFinite());
    // DCT of a constant log-floor vector: everything lands on coefficient 0.
    CHECK(coeffs[0] == doctest::Approx(std::sqrt(26.0) * std::log(1e-10)));
    for (int j = 1; j < 13; ++j) CHECK(std::abs(coeffs[j]) < 1e-9);
}

TEST_CASE("mfcc matches the direct-DFT reference on a 1 kHz tone") {
    const auto s = sine(0.05, 1000.0);
    const Vec window = s.samples.head(400);
    const Vec mine = audio::compute_mfcc(window, 16000);
    const Vec reference = oracles::reference_mfcc(window, 16000);
    for (int j = 0; j < 13; ++j) CHECK(mine[j] == doctest::Approx(reference[j]).epsilon(1e-6));
}

TEST_CASE("mfcc matches the direct-DFT reference on random windows") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 20; ++trial) {
        Vec window(400);
        for (int i = 0; i < 400; ++i) window[i] = g(rng);
        const Vec mine = audio::compute_mfcc(window, 16000);
        const Vec reference = oracles::reference_mfcc(window, 16000);
        for (int j = 0; j < 13; ++j)
            CHECK(mine[j] == doctest::Approx(reference[j]).epsilon(1e-8));
    }
}

TEST_CASE("mfcc is deterministic") {
    const auto s = sine(0.05, 333.0);
    const Vec a = audio::compute_mfcc(s.samples.head(400), 16000);
    const Vec b = audio::compute_mfcc(s.samples.head(400), 16000);
    CHECK(a == b);
}

TEST_CASE("deltas of a constant sequence vanish") {
    Mat coeffs = Mat::Ones(20, 13) * 3.7;
    const auto [d1, d2] = audio::compute_deltas(coeffs);
    CHECK(d1.cwiseAbs().maxCoeff() == 0.0);
    CHECK(d2.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("deltas of a linear ramp give the slope, second deltas vanish") {
    const int T = 30;
    Mat coeffs(T, 2);
    const double v0 = 0.25, v1 = -1.5;
    for (int t = 0; t < T; ++t) {
        coeffs(t, 0) = t * v0;
        coeffs(t, 1) = t * v1;
    }
    const auto [d1, d2] = audio::compute_deltas(coeffs);
    for (int t = 3; t < T - 3; ++t) {
        CHECK(d1(t, 0) == doctest::Approx(v0));
        CHECK(d1(t, 1) == doctest::Approx(v1));
    }
    for (int t = 6; t < T - 6; ++t) {
        CHECK(std::abs(d2(t, 0)) < 1e-12);
        CHECK(std::abs(d2(t, 1)) < 1e-12);
    }
}

TEST_CASE("single-window sequence has zero deltas") {
    Mat coeffs = Mat::Random(1, 13);
    const auto [d1, d2] = audio::compute_deltas(coeffs);
    CHECK(d1.cwiseAbs().maxCoeff() == 0.0);
    CHECK(d2.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("deltas are linear in the coefficient sequence") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 100; ++trial) {
        const int T = 2 + static_cast<int>(rng() % 15);
        Mat x(T, 3), y(T, 3);
        for (int t = 0; t < T; ++t)
            for (int c = 0; c < 3; ++c) {
                x(t, c) = g(rng);
                y(t, c) = g(rng);
            }
        const double a = g(rng), b = g(rng);
        const auto [dx, dx2] = audio::compute_deltas(x);
        const auto [dy, dy2] = audio::compute_deltas(y);
        const auto [dz, dz2] = audio::compute_deltas(Mat(a * x + b * y));
        CHECK((dz - (a * dx + b * dy)).cwiseAbs().maxCoeff() < 1e-10);
        CHECK((dz2 - (a * dx2 + b * dy2)).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("add_noise hits the requested SNR within 0.5 dB") {
    const auto s = white(1.0, 21);
    for (double snr : {0.0, 5.0, 10.0, 20.0}) {
        const auto noisy = audio::add_noise(s, snr, 99);
        const Vec noise = noisy.samples - s.samples;
        const double p_sig = s.samples.squaredNorm() / s.samples.size();
        const double p_noise = noise.squaredNorm() / noise.size();
        const double realized = 10.0 * std::log10(p_sig / p_noise);
        CHECK(realized == doctest::Approx(snr).epsilon(0.1));
        CHECK(std::abs(realized - snr) < 0.5);
    }
}

TEST_CASE("add_noise is reproducible bit for bit and rejects silence") {
    const auto s = sine(0.2, 500.0);
    const auto a = audio::add_noise(s, 5.0, 1234);
    const auto b = audio::add_noise(s, 5.0, 1234);
    CHECK(a.samples == b.samples);
    const auto c = audio::add_noise(s, 5.0, 1235);
    CHECK(a.samples != c.samples);

    AudioSignal silent;
    silent.sample_rate = 16000;
    silent.samples = Vec::Zero(16000);
    CHECK_THROWS_WITH_AS(audio::add_noise(silent, 5.0, 1), doctest::Contains("silent"),
                         DataError);
}

TEST_CASE("extract_audio_features yields 98x39 on a 1 s signal") {
    const auto seq = audio::extract_audio_features(sine(1.0, 700.0), "utt1");
    CHECK(seq.size() == 98);
    CHECK(seq.dims() == 39);
    CHECK(seq.layout.audio_dim == 39);
    CHECK(seq.layout.visual_dim == 0);
}

TEST_CASE("noise config changes features but not their shape") {
    const auto s = white(0.5, 3, 16000, 0.3);
    const auto clean = audio::extract_audio_features(s, "u");
    const auto noisy1 = audio::extract_audio_features(s, "u", {5.0, 10});
    const auto noisy2 = audio::extract_audio_features(s, "u", {5.0, 11});
    CHECK(clean.size() == noisy1.size());
    CHECK(noisy1.vectors != clean.vectors);
    CHECK(noisy1.vectors != noisy2.vectors);

    const auto empty_noise = audio::extract_audio_features(s, "u", {});
    CHECK(empty_noise.vectors == clean.vectors);
}
