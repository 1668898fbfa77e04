#include "avphon/audio_features.hpp"

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <numbers>
#include <random>

namespace avphon::audio {

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

int next_pow2(int n) {
    int p = 1;
    while (p < n) p *= 2;
    return p;
}

// Triangular filterbank evaluated per FFT bin, triangles equally spaced on
// the mel scale from 0 Hz to Nyquist. Rows are filters, columns bins.
Mat mel_filterbank(int num_filters, int num_bins, int nfft, int sample_rate) {
    const double mel_max = hz_to_mel(sample_rate / 2.0);
    Vec points(num_filters + 2);
    for (int m = 0; m < num_filters + 2; ++m) points[m] = mel_max * m / (num_filters + 1);

    Mat bank = Mat::Zero(num_filters, num_bins);
    for (int k = 0; k < num_bins; ++k) {
        const double mel_k = hz_to_mel(static_cast<double>(k) * sample_rate / nfft);
        for (int m = 0; m < num_filters; ++m) {
            const double lo = points[m], center = points[m + 1], hi = points[m + 2];
            double w = std::min((mel_k - lo) / (center - lo), (hi - mel_k) / (hi - center));
            if (w > 0.0) bank(m, k) = w;
        }
    }
    return bank;
}

}  // namespace

WindowGrid frame_signal(const AudioSignal& signal, double window_len, double hop) {
    if (signal.sample_rate <= 0) throw DataError("sample rate must be positive");
    const int win = static_cast<int>(std::lround(window_len * signal.sample_rate));
    const int step = static_cast<int>(std::lround(hop * signal.sample_rate));
    if (win < 2 || step < 1) throw ConfigError("window/hop too small for the sample rate");
    if (signal.samples.size() < win) throw DataError("signal too short");

    const auto count = (signal.samples.size() - win) / step + 1;
    WindowGrid grid;
    grid.window_len = window_len;
    grid.hop = hop;
    grid.centers.resize(static_cast<std::size_t>(count));
    for (Eigen::Index i = 0; i < count; ++i)
        grid.centers[static_cast<std::size_t>(i)] = i * hop + window_len / 2.0;
    return grid;
}

int window_length_samples(const AudioSignal& signal, const WindowGrid& grid) {
    return static_cast<int>(std::lround(grid.window_len * signal.sample_rate));
}

int window_start_sample(const WindowGrid& grid, int sample_rate, int index) {
    return static_cast<int>(std::lround(grid.hop * sample_rate)) * index;
}

Vec compute_mfcc(const Eigen::Ref<const Vec>& window_samples, int sample_rate,
                 const MfccConfig& config) {
    const int n = static_cast<int>(window_samples.size());
    if (n < 2) throw DataError("mfcc window needs at least 2 samples");

    // Pre-emphasis; the first sample is differenced against itself.
    Vec emphasized(n);
    emphasized[0] = window_samples[0] - config.preemphasis * window_samples[0];
    for (int i = 1; i < n; ++i)
        emphasized[i] = window_samples[i] - config.preemphasis * window_samples[i - 1];

    for (int i = 0; i < n; ++i) {
        const double w =
            0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * i / (n - 1));
        emphasized[i] *= w;
    }

    const int nfft = next_pow2(n);
    const int num_bins = nfft / 2 + 1;
    std::vector<double> padded(static_cast<std::size_t>(nfft), 0.0);
    for (int i = 0; i < n; ++i) padded[static_cast<std::size_t>(i)] = emphasized[i];

    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> spectrum;
    fft.fwd(spectrum, padded);

    Vec power(num_bins);
    for (int k = 0; k < num_bins; ++k) power[k] = std::norm(spectrum[static_cast<std::size_t>(k)]);

    const Mat bank = mel_filterbank(config.num_filters, num_bins, nfft, sample_rate);
    Vec energies = bank * power;
    for (int m = 0; m < config.num_filters; ++m)
        energies[m] = std::log(std::max(energies[m], config.log_floor));

    // Orthonormal DCT-II of the log energies.
    const int M = config.num_filters;
    Vec coeffs(config.num_coeffs);
    for (int j = 0; j < config.num_coeffs; ++j) {
        double acc = 0.0;
        for (int m = 0; m < M; ++m)
            acc += energies[m] * std::cos(std::numbers::pi * j * (2 * m + 1) / (2.0 * M));
        const double scale = (j == 0) ? std::sqrt(1.0 / M) : std::sqrt(2.0 / M);
        coeffs[j] = scale * acc;
    }
    return coeffs;
}

std::pair<Mat, Mat> compute_deltas(const Eigen::Ref<const Mat>& coeffs, int reach) {
    if (coeffs.rows() == 0) throw DataError("delta computation on empty sequence");
    const Eigen::Index T = coeffs.rows();

    double denom = 0.0;
    for (int k = 1; k <= reach; ++k) denom += 2.0 * k * k;

    auto apply = [&](const Mat& c) {
        Mat d(T, c.cols());
        for (Eigen::Index t = 0; t < T; ++t) {
            Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(c.cols());
            for (int k = 1; k <= reach; ++k) {
                const Eigen::Index fwd = std::min<Eigen::Index>(t + k, T - 1);
                const Eigen::Index back = std::max<Eigen::Index>(t - k, 0);
                acc += k * (c.row(fwd) - c.row(back));
            }
            d.row(t) = acc / denom;
        }
        return d;
    };

    Mat delta = apply(coeffs);
    Mat delta2 = apply(delta);
    return {std::move(delta), std::move(delta2)};
}

AudioSignal add_noise(const AudioSignal& signal, double snr_db, uint64_t seed) {
    const double power = signal.samples.squaredNorm() / signal.samples.size();
    if (!(power > 0.0)) throw DataError("cannot scale noise against silent signal");

    const double noise_power = power / std::pow(10.0, snr_db / 10.0);
    const double sigma = std::sqrt(noise_power);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    AudioSignal noisy = signal;
    for (Eigen::Index i = 0; i < noisy.samples.size(); ++i) noisy.samples[i] += gauss(rng);
    return noisy;
}

FeatureSequence extract_audio_features(const AudioSignal& signal, const std::string& utterance,
                                       const NoiseConfig& noise, const MfccConfig& config,
                                       double window_len, double hop) {
    const AudioSignal* source = &signal;
    AudioSignal noisy;
    if (noise.snr_db) {
        noisy = add_noise(signal, *noise.snr_db, noise.seed);
        source = &noisy;
    }

    WindowGrid grid = frame_signal(*source, window_len, hop);
    const int win = window_length_samples(*source, grid);
    const auto T = static_cast<Eigen::Index>(grid.size());

    Mat mfcc(T, config.num_coeffs);
    for (Eigen::Index i = 0; i < T; ++i) {
        const int start = window_start_sample(grid, source->sample_rate, static_cast<int>(i));
        mfcc.row(i) = compute_mfcc(source->samples.segment(start, win), source->sample_rate,
                                   config);
    }
    auto [delta, delta2] = compute_deltas(mfcc);

    FeatureSequence seq;
    seq.vectors.resize(T, 3 * config.num_coeffs);
    seq.vectors << mfcc, delta, delta2;
    seq.layout = ModalityLayout{3 * config.num_coeffs, 0};
    seq.grid = std::move(grid);
    seq.utterance = utterance;
    seq.validate();
    return seq;
}

}  // namespace avphon::audio
