#pragma once

#include <cstdint>
#include <optional>

#include "avphon/types.hpp"
#include "avphon/wav.hpp"

namespace avphon::audio {

/// Cepstral front-end parameters. The defaults are conventional ASR choices
/// and define the pipeline exactly: pre-emphasis, Hamming window, power
/// spectrum on a power-of-two DFT, triangular mel filterbank spanning
/// 0 Hz..Nyquist with weights formed in mel space, natural log with a floor,
/// orthonormal DCT-II keeping coefficients 0..num_coeffs-1.
struct MfccConfig {
    int num_coeffs = 13;
    int num_filters = 26;
    double preemphasis = 0.97;
    double log_floor = 1e-10;
};

/// Delta estimation reach: regression over the preceding and following
/// `reach` windows, with replicate padding at sequence edges.
inline constexpr int kDeltaReach = 3;

struct NoiseConfig {
    std::optional<double> snr_db;  // empty = noise disabled
    uint64_t seed = 0;
};

/// Splits a signal into overlapping windows. Window i covers samples
/// [i*hop, i*hop + window_len); only fully contained windows are produced,
/// so the count is floor((duration - window_len)/hop) + 1.
/// Throws DataError("signal too short") when no window fits.
WindowGrid frame_signal(const AudioSignal& signal, double window_len = 0.025,
                        double hop = 0.010);

/// Sample count and start index of window i on the grid, in samples.
int window_length_samples(const AudioSignal& signal, const WindowGrid& grid);
int window_start_sample(const WindowGrid& grid, int sample_rate, int index);

/// 13 (num_coeffs) mel cepstral coefficients for one window of samples.
Vec compute_mfcc(const Eigen::Ref<const Vec>& window_samples, int sample_rate,
                 const MfccConfig& config = {});

/// Regression deltas over a coefficient sequence (rows = windows).
/// delta_t = sum_{n=1..reach} n*(c_{t+n} - c_{t-n}) / (2*sum n^2), indices
/// replicate-padded at the edges; the second output applies the same
/// operator to the first.
std::pair<Mat, Mat> compute_deltas(const Eigen::Ref<const Mat>& coeffs, int reach = kDeltaReach);

/// Adds white Gaussian noise scaled to the requested SNR in dB.
/// Deterministic given the seed. Throws DataError on a silent signal.
AudioSignal add_noise(const AudioSignal& signal, double snr_db, uint64_t seed);

/// Full audio front-end: optional noise, framing, MFCCs, deltas. One
/// 3*num_coeffs-dimensional vector per window, audio-only layout.
FeatureSequence extract_audio_features(const AudioSignal& signal, const std::string& utterance,
                                       const NoiseConfig& noise = {},
                                       const MfccConfig& config = {},
                                       double window_len = 0.025, double hop = 0.010);

}  // namespace avphon::audio
