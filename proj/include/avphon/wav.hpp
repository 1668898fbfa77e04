#pragma once

#include <filesystem>
#include <string>

#include "avphon/types.hpp"

namespace avphon {

/// Mono PCM audio in [-1, 1] amplitude units.
struct AudioSignal {
    Vec samples;
    int sample_rate = 16000;

    double duration() const {
        return static_cast<double>(samples.size()) / sample_rate;
    }
};

namespace io {

/// Reads a mono WAV file (16-bit integer PCM or 32-bit IEEE float).
/// Multichannel and other encodings are rejected with a DataError.
AudioSignal read_wav(const std::filesystem::path& path);

/// Writes 16-bit PCM mono, clamping samples to [-1, 1].
void write_wav(const std::filesystem::path& path, const AudioSignal& signal);

}  // namespace io
}  // namespace avphon
