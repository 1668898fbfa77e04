#include "avphon/wav.hpp"

#include <bit>
#include <cstring>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "wav reader assumes a little-endian host");

namespace avphon::io {

namespace {

template <class T>
T read_le(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

template <class T>
void write_le(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

}  // namespace

AudioSignal read_wav(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open wav file: " + path.string());

    char riff[4], wave[4];
    in.read(riff, 4);
    read_le<uint32_t>(in);  // chunk size
    in.read(wave, 4);
    if (!in || std::memcmp(riff, "RIFF", 4) != 0 || std::memcmp(wave, "WAVE", 4) != 0)
        throw DataError("not a RIFF/WAVE file: " + path.string());

    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t sample_rate = 0;
    std::vector<char> data;
    bool have_fmt = false, have_data = false;

    while (in && !(have_fmt && have_data)) {
        char id[4];
        in.read(id, 4);
        uint32_t size = read_le<uint32_t>(in);
        if (!in) break;
        if (std::memcmp(id, "fmt ", 4) == 0) {
            format = read_le<uint16_t>(in);
            channels = read_le<uint16_t>(in);
            sample_rate = read_le<uint32_t>(in);
            read_le<uint32_t>(in);  // byte rate
            read_le<uint16_t>(in);  // block align
            bits = read_le<uint16_t>(in);
            if (size > 16) in.seekg(size - 16, std::ios::cur);
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            data.resize(size);
            in.read(data.data(), size);
            have_data = true;
        } else {
            in.seekg(size + (size & 1), std::ios::cur);
        }
    }
    if (!have_fmt || !have_data)
        throw DataError("wav file missing fmt/data chunk: " + path.string());
    if (channels != 1)
        throw DataError("expected mono audio, got " + std::to_string(channels) +
                        " channels: " + path.string());
    if (sample_rate == 0) throw DataError("wav file declares zero sample rate: " + path.string());

    AudioSignal signal;
    signal.sample_rate = static_cast<int>(sample_rate);
    if (format == 1 && bits == 16) {
        const auto n = data.size() / 2;
        signal.samples.resize(static_cast<Eigen::Index>(n));
        const int16_t* raw = reinterpret_cast<const int16_t*>(data.data());
        for (std::size_t i = 0; i < n; ++i)
            signal.samples[static_cast<Eigen::Index>(i)] = raw[i] / 32768.0;
    } else if (format == 3 && bits == 32) {
        const auto n = data.size() / 4;
        signal.samples.resize(static_cast<Eigen::Index>(n));
        const float* raw = reinterpret_cast<const float*>(data.data());
        for (std::size_t i = 0; i < n; ++i)
            signal.samples[static_cast<Eigen::Index>(i)] = raw[i];
    } else {
        throw DataError("unsupported wav encoding (need 16-bit PCM or 32-bit float): " +
                        path.string());
    }
    return signal;
}

void write_wav(const std::filesystem::path& path, const AudioSignal& signal) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write wav file: " + path.string());

    const uint32_t n = static_cast<uint32_t>(signal.samples.size());
    const uint32_t data_bytes = n * 2;
    out.write("RIFF", 4);
    write_le<uint32_t>(out, 36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    write_le<uint32_t>(out, 16);
    write_le<uint16_t>(out, 1);  // PCM
    write_le<uint16_t>(out, 1);  // mono
    write_le<uint32_t>(out, static_cast<uint32_t>(signal.sample_rate));
    write_le<uint32_t>(out, static_cast<uint32_t>(signal.sample_rate) * 2);
    write_le<uint16_t>(out, 2);
    write_le<uint16_t>(out, 16);
    out.write("data", 4);
    write_le<uint32_t>(out, data_bytes);
    for (Eigen::Index i = 0; i < signal.samples.size(); ++i) {
        double x = std::clamp(signal.samples[i], -1.0, 1.0);
        write_le<int16_t>(out, static_cast<int16_t>(std::lround(x * 32767.0)));
    }
    if (!out) throw DataError("short write to wav file: " + path.string());
}

}  // namespace avphon::io
