#include "avphon/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include "avphon/alignment.hpp"
#include "avphon/audio_features.hpp"
#include "avphon/container.hpp"
#include "avphon/image.hpp"
#include "avphon/wav.hpp"

namespace avphon::synth {

namespace {

constexpr double kWindowLen = 0.025;
constexpr double kHop = 0.010;

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d4a2645581a193ULL;
    return x ^ (x >> 31);
}

double smoothstep(double lo, double hi, double x) {
    const double t = std::clamp((x - lo) / (hi - lo), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

struct Segment {
    int phoneme = 0;   // index into spec.phonemes
    long start = 0;    // samples (waveform) or milliseconds (feature)
    long end = 0;
};

struct MouthShape {
    double width = 0.5;
    double aperture = 0.5;
};

}  // namespace

SynthSpec SynthSpec::parse(const io::ConfigFile& config) {
    SynthSpec spec;
    const std::string mode = config.get_string("corpus", "mode", "waveform");
    if (mode == "waveform")
        spec.mode = EmissionMode::Waveform;
    else if (mode == "feature")
        spec.mode = EmissionMode::Feature;
    else
        throw ConfigError("corpus mode must be waveform or feature, got '" + mode + "'");

    spec.seed = static_cast<uint64_t>(config.get_int("corpus", "seed", 0));
    spec.sample_rate = static_cast<int>(config.get_int("corpus", "sample_rate", 16000));
    spec.fps = static_cast<int>(config.get_int("corpus", "fps", 60));
    spec.speaker = config.get_string("corpus", "speaker", "spk1");
    for (const char* split : {"pretrain", "train", "test"}) {
        const long n = config.get_int("corpus", std::string("utterances_") + split, 0);
        if (n > 0) spec.utterances_per_split[split] = static_cast<int>(n);
    }
    spec.phones_per_utterance =
        static_cast<int>(config.get_int("corpus", "phones_per_utterance", 8));
    spec.word_len = static_cast<int>(config.get_int("corpus", "word_len", 3));
    spec.amplitude = config.get_double("corpus", "amplitude", 0.3);
    spec.audio_noise = config.get_double("corpus", "audio_noise", 0.005);
    spec.formant_jitter = config.get_double("corpus", "formant_jitter", 0.02);
    spec.pixel_jitter = config.get_double("corpus", "pixel_jitter", 4.0);
    spec.transition_ms = config.get_double("corpus", "transition_ms", 20.0);
    spec.feature_audio_dim = static_cast<int>(config.get_int("corpus", "feature_audio_dim", 0));
    spec.feature_visual_dim = static_cast<int>(config.get_int("corpus", "feature_visual_dim", 0));

    for (const std::string& section : config.sections_matching("phoneme ")) {
        PhonemeSpec ph;
        ph.label = section.substr(std::string("phoneme ").size());
        const std::string cls = config.get_string(section, "class");
        if (cls == "vowel")
            ph.is_vowel = true;
        else if (cls == "consonant")
            ph.is_vowel = false;
        else
            throw ConfigError("phoneme " + ph.label + ": class must be vowel or consonant");
        ph.duration_ms = static_cast<int>(config.get_int(section, "duration_ms", 100));
        ph.duration_jitter_ms =
            static_cast<int>(config.get_int(section, "duration_jitter_ms", 0));
        if (spec.mode == EmissionMode::Waveform) {
            ph.formants = config.get_vector(section, "formants");
            ph.formant_amps = config.has_key(section, "formant_amps")
                                  ? config.get_vector(section, "formant_amps")
                                  : std::vector<double>(ph.formants.size(), 1.0);
            if (ph.formant_amps.size() != ph.formants.size())
                throw ConfigError("phoneme " + ph.label +
                                  ": formant_amps length must match formants");
            ph.mouth_width = config.get_double(section, "mouth_width", 0.5);
            ph.mouth_aperture = config.get_double(section, "mouth_aperture", 0.5);
        } else {
            const auto am = config.get_vector(section, "audio_mean");
            ph.audio_mean = Eigen::Map<const Vec>(am.data(), static_cast<Eigen::Index>(am.size()));
            ph.audio_std = config.get_double(section, "audio_std", 0.1);
            const auto vm = config.get_vector(section, "visual_mean");
            ph.visual_mean =
                Eigen::Map<const Vec>(vm.data(), static_cast<Eigen::Index>(vm.size()));
            ph.visual_std = config.get_double(section, "visual_std", 0.1);
        }
        spec.phonemes.push_back(std::move(ph));
    }
    spec.validate();
    return spec;
}

void SynthSpec::validate() const {
    if (phonemes.size() < 2) throw ConfigError("synth spec needs at least 2 phonemes");
    if (utterances_per_split.empty())
        throw ConfigError("synth spec generates no utterances (set utterances_train etc.)");
    if (phones_per_utterance < 1) throw ConfigError("phones_per_utterance must be >= 1");
    if (sample_rate < 1000) throw ConfigError("sample_rate too small");
    if (fps < 1) throw ConfigError("fps must be >= 1");
    for (const auto& ph : phonemes) {
        if (ph.duration_ms - ph.duration_jitter_ms < 25)
            throw ConfigError("phoneme " + ph.label +
                              ": duration must stay >= 25 ms (one analysis window)");
        if (mode == EmissionMode::Waveform && ph.formants.empty())
            throw ConfigError("phoneme " + ph.label + ": waveform mode needs formants");
        if (mode == EmissionMode::Feature) {
            if (ph.audio_mean.size() != feature_audio_dim)
                throw ConfigError("phoneme " + ph.label +
                                  ": audio_mean length must equal feature_audio_dim");
            if (ph.visual_mean.size() != feature_visual_dim)
                throw ConfigError("phoneme " + ph.label +
                                  ": visual_mean length must equal feature_visual_dim");
        }
    }
    if (mode == EmissionMode::Feature && feature_audio_dim + feature_visual_dim < 1)
        throw ConfigError("feature mode needs feature_audio_dim/feature_visual_dim");
}

namespace {

// Alternating consonant/vowel phone strings. With a single-class inventory
// every position draws from that class.
std::vector<int> sample_phone_string(const SynthSpec& spec, std::mt19937_64& rng) {
    std::vector<int> vowels, consonants;
    for (int i = 0; i < static_cast<int>(spec.phonemes.size()); ++i)
        (spec.phonemes[static_cast<std::size_t>(i)].is_vowel ? vowels : consonants).push_back(i);

    std::vector<int> phones;
    phones.reserve(static_cast<std::size_t>(spec.phones_per_utterance));
    for (int p = 0; p < spec.phones_per_utterance; ++p) {
        const std::vector<int>* pool;
        if (vowels.empty())
            pool = &consonants;
        else if (consonants.empty())
            pool = &vowels;
        else
            pool = (p % 2 == 0) ? &consonants : &vowels;
        std::uniform_int_distribution<std::size_t> pick(0, pool->size() - 1);
        phones.push_back((*pool)[pick(rng)]);
    }
    return phones;
}

std::vector<Segment> sample_segments(const SynthSpec& spec, const std::vector<int>& phones,
                                     std::mt19937_64& rng, long units_per_second) {
    std::vector<Segment> segments;
    long cursor = 0;
    for (int idx : phones) {
        const auto& ph = spec.phonemes[static_cast<std::size_t>(idx)];
        int ms = ph.duration_ms;
        if (ph.duration_jitter_ms > 0) {
            std::uniform_int_distribution<int> jitter(-ph.duration_jitter_ms,
                                                      ph.duration_jitter_ms);
            ms += jitter(rng);
        }
        const long units = ms * units_per_second / 1000;
        segments.push_back({idx, cursor, cursor + units});
        cursor += units;
    }
    return segments;
}

void write_alignment(const std::filesystem::path& path, const SynthSpec& spec,
                     const std::vector<Segment>& segments, double unit_seconds,
                     const std::vector<std::string>& words) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write alignment: " + path.string());
    out << "start_s\tend_s\tphoneme_label\tword\tspeaker\n";
    char a[32], b[32];
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const auto& seg = segments[i];
        std::snprintf(a, sizeof a, "%.7f", seg.start * unit_seconds);
        std::snprintf(b, sizeof b, "%.7f", seg.end * unit_seconds);
        out << a << '\t' << b << '\t' << spec.phonemes[static_cast<std::size_t>(seg.phoneme)].label
            << '\t' << words[i] << '\t' << spec.speaker << "\n";
    }
}

std::vector<std::string> word_labels(const SynthSpec& spec, std::size_t count) {
    std::vector<std::string> words(count);
    for (std::size_t i = 0; i < count; ++i)
        words[i] = "w" + std::to_string(i / static_cast<std::size_t>(std::max(1, spec.word_len)));
    return words;
}

Vec synthesize_audio(const SynthSpec& spec, const std::vector<Segment>& segments,
                     std::mt19937_64& rng) {
    const long total = segments.back().end;
    Vec samples = Vec::Zero(total);
    std::normal_distribution<double> unit_gauss(0.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    const long ramp = std::max(1L, static_cast<long>(0.005 * spec.sample_rate));

    for (const auto& seg : segments) {
        const auto& ph = spec.phonemes[static_cast<std::size_t>(seg.phoneme)];
        const std::size_t nf = ph.formants.size();
        std::vector<double> freqs(nf), phases(nf);
        double amp_total = 0.0;
        for (std::size_t j = 0; j < nf; ++j) {
            freqs[j] = ph.formants[j] * (1.0 + spec.formant_jitter * unit_gauss(rng));
            phases[j] = phase(rng);
            amp_total += ph.formant_amps[j];
        }
        for (long s = seg.start; s < seg.end; ++s) {
            const double t = static_cast<double>(s - seg.start) / spec.sample_rate;
            double v = 0.0;
            for (std::size_t j = 0; j < nf; ++j)
                v += ph.formant_amps[j] *
                     std::sin(2.0 * std::numbers::pi * freqs[j] * t + phases[j]);
            const double envelope =
                std::min({1.0, static_cast<double>(s - seg.start) / ramp,
                          static_cast<double>(seg.end - 1 - s) / ramp});
            samples[s] = spec.amplitude * v / amp_total * std::max(envelope, 0.0);
        }
    }
    if (spec.audio_noise > 0.0) {
        std::normal_distribution<double> floor_noise(0.0, spec.audio_noise);
        for (long s = 0; s < total; ++s) samples[s] += floor_noise(rng);
    }
    return samples;
}

MouthShape mouth_at(const SynthSpec& spec, const std::vector<Segment>& segments, double t) {
    const double sr = spec.sample_rate;
    std::size_t i = 0;
    while (i + 1 < segments.size() && t >= segments[i].end / sr) ++i;
    const auto& cur = spec.phonemes[static_cast<std::size_t>(segments[i].phoneme)];
    MouthShape shape{cur.mouth_width, cur.mouth_aperture};

    const double tau = spec.transition_ms / 2000.0;
    if (tau <= 0.0) return shape;
    const double start = segments[i].start / sr;
    const double end = segments[i].end / sr;
    if (i > 0 && t < start + tau) {
        const auto& prev = spec.phonemes[static_cast<std::size_t>(segments[i - 1].phoneme)];
        const double f = 0.5 + (t - start) / (2.0 * tau);  // 0.5 at the boundary
        shape.width = prev.mouth_width + f * (cur.mouth_width - prev.mouth_width);
        shape.aperture = prev.mouth_aperture + f * (cur.mouth_aperture - prev.mouth_aperture);
    } else if (i + 1 < segments.size() && t > end - tau) {
        const auto& next = spec.phonemes[static_cast<std::size_t>(segments[i + 1].phoneme)];
        const double f = (t - (end - tau)) / (2.0 * tau);
        shape.width = cur.mouth_width + f * (next.mouth_width - cur.mouth_width);
        shape.aperture = cur.mouth_aperture + f * (next.mouth_aperture - cur.mouth_aperture);
    }
    return shape;
}

Image8 render_mouth(const MouthShape& shape, double pixel_jitter, std::mt19937_64& rng) {
    Image8 img;
    img.width = kMouthWidth;
    img.height = kMouthHeight;
    img.pixels.resize(static_cast<std::size_t>(img.size()));

    const double cx = img.width / 2.0;
    const double cy = img.height / 2.0;
    const double semi_a = std::max(2.0, shape.width * 42.0);
    const double semi_b = std::max(2.0, shape.aperture * 60.0);
    std::normal_distribution<double> jitter(0.0, pixel_jitter);

    for (int r = 0; r < img.height; ++r) {
        for (int c = 0; c < img.width; ++c) {
            const double u = (c + 0.5 - cx) / semi_a;
            const double v = (r + 0.5 - cy) / semi_b;
            const double rho = std::sqrt(u * u + v * v);
            double value = 40.0 + (200.0 - 40.0) * smoothstep(0.85, 1.15, rho);
            if (pixel_jitter > 0.0) value += jitter(rng);
            img.at(r, c) = static_cast<uint8_t>(
                std::clamp(static_cast<long>(std::lround(value)), 0L, 255L));
        }
    }
    return img;
}

void generate_waveform_utterance(const SynthSpec& spec, const std::filesystem::path& utt_dir,
                                 uint64_t seed, double& seconds) {
    std::mt19937_64 rng(seed);
    const auto phones = sample_phone_string(spec, rng);
    const auto segments = sample_segments(spec, phones, rng, spec.sample_rate);
    const auto words = word_labels(spec, segments.size());

    std::filesystem::create_directories(utt_dir / "frames");
    write_alignment(utt_dir / "alignment.tsv", spec, segments, 1.0 / spec.sample_rate, words);

    AudioSignal signal;
    signal.sample_rate = spec.sample_rate;
    signal.samples = synthesize_audio(spec, segments, rng);
    io::write_wav(utt_dir / "audio.wav", signal);
    seconds = signal.duration();

    const long frame_count =
        static_cast<long>(signal.duration() * spec.fps);
    std::ofstream manifest(utt_dir / "frames" / "manifest.tsv");
    if (!manifest) throw DataError("cannot write frame manifest in " + utt_dir.string());
    manifest << "frame_index\ttimestamp_s\n";
    char ts[32], name[32];
    for (long f = 0; f < frame_count; ++f) {
        const double t = static_cast<double>(f) / spec.fps;
        const Image8 frame = render_mouth(mouth_at(spec, segments, t), spec.pixel_jitter, rng);
        std::snprintf(name, sizeof name, "f_%06ld.pgm", f);
        io::write_pgm(utt_dir / "frames" / name, frame);
        std::snprintf(ts, sizeof ts, "%.9f", t);
        manifest << f << '\t' << ts << "\n";
    }
}

void generate_feature_utterance(const SynthSpec& spec, const std::filesystem::path& utt_dir,
                                const std::string& utt_id, uint64_t seed, double& seconds) {
    std::mt19937_64 rng(seed);
    const auto phones = sample_phone_string(spec, rng);
    const auto segments = sample_segments(spec, phones, rng, 1000);  // millisecond units
    const auto words = word_labels(spec, segments.size());

    std::filesystem::create_directories(utt_dir);
    write_alignment(utt_dir / "alignment.tsv", spec, segments, 1e-3, words);

    const double duration = segments.back().end * 1e-3;
    seconds = duration;
    const long count = static_cast<long>(std::floor((duration - kWindowLen) / kHop)) + 1;
    if (count < 1) throw ConfigError("utterance too short for a single analysis window");

    FeatureSequence seq;
    seq.layout = ModalityLayout{spec.feature_audio_dim, spec.feature_visual_dim};
    seq.grid.window_len = kWindowLen;
    seq.grid.hop = kHop;
    seq.utterance = utt_id;
    seq.vectors.resize(count, seq.layout.total());
    std::normal_distribution<double> unit_gauss(0.0, 1.0);
    for (long w = 0; w < count; ++w) {
        const double center = w * kHop + kWindowLen / 2.0;
        seq.grid.centers.push_back(center);
        std::size_t i = 0;
        while (i + 1 < segments.size() && center >= segments[i].end * 1e-3) ++i;
        const auto& ph = spec.phonemes[static_cast<std::size_t>(segments[i].phoneme)];
        for (int d = 0; d < spec.feature_audio_dim; ++d)
            seq.vectors(w, d) = ph.audio_mean[d] + ph.audio_std * unit_gauss(rng);
        for (int d = 0; d < spec.feature_visual_dim; ++d)
            seq.vectors(w, spec.feature_audio_dim + d) =
                ph.visual_mean[d] + ph.visual_std * unit_gauss(rng);
    }
    io::save_features(utt_dir / "features.avfc", seq);
}

}  // namespace

GenerateSummary generate(const SynthSpec& spec, const std::filesystem::path& out_dir) {
    spec.validate();
    GenerateSummary summary;

    abx::ClassMap class_map;
    for (const auto& ph : spec.phonemes)
        class_map[ph.label] =
            ph.is_vowel ? abx::PhonemeClass::Vowel : abx::PhonemeClass::Consonant;

    int split_index = 0;
    for (const auto& [split, count] : spec.utterances_per_split) {
        const auto split_dir = out_dir / split;
        std::filesystem::create_directories(split_dir);
        io::write_class_map(split_dir / "class_map.tsv", class_map);

        std::ofstream index(split_dir / "utterances.tsv");
        if (!index) throw DataError("cannot write corpus index in " + split_dir.string());
        if (spec.mode == EmissionMode::Waveform)
            index << "utterance\twav\tframes\talignment\n";
        else
            index << "utterance\tfeatures\talignment\n";

        auto& split_summary = summary.splits[split];
        for (int u = 0; u < count; ++u) {
            char utt_id[32];
            std::snprintf(utt_id, sizeof utt_id, "u%04d", u);
            const uint64_t utt_seed =
                splitmix64(spec.seed ^ splitmix64(static_cast<uint64_t>(split_index) * 1000003ULL +
                                                  static_cast<uint64_t>(u)));
            double seconds = 0.0;
            if (spec.mode == EmissionMode::Waveform) {
                generate_waveform_utterance(spec, split_dir / utt_id, utt_seed, seconds);
                index << utt_id << '\t' << utt_id << "/audio.wav\t" << utt_id << "/frames\t"
                      << utt_id << "/alignment.tsv\n";
            } else {
                generate_feature_utterance(spec, split_dir / utt_id, utt_id, utt_seed, seconds);
                index << utt_id << '\t' << utt_id << "/features.avfc\t" << utt_id
                      << "/alignment.tsv\n";
            }
            split_summary.utterances += 1;
            split_summary.seconds += seconds;
        }
        ++split_index;
    }
    return summary;
}

CorpusSplit read_corpus_split(const std::filesystem::path& split_dir) {
    const auto index_path = split_dir / "utterances.tsv";
    std::ifstream in(index_path);
    if (!in) throw DataError("cannot open corpus index: " + index_path.string());

    std::string line;
    if (!std::getline(in, line)) throw DataError("empty corpus index: " + index_path.string());
    if (!line.empty() && line.back() == '\r') line.pop_back();

    CorpusSplit split;
    split.root = split_dir;
    bool waveform;
    if (line == "utterance\twav\tframes\talignment")
        waveform = true;
    else if (line == "utterance\tfeatures\talignment")
        waveform = false;
    else
        throw DataError("unrecognized corpus index header: " + index_path.string());
    split.has_audio = split.has_frames = waveform;
    split.has_features = !waveform;

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.back() == '\r') line.pop_back();
        std::vector<std::string> fields;
        std::size_t pos = 0;
        while (true) {
            const auto tab = line.find('\t', pos);
            if (tab == std::string::npos) {
                fields.push_back(line.substr(pos));
                break;
            }
            fields.push_back(line.substr(pos, tab - pos));
            pos = tab + 1;
        }
        CorpusEntry entry;
        if (waveform) {
            if (fields.size() != 4)
                throw DataError("corpus index row needs 4 fields: " + index_path.string());
            entry.utterance = fields[0];
            entry.wav = split_dir / fields[1];
            entry.frames = split_dir / fields[2];
            entry.alignment = split_dir / fields[3];
        } else {
            if (fields.size() != 3)
                throw DataError("corpus index row needs 3 fields: " + index_path.string());
            entry.utterance = fields[0];
            entry.features = split_dir / fields[1];
            entry.alignment = split_dir / fields[2];
        }
        split.entries.push_back(std::move(entry));
    }
    if (split.entries.empty()) throw DataError("corpus split has no utterances: " + split_dir.string());
    return split;
}

}  // namespace avphon::synth
