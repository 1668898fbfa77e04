#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "avphon/config_file.hpp"
#include "avphon/types.hpp"

namespace avphon::synth {

enum class EmissionMode { Waveform, Feature };

/// Per-phoneme emission parameters. Waveform mode drives a sinusoid mixture
/// and a procedurally drawn mouth; feature mode samples Gaussians directly
/// in feature space and skips the DSP front-end entirely.
struct PhonemeSpec {
    std::string label;
    bool is_vowel = false;
    int duration_ms = 100;
    int duration_jitter_ms = 0;
    // waveform mode
    std::vector<double> formants;
    std::vector<double> formant_amps;
    double mouth_width = 0.5;     // fraction of the maximum horizontal semi-axis
    double mouth_aperture = 0.5;  // fraction of the maximum vertical semi-axis
    // feature mode
    Vec audio_mean;
    double audio_std = 0.1;
    Vec visual_mean;
    double visual_std = 0.1;
};

struct SynthSpec {
    EmissionMode mode = EmissionMode::Waveform;
    uint64_t seed = 0;
    int sample_rate = 16000;
    int fps = 60;
    std::string speaker = "spk1";
    std::map<std::string, int> utterances_per_split;  // pretrain/train/test
    int phones_per_utterance = 8;
    int word_len = 3;
    double amplitude = 0.3;
    double audio_noise = 0.005;       // waveform noise floor (std, amplitude units)
    double formant_jitter = 0.02;     // relative per-token frequency jitter
    double pixel_jitter = 4.0;        // grayscale noise std
    double transition_ms = 20.0;      // mouth-shape blend across boundaries
    int feature_audio_dim = 0;        // feature mode
    int feature_visual_dim = 0;
    std::vector<PhonemeSpec> phonemes;

    static SynthSpec parse(const io::ConfigFile& config);
    void validate() const;
};

struct GenerateSummary {
    struct Split {
        int utterances = 0;
        double seconds = 0.0;
    };
    std::map<std::string, Split> splits;
};

/// Writes a complete corpus (one subdirectory per nonempty split) under
/// out_dir: audio + frames + alignments in waveform mode, feature containers
/// + alignments in feature mode, plus class map and utterance index files.
/// Deterministic given spec.seed.
GenerateSummary generate(const SynthSpec& spec, const std::filesystem::path& out_dir);

/// Corpus index entry as listed in a split's utterances.tsv.
struct CorpusEntry {
    std::string utterance;
    std::filesystem::path wav;        // waveform corpora
    std::filesystem::path frames;     // waveform corpora (manifest.tsv inside)
    std::filesystem::path features;   // feature corpora
    std::filesystem::path alignment;
};

struct CorpusSplit {
    std::filesystem::path root;
    std::vector<CorpusEntry> entries;
    bool has_audio = false;
    bool has_frames = false;
    bool has_features = false;
};

CorpusSplit read_corpus_split(const std::filesystem::path& split_dir);

}  // namespace avphon::synth
