#include "avphon/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "avphon/alignment.hpp"
#include "avphon/audio_features.hpp"
#include "avphon/container.hpp"
#include "avphon/fusion.hpp"
#include "avphon/parallel.hpp"
#include "avphon/version.hpp"
#include "avphon/wav.hpp"

namespace avphon::exp {

namespace {

using ordered_json = nlohmann::ordered_json;

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d4a2645581a193ULL;
    return x ^ (x >> 31);
}

uint64_t hash_string(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Stage failures must name the stage (and utterance where applicable) while
// keeping their error category for the CLI exit code.
template <class F>
auto with_context(const std::string& context, F&& f) {
    try {
        return f();
    } catch (const ConfigError& e) {
        throw ConfigError(context + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(context + ": " + e.what());
    } catch (const NumericError& e) {
        throw NumericError(context + ": " + e.what());
    }
}

bool needs_audio(TestModality m) { return m != TestModality::V; }
bool needs_visual(TestModality m) {
    return m == TestModality::V || m == TestModality::AV || m == TestModality::NV;
}
bool needs_noise(TestModality m) { return m == TestModality::N || m == TestModality::NV; }
bool train_has_audio(TrainModality m) { return m != TrainModality::V; }
bool train_has_visual(TrainModality m) { return m != TrainModality::A; }

std::vector<FrameImage> load_frames(const std::filesystem::path& frames_dir) {
    std::ifstream manifest(frames_dir / "manifest.tsv");
    if (!manifest)
        throw DataError("cannot open frame manifest: " + (frames_dir / "manifest.tsv").string());
    std::string line;
    if (!std::getline(manifest, line))
        throw DataError("empty frame manifest in " + frames_dir.string());

    std::vector<FrameImage> frames;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw DataError("frame manifest row needs frame_index\ttimestamp_s");
        FrameImage frame;
        const long index = std::stol(line.substr(0, tab));
        frame.timestamp = std::stod(line.substr(tab + 1));
        char name[32];
        std::snprintf(name, sizeof name, "f_%06ld.pgm", index);
        frame.image = io::read_image(frames_dir / name);
        frames.push_back(std::move(frame));
    }
    if (frames.empty()) throw DataError("frame manifest lists no frames: " + frames_dir.string());
    return frames;
}

struct ExtractPlan {
    bool audio = false;
    bool visual = false;
    std::optional<audio::NoiseConfig> noise;
    const vision::EigenmouthBasis* basis = nullptr;
};

FeatureSequence extract_entry(const synth::CorpusEntry& entry, const ExtractPlan& plan) {
    if (!entry.features.empty()) {
        // Feature-mode corpus: the front-end is bypassed entirely.
        if (plan.noise)
            throw ConfigError("noisy test modalities need a waveform corpus, got precomputed "
                              "features for " + entry.utterance);
        FeatureSequence seq = io::load_features(entry.features);
        if (plan.audio && plan.visual) {
            if (seq.layout.audio_dim == 0 || seq.layout.visual_dim == 0)
                throw DataError("feature file lacks a modality: " + entry.features.string());
            return seq;
        }
        return fusion::drop_modality(
            seq, plan.audio ? fusion::Modality::Audio : fusion::Modality::Visual);
    }

    const AudioSignal signal = io::read_wav(entry.wav);
    std::optional<FeatureSequence> audio_seq;
    if (plan.audio)
        audio_seq = audio::extract_audio_features(signal, entry.utterance,
                                                  plan.noise.value_or(audio::NoiseConfig{}));
    std::optional<FeatureSequence> visual_seq;
    if (plan.visual) {
        if (!plan.basis) throw ConfigError("visual extraction requested without a PCA basis");
        // The window grid always comes from the (clean) audio timeline.
        const WindowGrid grid = audio::frame_signal(signal);
        visual_seq = vision::extract_visual_features(load_frames(entry.frames), grid,
                                                     *plan.basis, entry.utterance);
    }
    if (audio_seq && visual_seq) return fusion::concat_modalities(*audio_seq, *visual_seq);
    if (audio_seq) return std::move(*audio_seq);
    if (visual_seq) return std::move(*visual_seq);
    throw ConfigError("extraction plan selects no modality");
}

// Pretraining sample: the center frame matched to every acoustic window, as
// duplicates (windows outnumber frames). Subsampled by stride beyond the cap.
vision::EigenmouthBasis pretrain_pca(const synth::CorpusSplit& split, int k, int max_windows,
                                     int threads) {
    struct UttFrames {
        std::vector<FrameImage> frames;
        std::vector<vision::FrameTriple> triples;
    };
    std::vector<UttFrames> per_utt(split.entries.size());
    parallel_for(static_cast<int>(split.entries.size()), threads, [&](int i) {
        const auto& entry = split.entries[static_cast<std::size_t>(i)];
        with_context("utterance " + entry.utterance, [&] {
            const AudioSignal signal = io::read_wav(entry.wav);
            const WindowGrid grid = audio::frame_signal(signal);
            auto frames = load_frames(entry.frames);
            std::vector<double> timestamps(frames.size());
            for (std::size_t f = 0; f < frames.size(); ++f)
                timestamps[f] = frames[f].timestamp;
            per_utt[static_cast<std::size_t>(i)].triples =
                vision::match_frames(grid.centers, timestamps);
            per_utt[static_cast<std::size_t>(i)].frames = std::move(frames);
            return 0;
        });
    });

    long total = 0;
    for (const auto& u : per_utt) total += static_cast<long>(u.triples.size());
    if (total == 0) throw DataError("pretraining split produced no windows");
    const long stride = std::max(1L, (total + max_windows - 1) / max_windows);

    std::vector<const Image8*> sample;
    long index = 0;
    for (const auto& u : per_utt)
        for (const auto& t : u.triples) {
            if (index % stride == 0)
                sample.push_back(&u.frames[static_cast<std::size_t>(t.center)].image);
            ++index;
        }

    const int d = kMouthWidth * kMouthHeight;
    Mat data(static_cast<Eigen::Index>(sample.size()), d);
    for (std::size_t i = 0; i < sample.size(); ++i)
        data.row(static_cast<Eigen::Index>(i)) = vectorize(*sample[i]).transpose();

    vision::PcaResult pca = vision::fit_pca(data, k);
    vision::EigenmouthBasis basis;
    basis.mean_image = std::move(pca.mean);
    basis.components = std::move(pca.components);
    basis.explained_variance = std::move(pca.eigenvalues);
    return basis;
}

std::string timestamp_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    io::AtomicFile file(path);
    {
        std::ofstream out(file.temp_path(), std::ios::binary);
        if (!out) throw DataError("cannot write " + path.string());
        out << text;
    }
    file.commit();
}

}  // namespace

TrainModality parse_train_modality(const std::string& s) {
    if (s == "A") return TrainModality::A;
    if (s == "V") return TrainModality::V;
    if (s == "AV") return TrainModality::AV;
    throw ConfigError("train modality must be A, V, or AV, got '" + s + "'");
}

TestModality parse_test_modality(const std::string& s) {
    if (s == "A") return TestModality::A;
    if (s == "V") return TestModality::V;
    if (s == "AV") return TestModality::AV;
    if (s == "N") return TestModality::N;
    if (s == "NV") return TestModality::NV;
    throw ConfigError("test modality must be A, V, AV, N, or NV, got '" + s + "'");
}

std::string to_string(TrainModality m) {
    switch (m) {
        case TrainModality::A: return "A";
        case TrainModality::V: return "V";
        default: return "AV";
    }
}

std::string to_string(TestModality m) {
    switch (m) {
        case TestModality::A: return "A";
        case TestModality::V: return "V";
        case TestModality::AV: return "AV";
        case TestModality::N: return "N";
        default: return "NV";
    }
}

ExperimentConfig ExperimentConfig::parse(const io::ConfigFile& config,
                                         const std::filesystem::path& base_dir) {
    ExperimentConfig out;
    out.name = config.get_string("experiment", "name", "experiment");
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_absolute() ? path : base_dir / path;
    };
    out.corpus = resolve(config.get_string("experiment", "corpus"));
    out.train_dir = config.has_key("experiment", "train_dir")
                        ? resolve(config.get_string("experiment", "train_dir"))
                        : out.corpus / "train";
    out.test_dir = config.has_key("experiment", "test_dir")
                       ? resolve(config.get_string("experiment", "test_dir"))
                       : out.corpus / "test";
    out.pretrain_dir = config.has_key("experiment", "pretrain_dir")
                           ? resolve(config.get_string("experiment", "pretrain_dir"))
                           : out.corpus / "pretrain";
    out.train = parse_train_modality(config.get_string("experiment", "train_modality"));
    out.test = parse_test_modality(config.get_string("experiment", "test_modality"));
    out.replicates = static_cast<int>(config.get_int("experiment", "replicates", 10));
    out.base_seed = static_cast<uint64_t>(config.get_int("experiment", "base_seed", 1));
    out.pca_components = static_cast<int>(config.get_int("experiment", "pca_components", 4));
    out.snr_db = config.get_double("experiment", "snr_db", 5.0);
    out.noise_seed = static_cast<uint64_t>(config.get_int("experiment", "noise_seed", 7));
    out.alpha = config.get_double("experiment", "alpha", 1.0);
    out.iterations = static_cast<int>(config.get_int("experiment", "iterations", 1500));
    out.init_clusters = static_cast<int>(config.get_int("experiment", "init_clusters", 10));
    out.standardize = config.get_bool("experiment", "standardize", false);
    out.triple_weighted = config.get_bool("experiment", "triple_weighted", false);
    out.cross_speaker = config.get_bool("experiment", "cross_speaker", false);
    out.pca_max_windows =
        static_cast<int>(config.get_int("experiment", "pca_max_windows", 2000));
    out.config_text = config.text();
    out.validate();
    return out;
}

void ExperimentConfig::validate() const {
    if (replicates < 1) throw ConfigError("replicates must be >= 1");
    if (iterations < 1) throw ConfigError("iterations must be >= 1");
    if (init_clusters < 1) throw ConfigError("init_clusters must be >= 1");
    if (!(alpha > 0.0)) throw ConfigError("alpha must be positive");
    if (pca_components < 1) throw ConfigError("pca_components must be >= 1");
    if (pca_max_windows < 2) throw ConfigError("pca_max_windows must be >= 2");

    // Marginalization only drops dimensions, never invents them.
    if (needs_audio(test) && !train_has_audio(train))
        throw ConfigError("test modality " + to_string(test) +
                          " needs audio dimensions the train modality " + to_string(train) +
                          " never trained");
    if (needs_visual(test) && !train_has_visual(train))
        throw ConfigError("test modality " + to_string(test) +
                          " needs visual dimensions the train modality " + to_string(train) +
                          " never trained");

    std::error_code ec;
    const auto canonical = [&](const std::filesystem::path& p) {
        const auto c = std::filesystem::weakly_canonical(p, ec);
        return ec ? p : c;
    };
    if (canonical(train_dir) == canonical(test_dir))
        throw ConfigError("train and test splits must be disjoint directories");
    if (train_has_visual(train) && (canonical(pretrain_dir) == canonical(train_dir) ||
                                    canonical(pretrain_dir) == canonical(test_dir)))
        throw ConfigError("pretrain split must be disjoint from train and test");
}

namespace {

struct TestSide {
    std::vector<FeatureSequence> features;
    abx::AbxBattery battery;
    std::vector<std::pair<int, std::pair<int, int>>> token_spans;  // (utt index, [lo,hi))
    abx::ClassMap class_map;
    long tokens_excluded = 0;
};

TestSide prepare_test_side(const ExperimentConfig& config, const synth::CorpusSplit& split,
                           const ExtractPlan& plan, int threads) {
    TestSide side;
    side.class_map = io::read_class_map(split.root / "class_map.tsv");

    side.features.resize(split.entries.size());
    parallel_for(static_cast<int>(split.entries.size()), threads, [&](int i) {
        const auto& entry = split.entries[static_cast<std::size_t>(i)];
        with_context("utterance " + entry.utterance, [&] {
            ExtractPlan utt_plan = plan;
            if (plan.noise) {
                utt_plan.noise = audio::NoiseConfig{
                    plan.noise->snr_db,
                    splitmix64(config.noise_seed ^ hash_string(entry.utterance))};
            }
            side.features[static_cast<std::size_t>(i)] = extract_entry(entry, utt_plan);
            return 0;
        });
    });

    std::map<std::string, int> utt_index;
    for (int i = 0; i < static_cast<int>(split.entries.size()); ++i)
        utt_index[split.entries[static_cast<std::size_t>(i)].utterance] = i;

    std::vector<abx::PhoneToken> tokens;
    for (const auto& entry : split.entries) {
        const auto segments = io::read_alignment(entry.alignment);
        auto utt_tokens = io::tokens_from_alignment(segments, entry.utterance);
        tokens.insert(tokens.end(), utt_tokens.begin(), utt_tokens.end());
    }

    // Tokens spanning zero window centers are excluded up front.
    std::vector<abx::PhoneToken> kept;
    for (auto& t : tokens) {
        const auto& grid = side.features[static_cast<std::size_t>(utt_index.at(t.utterance))].grid;
        const auto span = abx::window_span(grid, t.start, t.end);
        if (span.second > span.first)
            kept.push_back(std::move(t));
        else
            side.tokens_excluded += 1;
    }

    side.battery = abx::build_battery(std::move(kept), side.class_map,
                                      abx::BatteryOptions{!config.cross_speaker});
    side.token_spans.reserve(side.battery.tokens.size());
    for (const auto& t : side.battery.tokens) {
        const int ui = utt_index.at(t.utterance);
        const auto span =
            abx::window_span(side.features[static_cast<std::size_t>(ui)].grid, t.start, t.end);
        side.token_spans.push_back({ui, span});
    }
    return side;
}

std::vector<double> score_battery(const abx::AbxBattery& battery,
                                  const std::vector<abx::PosteriorToken>& tokens, int threads) {
    // Distinct (token, X) dissimilarities are shared across triples.
    std::map<std::pair<int, int>, int> pair_slot;
    auto slot = [&](int i, int j) {
        if (j < i) std::swap(i, j);
        return pair_slot.emplace(std::make_pair(i, j), static_cast<int>(pair_slot.size()))
            .first->second;
    };
    std::vector<std::pair<int, int>> pair_of_slot;
    std::vector<std::pair<int, int>> triple_slots(battery.triples.size());
    for (std::size_t t = 0; t < battery.triples.size(); ++t) {
        const auto& tr = battery.triples[t];
        triple_slots[t] = {slot(tr.a, tr.x), slot(tr.b, tr.x)};
    }
    pair_of_slot.resize(pair_slot.size());
    for (const auto& [pair, s] : pair_slot) pair_of_slot[static_cast<std::size_t>(s)] = pair;

    std::vector<double> dissimilarity(pair_of_slot.size());
    parallel_for(static_cast<int>(pair_of_slot.size()), threads, [&](int s) {
        const auto& [i, j] = pair_of_slot[static_cast<std::size_t>(s)];
        dissimilarity[static_cast<std::size_t>(s)] =
            abx::dtw_dissimilarity(tokens[static_cast<std::size_t>(i)],
                                   tokens[static_cast<std::size_t>(j)]);
    });

    std::vector<double> scores(battery.triples.size());
    for (std::size_t t = 0; t < battery.triples.size(); ++t) {
        const double da = dissimilarity[static_cast<std::size_t>(triple_slots[t].first)];
        const double db = dissimilarity[static_cast<std::size_t>(triple_slots[t].second)];
        scores[t] = da < db ? 1.0 : (db < da ? 0.0 : 0.5);
    }
    return scores;
}

std::vector<int> observed_dims_for_test(const ExperimentConfig& config,
                                        const ModalityLayout& train_layout) {
    std::vector<int> observed;
    const bool marginal_audio = needs_audio(config.test) && !needs_visual(config.test) &&
                                train_layout.visual_dim > 0;
    const bool marginal_visual = needs_visual(config.test) && !needs_audio(config.test) &&
                                 train_layout.audio_dim > 0;
    if (marginal_audio)
        for (int i = 0; i < train_layout.audio_dim; ++i) observed.push_back(i);
    if (marginal_visual)
        for (int i = train_layout.audio_dim; i < train_layout.total(); ++i)
            observed.push_back(i);
    return observed;  // empty = use the full model
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                         const RunOptions& options) {
    config.validate();
    const int threads = options.sequential ? 1 : options.threads;

    std::filesystem::create_directories(out_dir);
    std::filesystem::create_directories(out_dir / "models");
    std::filesystem::create_directories(out_dir / "reports");
    std::filesystem::create_directories(out_dir / "traces");

    const auto train_split = with_context("stage load-train", [&] {
        return synth::read_corpus_split(config.train_dir);
    });
    const auto test_split = with_context("stage load-test", [&] {
        return synth::read_corpus_split(config.test_dir);
    });

    // Pretraining: PCA parameters come from held-out data, never train/test.
    vision::EigenmouthBasis basis;
    const bool use_visual = train_has_visual(config.train) && train_split.has_frames;
    if (train_has_visual(config.train) && !train_split.has_frames &&
        !train_split.has_features)
        throw ConfigError("train modality needs visual data the corpus does not provide");
    if (use_visual) {
        const auto pretrain_split = with_context("stage load-pretrain", [&] {
            return synth::read_corpus_split(config.pretrain_dir);
        });
        basis = with_context("stage pretrain-pca", [&] {
            return pretrain_pca(pretrain_split, config.pca_components, config.pca_max_windows,
                                threads);
        });
        io::AtomicFile file(out_dir / "pca_basis.avpb");
        vision::io::save_basis(file.temp_path(), basis);
        file.commit();
    }

    ExtractPlan train_plan;
    train_plan.audio = train_has_audio(config.train);
    train_plan.visual = train_has_visual(config.train);
    train_plan.basis = use_visual ? &basis : nullptr;

    std::vector<FeatureSequence> train_features(train_split.entries.size());
    with_context("stage extract-train", [&] {
        parallel_for(static_cast<int>(train_split.entries.size()), threads, [&](int i) {
            const auto& entry = train_split.entries[static_cast<std::size_t>(i)];
            with_context("utterance " + entry.utterance, [&] {
                train_features[static_cast<std::size_t>(i)] = extract_entry(entry, train_plan);
                return 0;
            });
        });
        return 0;
    });

    std::optional<fusion::Standardizer> standardizer;
    if (config.standardize) {
        standardizer = fusion::fit_standardizer(train_features);
        for (auto& seq : train_features) seq = fusion::apply_standardizer(seq, *standardizer);
    }

    ExtractPlan test_plan;
    test_plan.audio = needs_audio(config.test);
    test_plan.visual = needs_visual(config.test);
    test_plan.basis = test_plan.visual && use_visual ? &basis : nullptr;
    if (needs_noise(config.test))
        test_plan.noise = audio::NoiseConfig{config.snr_db, config.noise_seed};

    TestSide test_side = with_context("stage extract-test", [&] {
        return prepare_test_side(config, test_split, test_plan, threads);
    });
    if (test_side.battery.triples.empty())
        throw DataError("stage extract-test: battery is empty (no context-matched contrasts)");
    if (standardizer) {
        // Test features standardized with training statistics, then restricted
        // to the test modality's dimensions.
        const auto observed = observed_dims_for_test(config, train_features.front().layout);
        for (auto& seq : test_side.features) {
            if (observed.empty()) {
                seq = fusion::apply_standardizer(seq, *standardizer);
            } else {
                fusion::Standardizer sliced;
                const auto m = static_cast<Eigen::Index>(observed.size());
                sliced.mean.resize(m);
                sliced.scale.resize(m);
                for (Eigen::Index i = 0; i < m; ++i) {
                    sliced.mean[i] = standardizer->mean[observed[static_cast<std::size_t>(i)]];
                    sliced.scale[i] = standardizer->scale[observed[static_cast<std::size_t>(i)]];
                }
                seq = fusion::apply_standardizer(seq, sliced);
            }
        }
    }

    const dpgmm::NiwPrior prior = with_context("stage prior", [&] {
        Eigen::Index total = 0;
        for (const auto& seq : train_features) total += seq.size();
        Mat stacked(total, train_features.front().dims());
        Eigen::Index row = 0;
        for (const auto& seq : train_features) {
            stacked.middleRows(row, seq.size()) = seq.vectors;
            row += seq.size();
        }
        return dpgmm::NiwPrior::from_data(stacked);
    });

    const auto observed = observed_dims_for_test(config, train_features.front().layout);

    RunResult result;
    result.out_dir = out_dir;
    result.reports.resize(static_cast<std::size_t>(config.replicates));
    std::vector<uint64_t> seeds(static_cast<std::size_t>(config.replicates));
    for (int r = 0; r < config.replicates; ++r)
        seeds[static_cast<std::size_t>(r)] = config.base_seed + static_cast<uint64_t>(r);

    auto run_replicate = [&](int r) {
        with_context("stage replicate-" + std::to_string(r), [&] {
            dpgmm::DpgmmConfig fit_config;
            fit_config.alpha = config.alpha;
            fit_config.iterations = config.iterations;
            fit_config.init_clusters = config.init_clusters;
            fit_config.seed = seeds[static_cast<std::size_t>(r)];
            const dpgmm::DpgmmModel model = dpgmm::fit(train_features, prior, fit_config);

            char suffix[16];
            std::snprintf(suffix, sizeof suffix, "%03d", r);
            {
                io::AtomicFile file(out_dir / "models" / ("model_" + std::string(suffix) +
                                                          ".avpm"));
                dpgmm::save_model(file.temp_path(), model);
                file.commit();
            }
            {
                io::AtomicFile file(out_dir / "traces" / ("trace_" + std::string(suffix) +
                                                          ".csv"));
                dpgmm::save_trace_csv(file.temp_path(), model);
                file.commit();
            }

            const dpgmm::DpgmmModel eval_model =
                observed.empty() ? model : dpgmm::marginal_model(model, observed);
            const dpgmm::PosteriorEvaluator evaluate(eval_model);

            std::vector<std::vector<dpgmm::ClusterPosterior>> posteriors(
                test_side.features.size());
            for (std::size_t u = 0; u < test_side.features.size(); ++u) {
                const auto& seq = test_side.features[u];
                posteriors[u].reserve(static_cast<std::size_t>(seq.size()));
                for (Eigen::Index w = 0; w < seq.size(); ++w)
                    posteriors[u].push_back(evaluate(seq.vectors.row(w).transpose()));
            }

            std::vector<abx::PosteriorToken> tokens(test_side.battery.tokens.size());
            for (std::size_t t = 0; t < tokens.size(); ++t) {
                const auto& [ui, span] = test_side.token_spans[t];
                tokens[t].frames.assign(
                    posteriors[static_cast<std::size_t>(ui)].begin() + span.first,
                    posteriors[static_cast<std::size_t>(ui)].begin() + span.second);
            }

            const auto scores = score_battery(test_side.battery, tokens, 1);
            abx::ScoreReport report = abx::aggregate(test_side.battery, test_side.class_map,
                                                     scores, config.triple_weighted);
            report.num_tokens_excluded = test_side.tokens_excluded;
            {
                io::AtomicFile file(out_dir / "reports" /
                                    ("report_" + std::string(suffix) + ".json"));
                abx::save_report_json(file.temp_path(), report);
                file.commit();
            }
            result.reports[static_cast<std::size_t>(r)] = std::move(report);
            return 0;
        });
    };
    parallel_for(config.replicates, threads, run_replicate);

    for (const auto& report : result.reports) result.overall_scores.push_back(report.overall);
    const double mean =
        std::accumulate(result.overall_scores.begin(), result.overall_scores.end(), 0.0) /
        config.replicates;
    double sd = 0.0;
    if (config.replicates > 1) {
        double ss = 0.0;
        for (double s : result.overall_scores) ss += (s - mean) * (s - mean);
        sd = std::sqrt(ss / (config.replicates - 1));
    }
    result.mean = mean;
    const double half = 1.96 * sd / std::sqrt(static_cast<double>(config.replicates));
    result.ci_low = mean - half;
    result.ci_high = mean + half;

    {
        std::string csv = "replicate,seed,overall\n";
        char buf[96];
        for (int r = 0; r < config.replicates; ++r) {
            std::snprintf(buf, sizeof buf, "%d,%llu,%.17g\n", r,
                          static_cast<unsigned long long>(seeds[static_cast<std::size_t>(r)]),
                          result.overall_scores[static_cast<std::size_t>(r)]);
            csv += buf;
        }
        write_text_atomic(out_dir / "scores.csv", csv);
    }
    {
        ordered_json summary;
        summary["schema_version"] = 1;
        summary["name"] = config.name;
        summary["train_modality"] = to_string(config.train);
        summary["test_modality"] = to_string(config.test);
        summary["replicates"] = config.replicates;
        summary["mean_overall"] = result.mean;
        summary["ci_method"] = "normal_approx_95";
        summary["ci_low"] = result.ci_low;
        summary["ci_high"] = result.ci_high;
        summary["overall_scores"] = result.overall_scores;
        summary["battery_hash"] = result.reports.front().battery_hash;
        summary["num_triples"] = result.reports.front().num_triples;
        summary["num_tokens_excluded"] = result.reports.front().num_tokens_excluded;
        write_text_atomic(out_dir / "reports" / "summary.json", summary.dump(2) + "\n");
    }
    {
        io::AtomicFile file(out_dir / "battery.csv");
        abx::save_battery_csv(file.temp_path(), test_side.battery);
        file.commit();
    }
    {
        ordered_json manifest;
        manifest["schema_version"] = 1;
        manifest["tool_version"] = kVersion;
        manifest["name"] = config.name;
        manifest["corpus"] = std::filesystem::absolute(config.corpus).string();
        manifest["train_dir"] = std::filesystem::absolute(config.train_dir).string();
        manifest["test_dir"] = std::filesystem::absolute(config.test_dir).string();
        manifest["pretrain_dir"] = std::filesystem::absolute(config.pretrain_dir).string();
        manifest["replicate_seeds"] = seeds;
        manifest["sequential"] = options.sequential;
        char hash[32];
        std::snprintf(hash, sizeof hash, "%016llx",
                      static_cast<unsigned long long>(io::config_hash(config.config_text)));
        manifest["config_hash"] = hash;
        manifest["config_text"] = config.config_text;
        manifest["timestamp"] = timestamp_now();  // the only nondeterministic field
        write_text_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
    }
    return result;
}

RunResult run_from_manifest(const std::filesystem::path& manifest_path,
                            const std::filesystem::path& out_dir, const RunOptions& options) {
    std::ifstream in(manifest_path);
    if (!in) throw DataError("cannot open manifest: " + manifest_path.string());
    ordered_json manifest;
    try {
        in >> manifest;
    } catch (const std::exception& e) {
        throw DataError("malformed manifest " + manifest_path.string() + ": " + e.what());
    }
    if (manifest.value("schema_version", 0) != 1)
        throw DataError("unsupported manifest schema: " + manifest_path.string());

    const auto config_file =
        io::ConfigFile::parse_text(manifest.at("config_text").get<std::string>(),
                                   manifest_path.string());
    ExperimentConfig config = ExperimentConfig::parse(config_file, manifest_path.parent_path());
    config.corpus = manifest.at("corpus").get<std::string>();
    config.train_dir = manifest.at("train_dir").get<std::string>();
    config.test_dir = manifest.at("test_dir").get<std::string>();
    config.pretrain_dir = manifest.at("pretrain_dir").get<std::string>();
    return run_experiment(config, out_dir, options);
}

ComparisonRecord compare_runs(const std::filesystem::path& run_a,
                              const std::filesystem::path& run_b) {
    auto load_scores = [](const std::filesystem::path& dir, std::vector<double>& scores,
                          std::vector<uint64_t>& hashes) {
        std::vector<std::filesystem::path> files;
        const auto reports = dir / "reports";
        if (!std::filesystem::is_directory(reports))
            throw DataError("run directory has no reports/: " + dir.string());
        for (const auto& entry : std::filesystem::directory_iterator(reports)) {
            const auto name = entry.path().filename().string();
            if (name.rfind("report_", 0) == 0 && entry.path().extension() == ".json")
                files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        if (files.empty()) throw DataError("no replicate reports in " + reports.string());
        for (const auto& f : files) {
            const auto report = abx::load_report_json(f);
            scores.push_back(report.overall);
            hashes.push_back(report.battery_hash);
        }
    };

    ComparisonRecord record;
    std::vector<uint64_t> hashes_a, hashes_b;
    load_scores(run_a, record.scores_a, hashes_a);
    load_scores(run_b, record.scores_b, hashes_b);

    record.mean_a = std::accumulate(record.scores_a.begin(), record.scores_a.end(), 0.0) /
                    static_cast<double>(record.scores_a.size());
    record.mean_b = std::accumulate(record.scores_b.begin(), record.scores_b.end(), 0.0) /
                    static_cast<double>(record.scores_b.size());
    record.absolute_difference = record.mean_a - record.mean_b;
    if (record.mean_b != 0.5)
        record.relative_improvement = abx::relative_improvement(record.mean_a, record.mean_b);

    const auto mwu = abx::mann_whitney_u(record.scores_a, record.scores_b);
    record.u_statistic = mwu.u;
    record.p_value = mwu.p;

    record.battery_match = true;
    for (uint64_t h : hashes_a)
        if (h != hashes_a.front()) record.battery_match = false;
    for (uint64_t h : hashes_b)
        if (h != hashes_a.front()) record.battery_match = false;
    return record;
}

void save_comparison_json(const std::filesystem::path& path, const ComparisonRecord& record) {
    ordered_json j;
    j["schema_version"] = 1;
    j["mean_a"] = record.mean_a;
    j["mean_b"] = record.mean_b;
    j["absolute_difference"] = record.absolute_difference;
    if (record.relative_improvement)
        j["relative_improvement"] = *record.relative_improvement;
    else
        j["relative_improvement"] = nullptr;
    j["mann_whitney_u"] = record.u_statistic;
    j["p_value"] = record.p_value;
    j["battery_match"] = record.battery_match;
    j["scores_a"] = record.scores_a;
    j["scores_b"] = record.scores_b;
    write_text_atomic(path, j.dump(2) + "\n");
}

}  // namespace avphon::exp
