// Command-line front end for the audiovisual phonetic learning pipeline:
// corpus synthesis, feature extraction, DPGMM training, ABX evaluation, and
// full experiment runs.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

#include "avphon/alignment.hpp"
#include "avphon/audio_features.hpp"
#include "avphon/container.hpp"
#include "avphon/dpgmm.hpp"
#include "avphon/eigenmouth.hpp"
#include "avphon/experiment.hpp"
#include "avphon/fusion.hpp"
#include "avphon/parallel.hpp"
#include "avphon/synth.hpp"
#include "avphon/version.hpp"
#include "avphon/wav.hpp"

namespace fs = std::filesystem;
using namespace avphon;

namespace {

struct GlobalOptions {
    int threads = 0;
    bool sequential = false;
    std::optional<uint64_t> seed;
    std::optional<double> snr_db;
};

std::vector<FrameImage> load_frames_dir(const fs::path& frames_dir) {
    std::ifstream manifest(frames_dir / "manifest.tsv");
    if (!manifest)
        throw DataError("cannot open frame manifest: " + (frames_dir / "manifest.tsv").string());
    std::string line;
    std::getline(manifest, line);
    std::vector<FrameImage> frames;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw DataError("malformed frame manifest row");
        FrameImage frame;
        const long index = std::stol(line.substr(0, tab));
        frame.timestamp = std::stod(line.substr(tab + 1));
        char name[32];
        std::snprintf(name, sizeof name, "f_%06ld.pgm", index);
        frame.image = io::read_image(frames_dir / name);
        frames.push_back(std::move(frame));
    }
    return frames;
}

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

int cmd_synth(const fs::path& spec_path, const fs::path& out, const GlobalOptions& global) {
    auto spec = synth::SynthSpec::parse(io::ConfigFile::parse_file(spec_path));
    if (global.seed) spec.seed = *global.seed;
    const auto summary = synth::generate(spec, out);
    for (const auto& [split, s] : summary.splits)
        std::cout << split << ": " << s.utterances << " utterances, " << s.seconds << " s\n";
    return 0;
}

int cmd_extract_audio(const fs::path& corpus, const fs::path& out, bool csv,
                      std::optional<uint64_t> noise_seed, const GlobalOptions& global) {
    const auto split = synth::read_corpus_split(corpus);
    if (!split.has_audio) throw DataError("corpus split has no audio: " + corpus.string());
    fs::create_directories(out);
    const uint64_t base_noise_seed = noise_seed.value_or(global.seed.value_or(7));
    parallel_for(static_cast<int>(split.entries.size()),
                 global.sequential ? 1 : global.threads, [&](int i) {
                     const auto& entry = split.entries[static_cast<std::size_t>(i)];
                     audio::NoiseConfig noise;
                     if (global.snr_db) {
                         noise.snr_db = *global.snr_db;
                         noise.seed = splitmix64(base_noise_seed ^ hash_string(entry.utterance));
                     }
                     const auto signal = io::read_wav(entry.wav);
                     const auto seq =
                         audio::extract_audio_features(signal, entry.utterance, noise);
                     io::save_features(out / (entry.utterance + ".avfc"), seq);
                     if (csv) io::save_features_csv(out / (entry.utterance + ".csv"), seq);
                 });
    std::cout << "extracted audio features for " << split.entries.size() << " utterances\n";
    return 0;
}

int cmd_fit_pca(const fs::path& corpus, int components, long max_windows, const fs::path& out,
                const GlobalOptions& global) {
    const auto split = synth::read_corpus_split(corpus);
    if (!split.has_frames) throw DataError("corpus split has no frames: " + corpus.string());

    // Sample = the center frame matched to every acoustic window.
    std::vector<Mat> rows_per_utt(split.entries.size());
    parallel_for(static_cast<int>(split.entries.size()),
                 global.sequential ? 1 : global.threads, [&](int i) {
                     const auto& entry = split.entries[static_cast<std::size_t>(i)];
                     const auto signal = io::read_wav(entry.wav);
                     const auto grid = audio::frame_signal(signal);
                     const auto frames = load_frames_dir(entry.frames);
                     std::vector<double> ts(frames.size());
                     for (std::size_t f = 0; f < frames.size(); ++f)
                         ts[f] = frames[f].timestamp;
                     const auto triples = vision::match_frames(grid.centers, ts);
                     Mat rows(static_cast<Eigen::Index>(triples.size()),
                              kMouthWidth * kMouthHeight);
                     for (std::size_t w = 0; w < triples.size(); ++w)
                         rows.row(static_cast<Eigen::Index>(w)) =
                             vectorize(frames[static_cast<std::size_t>(triples[w].center)].image)
                                 .transpose();
                     rows_per_utt[static_cast<std::size_t>(i)] = std::move(rows);
                 });
    Eigen::Index total = 0;
    for (const auto& m : rows_per_utt) total += m.rows();
    const Eigen::Index stride = std::max<Eigen::Index>(1, (total + max_windows - 1) / max_windows);
    Mat data((total + stride - 1) / stride, kMouthWidth * kMouthHeight);
    Eigen::Index row = 0, index = 0;
    for (const auto& m : rows_per_utt)
        for (Eigen::Index r = 0; r < m.rows(); ++r, ++index)
            if (index % stride == 0) data.row(row++) = m.row(r);

    const auto pca = vision::fit_pca(data.topRows(row), components);
    vision::EigenmouthBasis basis;
    basis.mean_image = pca.mean;
    basis.components = pca.components;
    basis.explained_variance = pca.eigenvalues;
    vision::io::save_basis(out, basis);
    std::cout << "fit " << components << " components on " << row << " window-matched frames\n";
    for (int j = 0; j < components; ++j)
        std::cout << "  component " << j << " variance " << basis.explained_variance[j] << "\n";
    return 0;
}

int cmd_extract_video(const fs::path& corpus, const fs::path& basis_path, const fs::path& out,
                      bool csv, const GlobalOptions& global) {
    const auto split = synth::read_corpus_split(corpus);
    if (!split.has_frames) throw DataError("corpus split has no frames: " + corpus.string());
    const auto basis = vision::io::load_basis(basis_path);
    fs::create_directories(out);
    parallel_for(static_cast<int>(split.entries.size()),
                 global.sequential ? 1 : global.threads, [&](int i) {
                     const auto& entry = split.entries[static_cast<std::size_t>(i)];
                     const auto signal = io::read_wav(entry.wav);
                     const auto grid = audio::frame_signal(signal);
                     const auto frames = load_frames_dir(entry.frames);
                     const auto seq =
                         vision::extract_visual_features(frames, grid, basis, entry.utterance);
                     io::save_features(out / (entry.utterance + ".avfc"), seq);
                     if (csv) io::save_features_csv(out / (entry.utterance + ".csv"), seq);
                 });
    std::cout << "extracted visual features for " << split.entries.size() << " utterances\n";
    return 0;
}

std::vector<FeatureSequence> load_feature_dir(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".avfc") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("no .avfc feature files in " + dir.string());
    std::vector<FeatureSequence> sequences;
    for (const auto& f : files) sequences.push_back(io::load_features(f));
    return sequences;
}

int cmd_train(const fs::path& features_dir, const fs::path& out, double alpha, int iterations,
              int init_clusters, bool parallel_gibbs, const fs::path& trace,
              const GlobalOptions& global) {
    const auto sequences = load_feature_dir(features_dir);

    Eigen::Index total = 0;
    for (const auto& seq : sequences) total += seq.size();
    Mat stacked(total, sequences.front().dims());
    Eigen::Index row = 0;
    for (const auto& seq : sequences) {
        stacked.middleRows(row, seq.size()) = seq.vectors;
        row += seq.size();
    }
    const auto prior = dpgmm::NiwPrior::from_data(stacked);

    dpgmm::DpgmmConfig config;
    config.alpha = alpha;
    config.iterations = iterations;
    config.init_clusters = init_clusters;
    config.seed = global.seed.value_or(1);
    config.parallel = parallel_gibbs && !global.sequential;
    config.threads = global.threads;
    const auto model = dpgmm::fit(stacked, sequences.front().layout, prior, config);
    dpgmm::save_model(out, model);
    if (!trace.empty()) dpgmm::save_trace_csv(trace, model);
    std::cout << "trained on " << total << " windows (" << stacked.cols() << " dims), final K="
              << model.num_clusters() << "\n";
    return 0;
}

int cmd_eval_abx(const fs::path& model_path, const fs::path& features_dir, const fs::path& corpus,
                 const fs::path& out, const fs::path& battery_csv, bool triple_weighted,
                 bool cross_speaker, const GlobalOptions& global) {
    const auto model = dpgmm::load_model(model_path);
    const auto sequences = load_feature_dir(features_dir);
    const auto split = synth::read_corpus_split(corpus);
    const auto class_map = io::read_class_map(corpus / "class_map.tsv");

    // When test features cover fewer dimensions than the model, posteriors
    // marginalize over the missing modality's dimensions.
    const auto& layout = sequences.front().layout;
    std::vector<int> observed;
    if (layout.total() != model.dims()) {
        if (layout.visual_dim == 0 && layout.audio_dim == model.layout.audio_dim)
            for (int i = 0; i < model.layout.audio_dim; ++i) observed.push_back(i);
        else if (layout.audio_dim == 0 && layout.visual_dim == model.layout.visual_dim)
            for (int i = model.layout.audio_dim; i < model.dims(); ++i) observed.push_back(i);
        else
            throw DataError("feature dimensions match neither the model nor one modality");
    }
    const auto eval_model = observed.empty() ? model : dpgmm::marginal_model(model, observed);
    const dpgmm::PosteriorEvaluator evaluate(eval_model);

    std::map<std::string, int> utt_index;
    for (int i = 0; i < static_cast<int>(sequences.size()); ++i)
        utt_index[sequences[static_cast<std::size_t>(i)].utterance] = i;

    std::vector<abx::PhoneToken> all_tokens;
    for (const auto& entry : split.entries) {
        const auto segments = io::read_alignment(entry.alignment);
        auto tokens = io::tokens_from_alignment(segments, entry.utterance);
        all_tokens.insert(all_tokens.end(), tokens.begin(), tokens.end());
    }
    long excluded = 0;
    std::vector<abx::PhoneToken> kept;
    for (auto& t : all_tokens) {
        const auto it = utt_index.find(t.utterance);
        if (it == utt_index.end())
            throw DataError("no features for utterance " + t.utterance);
        const auto span = abx::window_span(
            sequences[static_cast<std::size_t>(it->second)].grid, t.start, t.end);
        if (span.second > span.first)
            kept.push_back(std::move(t));
        else
            ++excluded;
    }
    const auto battery =
        abx::build_battery(std::move(kept), class_map, abx::BatteryOptions{!cross_speaker});
    if (battery.triples.empty()) throw DataError("battery is empty for this corpus");

    std::vector<std::vector<dpgmm::ClusterPosterior>> posteriors(sequences.size());
    parallel_for(static_cast<int>(sequences.size()), global.sequential ? 1 : global.threads,
                 [&](int u) {
                     const auto& seq = sequences[static_cast<std::size_t>(u)];
                     auto& rows = posteriors[static_cast<std::size_t>(u)];
                     rows.reserve(static_cast<std::size_t>(seq.size()));
                     for (Eigen::Index w = 0; w < seq.size(); ++w)
                         rows.push_back(evaluate(seq.vectors.row(w).transpose()));
                 });

    std::vector<abx::PosteriorToken> tokens(battery.tokens.size());
    for (std::size_t t = 0; t < battery.tokens.size(); ++t) {
        const auto& token = battery.tokens[t];
        const int ui = utt_index.at(token.utterance);
        const auto span = abx::window_span(sequences[static_cast<std::size_t>(ui)].grid,
                                           token.start, token.end);
        tokens[t].frames.assign(posteriors[static_cast<std::size_t>(ui)].begin() + span.first,
                                posteriors[static_cast<std::size_t>(ui)].begin() + span.second);
    }

    std::vector<double> scores(battery.triples.size());
    for (std::size_t t = 0; t < battery.triples.size(); ++t) {
        const auto& tr = battery.triples[t];
        scores[t] = abx::score_triple(tokens[static_cast<std::size_t>(tr.a)],
                                      tokens[static_cast<std::size_t>(tr.b)],
                                      tokens[static_cast<std::size_t>(tr.x)]);
    }
    auto report = abx::aggregate(battery, class_map, scores, triple_weighted);
    report.num_tokens_excluded = excluded;
    abx::save_report_json(out, report);
    if (!battery_csv.empty()) abx::save_battery_csv(battery_csv, battery);
    std::cout << "overall ABX " << report.overall << " over " << report.num_triples
              << " triples\n";
    return 0;
}

int cmd_run(const fs::path& config_path, const fs::path& manifest_path, const fs::path& out,
            const GlobalOptions& global) {
    exp::RunOptions options;
    options.threads = global.threads;
    options.sequential = global.sequential;
    exp::RunResult result;
    if (!manifest_path.empty()) {
        result = exp::run_from_manifest(manifest_path, out, options);
    } else {
        const auto file = io::ConfigFile::parse_file(config_path);
        const auto config = exp::ExperimentConfig::parse(file, config_path.parent_path());
        result = exp::run_experiment(config, out, options);
    }
    std::cout << "mean overall ABX " << result.mean << " [" << result.ci_low << ", "
              << result.ci_high << "] over " << result.overall_scores.size() << " replicates\n";
    return 0;
}

int cmd_compare(const fs::path& a, const fs::path& b, const fs::path& out) {
    const auto record = exp::compare_runs(a, b);
    if (!record.battery_match)
        std::cerr << "warning: battery identities differ between runs; comparison computed "
                     "anyway\n";
    if (!out.empty()) exp::save_comparison_json(out, record);
    std::cout << "mean_a=" << record.mean_a << " mean_b=" << record.mean_b
              << " diff=" << record.absolute_difference << " U=" << record.u_statistic
              << " p=" << record.p_value << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Audiovisual phonetic category learning toolkit"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    GlobalOptions global;
    app.add_option("--threads", global.threads, "Worker threads (0 = hardware)");
    app.add_flag("--sequential", global.sequential, "Single-threaded deterministic staging");
    uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "Seed override");
    double snr_value = 0.0;
    auto* snr_opt = app.add_option("--snr-db", snr_value, "Add noise at this SNR (dB)");

    fs::path spec_path, out_path, corpus_path, basis_path, model_path, features_path;
    fs::path trace_path, battery_csv_path, config_path, manifest_path, run_a, run_b;
    bool csv = false, parallel_gibbs = false, triple_weighted = false, cross_speaker = false;
    int components = 4, iterations = 1500, init_clusters = 10;
    long max_windows = 2000;
    double alpha = 1.0;
    uint64_t noise_seed_value = 0;

    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic multimodal corpus");
    synth_cmd->add_option("--spec", spec_path, "Corpus spec file")->required();
    synth_cmd->add_option("--out", out_path, "Output corpus directory")->required();

    auto* xa = app.add_subcommand("extract-audio", "MFCC+delta features for a corpus split");
    xa->add_option("--corpus", corpus_path, "Corpus split directory")->required();
    xa->add_option("--out", out_path, "Output feature directory")->required();
    xa->add_flag("--csv", csv, "Also write CSV dumps");
    auto* noise_seed_opt = xa->add_option("--noise-seed", noise_seed_value, "Noise seed");

    auto* fp = app.add_subcommand("fit-pca", "Fit the eigenmouth PCA basis");
    fp->add_option("--corpus", corpus_path, "Pretraining corpus split")->required();
    fp->add_option("--components", components, "Retained component count");
    fp->add_option("--max-windows", max_windows, "Subsampling cap on matched windows");
    fp->add_option("--out", out_path, "Output basis file")->required();

    auto* xv = app.add_subcommand("extract-video", "Eigenmouth features for a corpus split");
    xv->add_option("--corpus", corpus_path, "Corpus split directory")->required();
    xv->add_option("--basis", basis_path, "PCA basis file")->required();
    xv->add_option("--out", out_path, "Output feature directory")->required();
    xv->add_flag("--csv", csv, "Also write CSV dumps");

    auto* tr = app.add_subcommand("train", "Fit a DPGMM on extracted features");
    tr->add_option("--features", features_path, "Feature directory (.avfc files)")->required();
    tr->add_option("--out", model_path, "Output model file")->required();
    tr->add_option("--alpha", alpha, "Concentration parameter");
    tr->add_option("--iterations", iterations, "Gibbs sweeps");
    tr->add_option("--init-clusters", init_clusters, "Initial cluster count");
    tr->add_option("--trace", trace_path, "Training trace CSV");
    tr->add_flag("--parallel-gibbs", parallel_gibbs,
                 "Approximate parallel sweeps (relaxes determinism)");

    auto* ev = app.add_subcommand("eval-abx", "Score an ABX battery with a trained model");
    ev->add_option("--model", model_path, "Model file")->required();
    ev->add_option("--features", features_path, "Test feature directory")->required();
    ev->add_option("--corpus", corpus_path, "Test corpus split (alignments + class map)")
        ->required();
    ev->add_option("--out", out_path, "Report JSON path")->required();
    ev->add_option("--battery-csv", battery_csv_path, "Also write the battery CSV");
    ev->add_flag("--triple-weighted", triple_weighted,
                 "Weight the overall score by triple count");
    ev->add_flag("--cross-speaker", cross_speaker, "Permit cross-speaker triples");

    auto* rn = app.add_subcommand("run", "Run a full train/test experiment");
    rn->add_option("--config", config_path, "Experiment config file");
    rn->add_option("--manifest", manifest_path, "Re-execute from a run manifest");
    rn->add_option("--out", out_path, "Output run directory")->required();

    auto* cp = app.add_subcommand("compare", "Compare two run directories");
    cp->add_option("--a", run_a, "Run directory (test case)")->required();
    cp->add_option("--b", run_b, "Run directory (baseline)")->required();
    cp->add_option("--out", out_path, "Comparison JSON path");

    CLI11_PARSE(app, argc, argv);
    if (*seed_opt) global.seed = seed_value;
    if (*snr_opt) global.snr_db = snr_value;

    try {
        if (synth_cmd->parsed()) return cmd_synth(spec_path, out_path, global);
        if (xa->parsed())
            return cmd_extract_audio(corpus_path, out_path, csv,
                                     *noise_seed_opt ? std::optional<uint64_t>(noise_seed_value)
                                                     : std::nullopt,
                                     global);
        if (fp->parsed())
            return cmd_fit_pca(corpus_path, components, max_windows, out_path, global);
        if (xv->parsed())
            return cmd_extract_video(corpus_path, basis_path, out_path, csv, global);
        if (tr->parsed())
            return cmd_train(features_path, model_path, alpha, iterations, init_clusters,
                             parallel_gibbs, trace_path, global);
        if (ev->parsed())
            return cmd_eval_abx(model_path, features_path, corpus_path, out_path,
                                battery_csv_path, triple_weighted, cross_speaker, global);
        if (rn->parsed()) {
            if (config_path.empty() && manifest_path.empty())
                throw ConfigError("run needs --config or --manifest");
            return cmd_run(config_path, manifest_path, out_path, global);
        }
        if (cp->parsed()) return cmd_compare(run_a, run_b, out_path);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
