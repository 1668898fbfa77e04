// Acceptance suite: one line per criterion, [PASS]/[FAIL], nonzero exit on
// any failure. Criteria are selected by number on the command line; no
// arguments runs everything.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "avphon/abx.hpp"
#include "avphon/audio_features.hpp"
#include "avphon/eigenmouth.hpp"
#include "avphon/experiment.hpp"
#include "avphon/fusion.hpp"
#include "avphon/synth.hpp"
#include "../oracles.hpp"

using namespace avphon;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

fs::path work_dir() {
    const auto dir = fs::current_path() / "acceptance_work";
    fs::create_directories(dir);
    return dir;
}

std::string format(double v) {
    std::ostringstream out;
    out.precision(4);
    out << v;
    return out.str();
}

// --- corpora ---------------------------------------------------------------

// Partially complementary channels: vowel pair a/o and consonant pair p/t are
// audibly close but visually distinct; the remaining contrasts are audibly
// clear. Visual information should lift the close pairs (criteria 5-6).
const char* kMatrixCorpusSpec = R"(
[corpus]
mode = waveform
seed = 414243
utterances_pretrain = 8
utterances_train = 24
utterances_test = 30
phones_per_utterance = 9
word_len = 3
amplitude = 0.35
audio_noise = 0.012
formant_jitter = 0.022
pixel_jitter = 5
transition_ms = 24

[phoneme a]
class = vowel
formants = 640 1150
formant_amps = 1.0 0.7
duration_ms = 100
duration_jitter_ms = 18
mouth_width = 0.92
mouth_aperture = 0.85

[phoneme e]
class = vowel
formants = 420 2150
formant_amps = 1.0 0.7
duration_ms = 100
duration_jitter_ms = 18
mouth_width = 0.82
mouth_aperture = 0.32

[phoneme o]
class = vowel
formants = 610 1080
formant_amps = 1.0 0.7
duration_ms = 100
duration_jitter_ms = 18
mouth_width = 0.40
mouth_aperture = 0.52

[phoneme p]
class = consonant
formants = 300 2350
formant_amps = 1.0 0.5
duration_ms = 88
duration_jitter_ms = 12
mouth_width = 0.30
mouth_aperture = 0.12

[phoneme t]
class = consonant
formants = 318 2430
formant_amps = 1.0 0.5
duration_ms = 88
duration_jitter_ms = 12
mouth_width = 0.72
mouth_aperture = 0.20

[phoneme k]
class = consonant
formants = 1350 3050
formant_amps = 1.0 0.5
duration_ms = 88
duration_jitter_ms = 12
mouth_width = 0.55
mouth_aperture = 0.62
)";

// Overlapping audio categories disambiguated by the visual channel: the
// vowel pair i1/i2 is nearly identical audibly but extreme visually
// (criterion 7, the learning-transfer comparison).
const char* kTransferCorpusSpec = R"(
[corpus]
mode = waveform
seed = 515253
utterances_pretrain = 8
utterances_train = 24
utterances_test = 30
phones_per_utterance = 9
word_len = 3
amplitude = 0.35
audio_noise = 0.012
formant_jitter = 0.02
pixel_jitter = 5
transition_ms = 24

[phoneme i1]
class = vowel
formants = 360 910
formant_amps = 1.0 0.7
duration_ms = 100
duration_jitter_ms = 18
mouth_width = 0.95
mouth_aperture = 0.9

[phoneme i2]
class = vowel
formants = 374 948
formant_amps = 1.0 0.7
duration_ms = 100
duration_jitter_ms = 18
mouth_width = 0.28
mouth_aperture = 0.14

[phoneme u]
class = vowel
formants = 620 1900
formant_amps = 1.0 0.7
duration_ms = 100
duration_jitter_ms = 18
mouth_width = 0.55
mouth_aperture = 0.5

[phoneme s]
class = consonant
formants = 1650 3150
formant_amps = 1.0 0.5
duration_ms = 88
duration_jitter_ms = 12
mouth_width = 0.7
mouth_aperture = 0.3

[phoneme f]
class = consonant
formants = 820 2250
formant_amps = 1.0 0.5
duration_ms = 88
duration_jitter_ms = 12
mouth_width = 0.4
mouth_aperture = 0.55
)";

const char* kReproCorpusSpec = R"(
[corpus]
mode = feature
seed = 616263
utterances_train = 10
utterances_test = 12
phones_per_utterance = 7
feature_audio_dim = 3
feature_visual_dim = 2

[phoneme a]
class = vowel
duration_ms = 90
duration_jitter_ms = 15
audio_mean = 2.0 0.0 -1.0
audio_std = 0.25
visual_mean = 2.0 0.0
visual_std = 0.25

[phoneme e]
class = vowel
duration_ms = 90
duration_jitter_ms = 15
audio_mean = -2.0 0.6 1.0
audio_std = 0.25
visual_mean = -2.0 1.0
visual_std = 0.25
)";

fs::path ensure_corpus(const char* spec_text, const std::string& name) {
    const auto dir = work_dir() / name;
    if (fs::exists(dir / ".complete")) return dir;
    fs::remove_all(dir);
    auto spec = synth::SynthSpec::parse(io::ConfigFile::parse_text(spec_text));
    synth::generate(spec, dir);
    std::ofstream(dir / ".complete") << "ok\n";
    return dir;
}

exp::ExperimentConfig matrix_config(const fs::path& corpus, const std::string& train,
                                    const std::string& test) {
    const std::string text = "[experiment]\nname = " + train + "-" + test +
                             "\ncorpus = " + corpus.string() + "\ntrain_modality = " + train +
                             "\ntest_modality = " + test +
                             "\nreplicates = 10\nbase_seed = 900\niterations = 150\n"
                             "init_clusters = 10\npca_components = 4\nsnr_db = 5\n"
                             "noise_seed = 77\n";
    return exp::ExperimentConfig::parse(io::ConfigFile::parse_text(text), fs::path("."));
}

exp::RunResult cached_run(const exp::ExperimentConfig& config, const fs::path& out) {
    exp::RunOptions options;
    options.threads = 2;
    if (!fs::exists(out / "reports" / "summary.json")) {
        fs::remove_all(out);
        return exp::run_experiment(config, out, options);
    }
    exp::RunResult result;
    result.out_dir = out;
    for (int r = 0;; ++r) {
        char suffix[16];
        std::snprintf(suffix, sizeof suffix, "%03d", r);
        const auto path = out / "reports" / ("report_" + std::string(suffix) + ".json");
        if (!fs::exists(path)) break;
        result.reports.push_back(abx::load_report_json(path));
        result.overall_scores.push_back(result.reports.back().overall);
    }
    double total = 0.0;
    for (double s : result.overall_scores) total += s;
    result.mean = total / static_cast<double>(result.overall_scores.size());
    return result;
}

struct PairwiseComparison {
    double mean_hi = 0.0;
    double mean_lo = 0.0;
    double p = 1.0;
    bool significant_in_order(double alpha = 0.05) const {
        return mean_hi > mean_lo && p < alpha;
    }
};

PairwiseComparison compare(const exp::RunResult& hi, const exp::RunResult& lo) {
    PairwiseComparison c;
    c.mean_hi = hi.mean;
    c.mean_lo = lo.mean;
    c.p = abx::mann_whitney_u(hi.overall_scores, lo.overall_scores).p;
    return c;
}

// --- criteria ---------------------------------------------------------------

bool criterion_1(std::string& detail) {
    const auto start = Clock::now();
    std::mt19937_64 rng(20240601);
    double max_rel = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const int support = 2 + static_cast<int>(rng() % 4);  // up to 5 clusters
        const int n = 1 + static_cast<int>(rng() % 6);
        const int m = 1 + static_cast<int>(rng() % 6);
        abx::PosteriorToken s1, s2;
        for (int i = 0; i < n; ++i)
            s1.frames.push_back(oracles::random_distribution(support, rng));
        for (int j = 0; j < m; ++j)
            s2.frames.push_back(oracles::random_distribution(support, rng));
        const double mine = abx::dtw_dissimilarity(s1, s2);
        const auto oracle = oracles::exhaustive_dtw(s1.frames, s2.frames);
        const double scale = std::max(1.0, std::abs(oracle.min_total_over_length));
        max_rel = std::max(max_rel,
                           std::abs(mine - oracle.min_total_over_length) / scale);
    }
    const double elapsed = seconds_since(start);
    detail = "max rel err " + format(max_rel) + " over 200 pairs, " + format(elapsed) + " s";
    return max_rel < 1e-10 && elapsed < 10.0;
}

bool criterion_2(std::string& detail) {
    std::mt19937_64 rng(20240602);
    std::normal_distribution<double> g;
    double max_rel = 0.0;
    bool marginal_exact = true;
    for (int trial = 0; trial < 100; ++trial) {
        const int d = 2 + static_cast<int>(rng() % 7);  // up to 8 dims
        const int k = 1 + static_cast<int>(rng() % 5);
        const auto model = oracles::random_model(d, k, rng);
        Vec x(d);
        for (int j = 0; j < d; ++j) x[j] = 3.0 * g(rng);

        const Vec mine = dpgmm::posterior(model, x);
        const Vec reference = oracles::brute_force_posterior(model, x);
        for (int j = 0; j < k; ++j)
            max_rel = std::max(max_rel, std::abs(mine[j] - reference[j]) /
                                            std::max(reference[j], 1e-300));

        std::vector<int> observed;
        for (int j = 0; j < d; ++j)
            if (rng() % 2 == 0) observed.push_back(j);
        if (observed.empty()) observed.push_back(d - 1);
        Vec x_obs(static_cast<Eigen::Index>(observed.size()));
        for (std::size_t j = 0; j < observed.size(); ++j)
            x_obs[static_cast<Eigen::Index>(j)] = x[observed[j]];

        dpgmm::DpgmmModel sliced;
        sliced.layout = model.layout;
        for (const auto& c : model.clusters) {
            dpgmm::GaussianCluster s;
            s.weight = c.weight;
            const auto msize = static_cast<Eigen::Index>(observed.size());
            s.mean.resize(msize);
            s.covariance.resize(msize, msize);
            for (Eigen::Index i = 0; i < msize; ++i) {
                s.mean[i] = c.mean[observed[static_cast<std::size_t>(i)]];
                for (Eigen::Index jj = 0; jj < msize; ++jj)
                    s.covariance(i, jj) = c.covariance(observed[static_cast<std::size_t>(i)],
                                                       observed[static_cast<std::size_t>(jj)]);
            }
            sliced.clusters.push_back(std::move(s));
        }
        const Vec marginal_mine = dpgmm::posterior_marginal(model, x_obs, observed);
        const Vec marginal_ref = oracles::brute_force_posterior(sliced, x_obs);
        for (int j = 0; j < k; ++j)
            max_rel = std::max(max_rel, std::abs(marginal_mine[j] - marginal_ref[j]) /
                                            std::max(marginal_ref[j], 1e-300));

        std::vector<int> all(static_cast<std::size_t>(d));
        std::iota(all.begin(), all.end(), 0);
        if (dpgmm::posterior_marginal(model, x, all) != dpgmm::posterior(model, x))
            marginal_exact = false;
    }
    detail = "max rel err " + format(max_rel) + ", all-dims marginal exact=" +
             (marginal_exact ? "yes" : "no");
    return max_rel < 1e-10 && marginal_exact;
}

bool criterion_3(std::string& detail) {
    std::mt19937_64 rng(20240603);
    double worst_mass = 0.0;
    bool equation_ok = true;
    for (int trial = 0; trial < 1000; ++trial) {
        const int clusters = static_cast<int>(rng() % 15);
        std::vector<double> counts;
        long total = 0;
        for (int k = 0; k < clusters; ++k) {
            const int c = 1 + static_cast<int>(rng() % 80);
            counts.push_back(c);
            total += c;
        }
        const double alpha = 0.05 + (rng() % 1000) / 200.0;
        const int n = static_cast<int>(total) + 1;
        const Vec probs = dpgmm::crp_assignment_probs(n, counts, alpha);
        worst_mass = std::max(worst_mass, std::abs(probs.sum() - 1.0));
        for (std::size_t k = 0; k < counts.size(); ++k)
            if (std::abs(probs[static_cast<Eigen::Index>(k)] -
                         counts[k] / (n - 1 + alpha)) > 1e-12)
                equation_ok = false;
        if (std::abs(probs[static_cast<Eigen::Index>(counts.size())] -
                     alpha / (n - 1 + alpha)) > 1e-12)
            equation_ok = false;
    }
    const Vec first = dpgmm::crp_assignment_probs(1, {}, 1.0);
    const bool first_ok = first.size() == 1 && first[0] == 1.0;
    detail = "mass error " + format(worst_mass) + ", first point new-cluster prob " +
             format(first[0]);
    return worst_mass < 1e-12 && equation_ok && first_ok;
}

bool criterion_4(std::string& detail) {
    const auto start = Clock::now();
    std::mt19937_64 data_rng(20240604);
    std::normal_distribution<double> g;
    const double sigma = 1.0, separation = 10.0;
    std::vector<Vec> means(3, Vec::Zero(2));
    means[1][0] = separation;
    means[2][1] = separation;
    Mat pts(900, 2);
    Eigen::Index row = 0;
    for (const auto& mean : means)
        for (int i = 0; i < 300; ++i, ++row)
            pts.row(row) << mean[0] + sigma * g(data_rng), mean[1] + sigma * g(data_rng);

    const auto prior = dpgmm::NiwPrior::from_data(pts);
    int recovered = 0;
    for (uint64_t seed = 0; seed < 10; ++seed) {
        dpgmm::DpgmmConfig config;
        config.alpha = 1.0;
        config.iterations = 300;
        config.init_clusters = 10;
        config.seed = seed;
        const auto model = dpgmm::fit(pts, ModalityLayout{2, 0}, prior, config);
        if (model.num_clusters() != 3) continue;
        double worst = 0.0;
        for (const auto& c : model.clusters) {
            double best = 1e18;
            for (const auto& mean : means) best = std::min(best, (c.mean - mean).norm());
            worst = std::max(worst, best);
        }
        if (worst < 0.2 * sigma) ++recovered;
    }
    const double elapsed = seconds_since(start);
    detail = std::to_string(recovered) + "/10 seeds recovered K=3 within 0.2 sigma, " +
             format(elapsed) + " s";
    return recovered >= 9 && elapsed < 120.0;
}

bool criterion_5(std::string& detail) {
    const auto start = Clock::now();
    const auto corpus = ensure_corpus(kMatrixCorpusSpec, "matrix_corpus");
    const auto av_av = cached_run(matrix_config(corpus, "AV", "AV"), work_dir() / "run_av_av");
    const auto a_a = cached_run(matrix_config(corpus, "A", "A"), work_dir() / "run_a_a");
    const auto c = compare(av_av, a_a);
    const double elapsed = seconds_since(start);
    detail = "AV-AV " + format(c.mean_hi) + " vs A-A " + format(c.mean_lo) + ", p=" +
             format(c.p) + ", " + format(elapsed) + " s";
    return c.significant_in_order() && elapsed < 900.0;
}

bool criterion_6(std::string& detail) {
    const auto corpus = ensure_corpus(kMatrixCorpusSpec, "matrix_corpus");
    const auto a_a = cached_run(matrix_config(corpus, "A", "A"), work_dir() / "run_a_a");
    const auto a_n = cached_run(matrix_config(corpus, "A", "N"), work_dir() / "run_a_n");
    const auto av_av = cached_run(matrix_config(corpus, "AV", "AV"), work_dir() / "run_av_av");
    const auto av_nv = cached_run(matrix_config(corpus, "AV", "NV"), work_dir() / "run_av_nv");

    const auto clean_beats_noisy_audio = compare(a_a, a_n);        // comparison 7
    const auto clean_beats_noisy_av = compare(av_av, av_nv);       // comparison 6
    const auto visual_counteracts_noise = compare(av_nv, a_n);     // comparison 4
    detail = "A-A " + format(clean_beats_noisy_audio.mean_hi) + " > A-N " +
             format(clean_beats_noisy_audio.mean_lo) + " (p=" +
             format(clean_beats_noisy_audio.p) + "); AV-AV " +
             format(clean_beats_noisy_av.mean_hi) + " > AV-NV " +
             format(clean_beats_noisy_av.mean_lo) + " (p=" + format(clean_beats_noisy_av.p) +
             "); AV-NV " + format(visual_counteracts_noise.mean_hi) + " > A-N " +
             format(visual_counteracts_noise.mean_lo) + " (p=" +
             format(visual_counteracts_noise.p) + ")";
    return clean_beats_noisy_audio.significant_in_order() &&
           clean_beats_noisy_av.significant_in_order() &&
           visual_counteracts_noise.significant_in_order();
}

bool criterion_7(std::string& detail) {
    const auto start = Clock::now();
    const auto corpus = ensure_corpus(kTransferCorpusSpec, "transfer_corpus");
    const auto av_a = cached_run(matrix_config(corpus, "AV", "A"), work_dir() / "run_t_av_a");
    const auto a_a = cached_run(matrix_config(corpus, "A", "A"), work_dir() / "run_t_a_a");
    const auto c = compare(av_a, a_a);
    const double elapsed = seconds_since(start);
    detail = "AV-A " + format(c.mean_hi) + " vs A-A " + format(c.mean_lo) + ", p=" +
             format(c.p) + ", " + format(elapsed) + " s";
    if (c.significant_in_order()) return true;
    // Fallback bound stated by the criterion itself.
    detail += " (significance not reached; fallback bound AV-A >= A-A - 0.01 " +
              std::string(c.mean_hi >= c.mean_lo - 0.01 ? "holds" : "violated") + ")";
    return c.mean_hi >= c.mean_lo - 0.01;
}

bool criterion_8(std::string& detail) {
    const double value = abx::relative_improvement(0.860, 0.833);
    detail = "relative_improvement(0.860, 0.833) = " + format(value);
    return std::abs(value - 0.081) <= 0.002;
}

bool criterion_9(std::string& detail) {
    std::mt19937_64 rng(20240609);
    std::normal_distribution<double> g;
    int failures = 0;
    std::string failing;

    // JS symmetry and nonnegativity.
    for (int trial = 0; trial < 150; ++trial) {
        const int support = 2 + static_cast<int>(rng() % 7);
        const Vec p = oracles::random_distribution(support, rng, true);
        const Vec q = oracles::random_distribution(support, rng, true);
        if (abx::js_divergence(p, q) != abx::js_divergence(q, p) ||
            abx::js_divergence(p, q) < 0.0 || abx::js_divergence(p, p) != 0.0) {
            ++failures;
            failing += " js";
            break;
        }
    }

    // Posterior normalization.
    for (int trial = 0; trial < 150; ++trial) {
        const int d = 2 + static_cast<int>(rng() % 6);
        const auto model = oracles::random_model(d, 1 + static_cast<int>(rng() % 5), rng);
        Vec x(d);
        for (int j = 0; j < d; ++j) x[j] = 4.0 * g(rng);
        const Vec probs = dpgmm::posterior(model, x);
        if (std::abs(probs.sum() - 1.0) > 1e-9 || probs.minCoeff() < 0.0) {
            ++failures;
            failing += " posterior-normalization";
            break;
        }
    }

    // Concat/drop round trip.
    for (int trial = 0; trial < 120; ++trial) {
        const int count = 1 + static_cast<int>(rng() % 12);
        const int a = 1 + static_cast<int>(rng() % 8);
        const int v = 1 + static_cast<int>(rng() % 8);
        FeatureSequence audio_seq, visual_seq;
        audio_seq.layout = ModalityLayout{a, 0};
        visual_seq.layout = ModalityLayout{0, v};
        audio_seq.utterance = visual_seq.utterance = "u";
        for (int i = 0; i < count; ++i) {
            audio_seq.grid.centers.push_back(i * 0.01 + 0.0125);
            visual_seq.grid.centers.push_back(i * 0.01 + 0.0125);
        }
        audio_seq.vectors = Mat::Random(count, a);
        visual_seq.vectors = Mat::Random(count, v);
        const auto multi = fusion::concat_modalities(audio_seq, visual_seq);
        const auto back_a = fusion::drop_modality(multi, fusion::Modality::Audio);
        const auto back_v = fusion::drop_modality(multi, fusion::Modality::Visual);
        if (back_a.vectors != audio_seq.vectors || back_v.vectors != visual_seq.vectors ||
            multi.layout.audio_dim + multi.layout.visual_dim != multi.dims()) {
            ++failures;
            failing += " concat-drop";
            break;
        }
    }

    // PCA orthonormality and determinism.
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 8 + static_cast<int>(rng() % 20);
        const int d = 5 + static_cast<int>(rng() % 15);
        const int k = 1 + static_cast<int>(rng() % 4);
        Mat data(n, d);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) data(i, j) = g(rng) * (1.0 + j % 3);
        const auto p1 = vision::fit_pca(data, k);
        const auto p2 = vision::fit_pca(data, k);
        const Mat gram = p1.components.transpose() * p1.components;
        if ((gram - Mat::Identity(k, k)).cwiseAbs().maxCoeff() > 1e-6 ||
            p1.components != p2.components) {
            ++failures;
            failing += " pca";
            break;
        }
    }

    // Delta linearity.
    for (int trial = 0; trial < 120; ++trial) {
        const int T = 1 + static_cast<int>(rng() % 12);
        Mat x = Mat::Random(T, 4), y = Mat::Random(T, 4);
        const double a = g(rng), b = g(rng);
        const auto [dx, dx2] = audio::compute_deltas(x);
        const auto [dy, dy2] = audio::compute_deltas(y);
        const auto [dz, dz2] = audio::compute_deltas(Mat(a * x + b * y));
        if ((dz - (a * dx + b * dy)).cwiseAbs().maxCoeff() > 1e-10 ||
            (dz2 - (a * dx2 + b * dy2)).cwiseAbs().maxCoeff() > 1e-10) {
            ++failures;
            failing += " delta-linearity";
            break;
        }
    }

    // SNR tolerance and bit reproducibility.
    for (int trial = 0; trial < 100; ++trial) {
        AudioSignal s;
        s.sample_rate = 16000;
        s.samples.resize(16000);
        std::mt19937_64 srng(trial);
        std::normal_distribution<double> sg;
        for (Eigen::Index i = 0; i < s.samples.size(); ++i) s.samples[i] = sg(srng);
        const double snr = (trial % 4) * 5.0;
        const auto noisy = audio::add_noise(s, snr, 1000 + static_cast<uint64_t>(trial));
        const auto again = audio::add_noise(s, snr, 1000 + static_cast<uint64_t>(trial));
        const Vec noise = noisy.samples - s.samples;
        const double realized = 10.0 * std::log10((s.samples.squaredNorm() / s.samples.size()) /
                                                  (noise.squaredNorm() / noise.size()));
        if (std::abs(realized - snr) > 0.5 || noisy.samples != again.samples) {
            ++failures;
            failing += " snr";
            break;
        }
    }

    // score_triple complementarity.
    for (int trial = 0; trial < 120; ++trial) {
        auto token = [&](int len) {
            abx::PosteriorToken t;
            for (int i = 0; i < len; ++i)
                t.frames.push_back(oracles::random_distribution(4, rng));
            return t;
        };
        const auto a = token(1 + static_cast<int>(rng() % 5));
        const auto b = token(1 + static_cast<int>(rng() % 5));
        const auto x = token(1 + static_cast<int>(rng() % 5));
        if (abx::score_triple(a, b, x) + abx::score_triple(b, a, x) != 1.0) {
            ++failures;
            failing += " score-complementarity";
            break;
        }
    }

    // Aggregation arithmetic: random per-contrast construction.
    for (int trial = 0; trial < 100; ++trial) {
        abx::ClassMap class_map{{"a", abx::PhonemeClass::Vowel},
                                {"e", abx::PhonemeClass::Vowel},
                                {"o", abx::PhonemeClass::Vowel}};
        std::vector<abx::PhoneToken> tokens;
        auto add = [&](const std::string& label, double at) {
            abx::PhoneToken t;
            t.utterance = "u";
            t.label = label;
            t.start = at;
            t.end = at + 0.05;
            t.prev_label = "t";
            t.next_label = "k";
            t.speaker = "s";
            tokens.push_back(t);
        };
        const int na = 2 + static_cast<int>(rng() % 3);
        const int ne = 2 + static_cast<int>(rng() % 3);
        for (int i = 0; i < na; ++i) add("a", i * 0.1);
        for (int i = 0; i < ne; ++i) add("e", 1.0 + i * 0.1);
        const auto battery = abx::build_battery(tokens, class_map);
        std::vector<double> scores;
        double total = 0.0;
        for (std::size_t i = 0; i < battery.triples.size(); ++i) {
            const double s = (rng() % 3) / 2.0;
            scores.push_back(s);
            total += s;
        }
        const auto report = abx::aggregate(battery, class_map, scores);
        const double expected = total / static_cast<double>(scores.size());
        if (std::abs(report.overall - expected) > 1e-12 || report.contrasts.size() != 1) {
            ++failures;
            failing += " aggregation";
            break;
        }
    }

    detail = failures == 0 ? "8 invariant families, >=100 cases each"
                           : "failing families:" + failing;
    return failures == 0;
}

bool criterion_10(std::string& detail) {
    const auto corpus = ensure_corpus(kReproCorpusSpec, "repro_corpus");
    const std::string text = "[experiment]\nname = repro\ncorpus = " + corpus.string() +
                             "\ntrain_modality = AV\ntest_modality = A\nreplicates = 3\n"
                             "base_seed = 42\niterations = 40\ninit_clusters = 6\n";
    const auto config =
        exp::ExperimentConfig::parse(io::ConfigFile::parse_text(text), fs::path("."));
    exp::RunOptions options;
    options.sequential = true;

    const auto out1 = work_dir() / "repro_run1";
    const auto out2 = work_dir() / "repro_run2";
    fs::remove_all(out1);
    fs::remove_all(out2);
    exp::run_experiment(config, out1, options);
    exp::run_from_manifest(out1 / "manifest.json", out2, options);

    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)), {});
    };
    int compared = 0;
    for (const auto& entry : fs::recursive_directory_iterator(out1)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), out1);
        if (rel == "manifest.json") continue;  // timestamp lives there
        ++compared;
        if (slurp(entry.path()) != slurp(out2 / rel)) {
            detail = "file differs between runs: " + rel.string();
            return false;
        }
    }
    detail = std::to_string(compared) + " result files byte-identical across re-execution";
    return compared > 0;
}

struct Criterion {
    int id;
    const char* name;
    std::function<bool(std::string&)> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {1, "DTW equals exhaustive path enumeration", criterion_1},
        {2, "posterior and marginal match brute-force densities", criterion_2},
        {3, "CRP assignment probabilities", criterion_3},
        {4, "DPGMM recovers 3 well-separated clusters", criterion_4},
        {5, "AV-AV beats A-A on a complementary corpus", criterion_5},
        {6, "noise comparisons: A-N < A-A, AV-NV < AV-AV, AV-NV > A-N", criterion_6},
        {7, "AV-A beats A-A when video disambiguates audio", criterion_7},
        {8, "relative improvement arithmetic", criterion_8},
        {9, "cross-module invariant property suite", criterion_9},
        {10, "manifest re-execution is byte-identical", criterion_10},
    };

    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failures = 0;
    for (const auto& criterion : criteria) {
        if (!selected.empty() && !selected.count(criterion.id)) continue;
        std::string detail;
        bool ok = false;
        try {
            ok = criterion.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << criterion.id << ": "
                  << criterion.name << " — " << detail << "\n";
        if (!ok) ++failures;
    }
    return failures;
}
