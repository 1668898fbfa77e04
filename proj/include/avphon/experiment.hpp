#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "avphon/abx.hpp"
#include "avphon/config_file.hpp"
#include "avphon/dpgmm.hpp"
#include "avphon/eigenmouth.hpp"
#include "avphon/synth.hpp"

namespace avphon::exp {

enum class TrainModality { A, V, AV };
enum class TestModality { A, V, AV, N, NV };

TrainModality parse_train_modality(const std::string& s);
TestModality parse_test_modality(const std::string& s);
std::string to_string(TrainModality m);
std::string to_string(TestModality m);

struct ExperimentConfig {
    std::string name = "experiment";
    std::filesystem::path corpus;  // root containing pretrain/ train/ test/
    std::filesystem::path train_dir, test_dir, pretrain_dir;  // derived or overridden
    TrainModality train = TrainModality::A;
    TestModality test = TestModality::A;
    int replicates = 10;
    uint64_t base_seed = 1;
    int pca_components = 4;
    double snr_db = 5.0;  // noisy test cases only; training audio is never noised
    uint64_t noise_seed = 7;
    double alpha = 1.0;
    int iterations = 1500;
    int init_clusters = 10;
    bool standardize = false;
    bool triple_weighted = false;
    bool cross_speaker = false;
    int pca_max_windows = 2000;  // subsampling cap for pretraining frames
    std::string config_text;

    static ExperimentConfig parse(const io::ConfigFile& config,
                                  const std::filesystem::path& base_dir);
    /// Rejects invalid modality plans (test dimensions must be a subset of
    /// train dimensions) and overlapping split directories.
    void validate() const;
};

struct RunOptions {
    int threads = 0;       // 0 = hardware concurrency
    bool sequential = false;  // force single-threaded, fully deterministic staging
};

struct RunResult {
    std::vector<abx::ScoreReport> reports;  // one per replicate
    std::vector<double> overall_scores;
    double mean = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    std::filesystem::path out_dir;
};

/// Full pipeline: PCA pretraining (when visual features are used), feature
/// extraction, one DPGMM fit per replicate, ABX scoring, and summary/manifest
/// emission under out_dir. Stage failures carry the stage name and utterance.
RunResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                         const RunOptions& options = {});

/// Re-executes a run from its manifest; byte-identical result files in
/// sequential mode.
RunResult run_from_manifest(const std::filesystem::path& manifest_path,
                            const std::filesystem::path& out_dir,
                            const RunOptions& options = {});

struct ComparisonRecord {
    double mean_a = 0.0;
    double mean_b = 0.0;
    double absolute_difference = 0.0;
    std::optional<double> relative_improvement;  // empty when baseline is at chance
    double u_statistic = 0.0;
    double p_value = 1.0;
    bool battery_match = true;
    std::vector<double> scores_a;
    std::vector<double> scores_b;
};

/// Compares two run directories (set a vs baseline b) over per-replicate
/// overall scores. A battery mismatch is flagged, not fatal.
ComparisonRecord compare_runs(const std::filesystem::path& run_a,
                              const std::filesystem::path& run_b);

void save_comparison_json(const std::filesystem::path& path, const ComparisonRecord& record);

}  // namespace avphon::exp
