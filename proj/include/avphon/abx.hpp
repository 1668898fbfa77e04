#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "avphon/dpgmm.hpp"
#include "avphon/types.hpp"

namespace avphon::abx {

using dpgmm::ClusterPosterior;

enum class PhonemeClass { Vowel, Consonant };

using ClassMap = std::map<std::string, PhonemeClass>;

/// Reserved context label for tokens at utterance edges.
inline const std::string kEdgeContext = "#";

/// One phoneme-labeled interval of an utterance together with its phonemic
/// context (the adjacent phoneme labels, cross-word included).
struct PhoneToken {
    std::string utterance;
    std::string label;
    double start = 0.0;
    double end = 0.0;
    std::string prev_label = kEdgeContext;
    std::string next_label = kEdgeContext;
    std::string speaker;
};

/// Indices into the token list this battery was built from.
struct AbxTriple {
    int a = 0;
    int b = 0;
    int x = 0;
};

struct AbxBattery {
    std::vector<PhoneToken> tokens;
    std::vector<AbxTriple> triples;
};

struct BatteryOptions {
    bool within_speaker = true;  // cross-speaker triples excluded by default
};

/// All ordered triples with label(a)=label(x) != label(b), matching contexts,
/// same phoneme class (vowel-vowel or consonant-consonant contrasts only),
/// pairwise distinct tokens. Tokens are sorted (utterance, start) first so
/// enumeration order is deterministic. Throws DataError on a label missing
/// from the class map; an empty battery is returned (not an error) when no
/// contrast exists.
AbxBattery build_battery(std::vector<PhoneToken> tokens, const ClassMap& class_map,
                         const BatteryOptions& options = {});

/// Sequence of per-window cluster posteriors for one token.
struct PosteriorToken {
    std::vector<ClusterPosterior> frames;

    bool empty() const { return frames.empty(); }
};

/// Row range [first, last) of the windows whose centers fall inside
/// [start, end).
std::pair<int, int> window_span(const WindowGrid& grid, double start, double end);

/// Symmetrized Kullback-Leibler divergence,
/// 0.5*sum p ln(p/q) + 0.5*sum q ln(q/p), computed after flooring both
/// distributions at `floor` and renormalizing so disjoint supports stay
/// finite. Symmetric, nonnegative, zero iff the floored inputs match.
double js_divergence(const Eigen::Ref<const Vec>& p, const Eigen::Ref<const Vec>& q,
                     double floor = 1e-10);

/// Dynamic time warping with steps {(1,0),(0,1),(1,1)}, anchored at both
/// ends: minimizes the summed js_divergence over matched pairs, then returns
/// that sum divided by the matched-pair count of the optimal path.
double dtw_dissimilarity(const PosteriorToken& s1, const PosteriorToken& s2);

/// 1 if x is strictly closer to a, 0 if strictly closer to b, 0.5 on exact
/// equality of the two dissimilarities.
double score_triple(const PosteriorToken& a, const PosteriorToken& b, const PosteriorToken& x);

struct ContrastScore {
    std::string label_a;  // lexicographically smaller label of the pair
    std::string label_b;
    PhonemeClass phoneme_class = PhonemeClass::Vowel;
    double score = 0.0;
    long triples = 0;
};

struct ScoreReport {
    double overall = 0.0;
    std::vector<ContrastScore> contrasts;  // sorted by (label_a, label_b)
    long num_triples = 0;
    long num_tokens_excluded = 0;  // tokens that spanned zero windows
    bool triple_weighted = false;
    uint64_t battery_hash = 0;
};

/// Per-contrast means over an unordered label pair, then an unweighted mean
/// over contrasts (or triple-weighted with the flag). Throws DataError on an
/// empty battery.
ScoreReport aggregate(const AbxBattery& battery, const ClassMap& class_map,
                      const std::vector<double>& triple_scores, bool triple_weighted = false);

/// Gain over a baseline normalized by the baseline's margin above chance:
/// (test - baseline) / (baseline - 0.5). Throws DataError at baseline 0.5.
double relative_improvement(double test_score, double baseline_score);

struct MannWhitneyResult {
    double u = 0.0;  // U statistic of the first sample (midrank ties)
    double p = 0.0;  // two-tailed
};

/// Rank-sum U with midrank ties. Exact two-tailed p by enumerating all rank
/// arrangements when both samples have at most 10 values, otherwise a normal
/// approximation with tie correction and continuity correction.
MannWhitneyResult mann_whitney_u(const std::vector<double>& sample1,
                                 const std::vector<double>& sample2);

/// Stable identity of a battery (tokens + triples), for cross-run checks.
uint64_t battery_hash(const AbxBattery& battery);

void save_battery_csv(const std::filesystem::path& path, const AbxBattery& battery);
void save_triple_scores_csv(const std::filesystem::path& path, const AbxBattery& battery,
                            const std::vector<double>& scores);
void save_report_json(const std::filesystem::path& path, const ScoreReport& report);
ScoreReport load_report_json(const std::filesystem::path& path);

}  // namespace avphon::abx
