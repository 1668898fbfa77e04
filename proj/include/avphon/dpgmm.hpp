#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "avphon/types.hpp"

namespace avphon::dpgmm {

/// Normal-Inverse-Wishart conjugate prior over a Gaussian's mean and
/// covariance.
struct NiwPrior {
    Vec mean0;
    double kappa0 = 1.0;
    double nu0 = 0.0;
    Mat psi0;

    int dims() const { return static_cast<int>(mean0.size()); }
    void validate() const;

    /// Weakly informative, scale-adaptive default: mean0 = data mean,
    /// kappa0 = 1, nu0 = d + 3, psi0 = diag of per-dimension data variances.
    static NiwPrior from_data(const Eigen::Ref<const Mat>& data);
};

struct DpgmmConfig {
    double alpha = 1.0;
    int iterations = 1500;
    int init_clusters = 10;
    uint64_t seed = 0;
    bool parallel = false;  // relaxes the determinism contract; labeled in the trace
    int threads = 0;        // 0 = hardware concurrency (parallel mode only)
    // Extraction drops sampler froth: clusters below this weight (transient
    // singletons alive at the final sweep) are pruned, weights renormalized.
    double min_cluster_weight = 0.002;
};

struct GaussianCluster {
    double weight = 0.0;
    Vec mean;
    Mat covariance;
};

struct TraceRow {
    int sweep = 0;
    int num_clusters = 0;
    double joint_log_prob = 0.0;
};

struct DpgmmModel {
    std::vector<GaussianCluster> clusters;
    ModalityLayout layout;
    DpgmmConfig config;
    std::vector<TraceRow> trace;
    std::string sampler_mode;  // "sequential" or "parallel"

    int dims() const { return clusters.empty() ? 0 : static_cast<int>(clusters[0].mean.size()); }
    int num_clusters() const { return static_cast<int>(clusters.size()); }
};

/// Per-window probability distribution over cluster identities.
using ClusterPosterior = Vec;

/// Chinese Restaurant Process prior over assignments for point n given
/// per-cluster occupancies: existing cluster k gets n_k/(n-1+alpha), a new
/// cluster gets alpha/(n-1+alpha). Returned vector has K+1 entries, the new
/// cluster last. Requires sum(counts) == n-1.
Vec crp_assignment_probs(int n, const std::vector<double>& counts, double alpha);

/// Collapsed Gibbs sampler over NIW-conjugate Gaussian components. Each sweep
/// resamples every point's assignment from the CRP prior times the cluster's
/// posterior-predictive Student-t density; the returned model carries the
/// final sweep's posterior-mean parameters and weights n_k/(n+alpha),
/// renormalized over the discovered clusters.
DpgmmModel fit(const std::vector<FeatureSequence>& data, const NiwPrior& prior,
               const DpgmmConfig& config);
DpgmmModel fit(const Eigen::Ref<const Mat>& points, const ModalityLayout& layout,
               const NiwPrior& prior, const DpgmmConfig& config);

/// Precomputed per-cluster Cholesky factors for repeated posterior queries.
/// Immutable once built; safe to share across threads.
class PosteriorEvaluator {
public:
    explicit PosteriorEvaluator(const DpgmmModel& model);

    ClusterPosterior operator()(const Eigen::Ref<const Vec>& x) const;
    int dims() const { return dims_; }

private:
    int dims_;
    std::vector<double> log_weight_;
    std::vector<Vec> mean_;
    std::vector<Mat> chol_;       // lower factors
    std::vector<double> log_norm_;  // -(d log 2pi + log|cov|)/2
};

/// probs_k proportional to weight_k * N(x; mean_k, cov_k), in log space.
ClusterPosterior posterior(const DpgmmModel& model, const Eigen::Ref<const Vec>& x);

/// Restriction of every cluster to a subset of dimensions (the Gaussian
/// marginal); weights unchanged.
DpgmmModel marginal_model(const DpgmmModel& model, const std::vector<int>& observed);

/// Posterior from a partial observation: the marginal Gaussian over the
/// observed dimensions only. observed must be non-empty, strictly
/// increasing, and within range.
ClusterPosterior posterior_marginal(const DpgmmModel& model,
                                    const Eigen::Ref<const Vec>& x_obs,
                                    const std::vector<int>& observed);

void serialize(const DpgmmModel& model, std::ostream& out);
DpgmmModel deserialize(std::istream& in);
void save_model(const std::filesystem::path& path, const DpgmmModel& model);
DpgmmModel load_model(const std::filesystem::path& path);

/// Training trace as CSV (sweep,num_clusters,joint_log_prob) with a
/// sampler-mode comment line.
void save_trace_csv(const std::filesystem::path& path, const DpgmmModel& model);

}  // namespace avphon::dpgmm
