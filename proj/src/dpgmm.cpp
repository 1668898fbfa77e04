#include "avphon/dpgmm.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <limits>
#include <random>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "avphon/cholesky.hpp"
#include "avphon/container.hpp"

namespace avphon::dpgmm {

namespace {

constexpr double kLogPi = 1.1447298858494001741;
constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kCovEigFloorScale = 1e-8;

double log_multigamma(double a, int d) {
    double acc = d * (d - 1) / 4.0 * kLogPi;
    for (int j = 0; j < d; ++j) acc += std::lgamma(a - 0.5 * j);
    return acc;
}

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d4a2645581a193ULL;
    return x ^ (x >> 31);
}

}  // namespace

void NiwPrior::validate() const {
    const int d = dims();
    if (d < 1) throw ConfigError("niw prior has zero dimensions");
    if (!(kappa0 > 0.0)) throw ConfigError("niw kappa0 must be positive");
    if (!(nu0 > d - 1)) throw ConfigError("niw nu0 must exceed d-1");
    if (psi0.rows() != d || psi0.cols() != d) throw ConfigError("niw psi0 shape mismatch");
    if (!psi0.isApprox(psi0.transpose(), 1e-10)) throw ConfigError("niw psi0 not symmetric");
    Eigen::LLT<Mat> llt(psi0);
    if (llt.info() != Eigen::Success) throw ConfigError("niw psi0 not positive definite");
}

NiwPrior NiwPrior::from_data(const Eigen::Ref<const Mat>& data) {
    if (data.rows() < 2) throw DataError("niw prior needs at least 2 data points");
    if (data.cols() < 1) throw DataError("niw prior needs at least 1 dimension");
    NiwPrior prior;
    prior.mean0 = data.colwise().mean();
    prior.kappa0 = 1.0;
    prior.nu0 = static_cast<double>(data.cols()) + 3.0;
    Mat centered = data.rowwise() - prior.mean0.transpose();
    Vec var = centered.array().square().colwise().mean();
    // Guard dimensions with no variance so psi0 stays positive definite.
    const double floor = std::max(var.maxCoeff() * 1e-8, 1e-12);
    prior.psi0 = var.cwiseMax(floor).asDiagonal();
    return prior;
}

Vec crp_assignment_probs(int n, const std::vector<double>& counts, double alpha) {
    if (n < 1) throw ConfigError("crp point index must be >= 1");
    if (!(alpha > 0.0)) throw ConfigError("crp alpha must be positive");
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    if (std::abs(total - (n - 1)) > 1e-9)
        throw DataError("crp count mismatch: occupancies sum to " + std::to_string(total) +
                        " but point index implies " + std::to_string(n - 1));

    const double denom = n - 1 + alpha;
    Vec probs(static_cast<Eigen::Index>(counts.size()) + 1);
    for (std::size_t k = 0; k < counts.size(); ++k)
        probs[static_cast<Eigen::Index>(k)] = counts[k] / denom;
    probs[static_cast<Eigen::Index>(counts.size())] = alpha / denom;
    return probs;
}

namespace {

// Collapsed Gibbs sampler state. Points live as columns of a d x N matrix;
// each cluster keeps its occupancy, feature sum, and the Cholesky factor of
// Q = psi0 + kappa0 m0 m0' + sum_i x_i x_i'. The Student-t predictive uses a
// lazily refreshed downdate of Q by kappa_n m_n m_n'.
class Sampler {
public:
    Sampler(const Eigen::Ref<const Mat>& points, const NiwPrior& prior,
            const DpgmmConfig& config)
        : X_(points.transpose()),
          prior_(prior),
          cfg_(config),
          d_(static_cast<int>(points.cols())),
          N_(static_cast<int>(points.rows())),
          rng_(config.seed) {
        prior_.validate();
        if (!points.allFinite()) throw DataError("dpgmm input contains non-finite values");
        if (d_ < 1) throw DataError("dpgmm input has zero dimensions");
        if (cfg_.iterations < 1) throw ConfigError("dpgmm iterations must be >= 1");
        if (cfg_.init_clusters < 1) throw ConfigError("dpgmm init_clusters must be >= 1");
        if (!(cfg_.alpha > 0.0)) throw ConfigError("dpgmm alpha must be positive");
        if (N_ < cfg_.init_clusters)
            throw DataError("dpgmm needs at least init_clusters points, got " +
                            std::to_string(N_));

        Mat base = prior_.psi0;
        base.selfadjointView<Eigen::Lower>().rankUpdate(prior_.mean0,
                                                        prior_.kappa0);
        base.triangularView<Eigen::StrictlyUpper>() =
            base.triangularView<Eigen::StrictlyLower>().transpose();
        Eigen::LLT<Mat> llt(base);
        if (llt.info() != Eigen::Success)
            throw NumericError("dpgmm prior scale not positive definite");
        Lq_empty_ = llt.matrixL();

        empty_.n = 0;
        empty_.sum = Vec::Zero(d_);
        empty_.Lq = Lq_empty_;
        refresh_cache(empty_);
        logdet_psi0_ = empty_.logdet_psi;

        lgamma_half_.resize(static_cast<std::size_t>(N_) + d_ + 8);
        for (std::size_t i = 0; i < lgamma_half_.size(); ++i) {
            const double dof0 = prior_.nu0 - d_ + 1.0;
            lgamma_half_[i] = std::lgamma(0.5 * (dof0 + static_cast<double>(i)));
        }
    }

    void run(std::vector<TraceRow>& trace) {
        init_assignments();
        trace.clear();
        trace.reserve(static_cast<std::size_t>(cfg_.iterations));
        for (int sweep = 0; sweep < cfg_.iterations; ++sweep) {
            if (cfg_.parallel)
                parallel_sweep(sweep);
            else
                sequential_sweep();
            rebuild_all();
            trace.push_back({sweep + 1, static_cast<int>(clusters_.size()), joint_log_prob()});
        }
    }

    DpgmmModel extract(const ModalityLayout& layout) {
        DpgmmModel model;
        model.layout = layout;
        model.config = cfg_;
        model.sampler_mode = cfg_.parallel ? "parallel" : "sequential";

        double max_n = 0.0;
        for (const auto& c : clusters_) max_n = std::max(max_n, c.n);
        for (auto& c : clusters_) {
            const double weight = c.n / (N_ + cfg_.alpha);
            // Transient singletons alive at the final sweep are froth, not
            // structure; the largest cluster always survives.
            if (weight < cfg_.min_cluster_weight && c.n < max_n) continue;
            refresh_cache(c);
            GaussianCluster g;
            g.weight = weight;
            g.mean = c.m_n;
            Mat psi = c.Lpsi * c.Lpsi.transpose();
            g.covariance = regularize(psi / (c.nu_n - d_ - 1.0));
            model.clusters.push_back(std::move(g));
        }
        double weight_total = 0.0;
        for (const auto& g : model.clusters) weight_total += g.weight;
        for (auto& g : model.clusters) g.weight /= weight_total;
        return model;
    }

private:
    struct Cluster {
        uint64_t id = 0;
        double n = 0.0;
        Vec sum;
        Mat Lq;
        // Predictive cache, rebuilt on demand after membership changes.
        bool cache_ok = false;
        double kappa_n = 0.0, nu_n = 0.0, logdet_psi = 0.0;
        Vec m_n;
        Mat Lpsi;
    };

    // Seed init_clusters clusters on data points by farthest-point traversal
    // (first seed random, each next seed the point farthest from all seeds,
    // per-dimension scaled by the prior) and assign every point to its
    // nearest seed. Random partitions would make every initial cluster a copy
    // of the full data blob, which plain collapsed Gibbs cannot split apart.
    void init_assignments() {
        z_.assign(static_cast<std::size_t>(N_), -1);
        clusters_.clear();
        for (int k = 0; k < cfg_.init_clusters; ++k) new_cluster();

        const Vec inv_scale = prior_.psi0.diagonal().cwiseSqrt().cwiseInverse();
        auto dist2 = [&](int i, int j) {
            return ((X_.col(i) - X_.col(j)).array() * inv_scale.array()).matrix().squaredNorm();
        };

        std::uniform_int_distribution<int> pick(0, N_ - 1);
        std::vector<int> seeds{pick(rng_)};
        Vec nearest = Vec::Constant(N_, std::numeric_limits<double>::infinity());
        while (static_cast<int>(seeds.size()) < cfg_.init_clusters) {
            for (int i = 0; i < N_; ++i)
                nearest[i] = std::min(nearest[i], dist2(i, seeds.back()));
            Eigen::Index farthest = 0;
            nearest.maxCoeff(&farthest);
            seeds.push_back(static_cast<int>(farthest));
        }

        for (int i = 0; i < N_; ++i) {
            int best = 0;
            double best_dist = std::numeric_limits<double>::infinity();
            for (int k = 0; k < cfg_.init_clusters; ++k) {
                const double d = dist2(i, seeds[static_cast<std::size_t>(k)]);
                if (d < best_dist) {
                    best_dist = d;
                    best = k;
                }
            }
            add_point(i, best);
        }
        drop_empty_clusters();
    }

    int new_cluster() {
        Cluster c;
        c.id = next_id_++;
        c.n = 0.0;
        c.sum = Vec::Zero(d_);
        c.Lq = Lq_empty_;
        clusters_.push_back(std::move(c));
        return static_cast<int>(clusters_.size()) - 1;
    }

    void add_point(int i, int k) {
        Cluster& c = clusters_[static_cast<std::size_t>(k)];
        chol_rank1_update(c.Lq, Vec(X_.col(i)));
        c.sum += X_.col(i);
        c.n += 1.0;
        c.cache_ok = false;
        z_[static_cast<std::size_t>(i)] = k;
    }

    // Detach point i from its cluster; returns true if that cluster emptied
    // (caller decides when to erase it).
    bool remove_point(int i) {
        const int k = z_[static_cast<std::size_t>(i)];
        Cluster& c = clusters_[static_cast<std::size_t>(k)];
        try {
            chol_rank1_downdate(c.Lq, Vec(X_.col(i)));
        } catch (const NumericError&) {
            c.n -= 1.0;
            c.sum -= X_.col(i);
            z_[static_cast<std::size_t>(i)] = -1;
            rebuild_cluster(k);
            c.cache_ok = false;
            return c.n <= 0.5;
        }
        c.sum -= X_.col(i);
        c.n -= 1.0;
        c.cache_ok = false;
        z_[static_cast<std::size_t>(i)] = -1;
        return c.n <= 0.5;
    }

    void erase_cluster(int k) {
        clusters_.erase(clusters_.begin() + k);
        for (auto& zi : z_)
            if (zi > k) --zi;
    }

    void drop_empty_clusters() {
        for (int k = static_cast<int>(clusters_.size()) - 1; k >= 0; --k)
            if (clusters_[static_cast<std::size_t>(k)].n <= 0.5) erase_cluster(k);
    }

    void rebuild_cluster(int k) {
        Cluster& c = clusters_[static_cast<std::size_t>(k)];
        Mat q = prior_.psi0;
        q.selfadjointView<Eigen::Lower>().rankUpdate(prior_.mean0, prior_.kappa0);
        for (int i = 0; i < N_; ++i)
            if (z_[static_cast<std::size_t>(i)] == k)
                q.selfadjointView<Eigen::Lower>().rankUpdate(X_.col(i), 1.0);
        q.triangularView<Eigen::StrictlyUpper>() =
            q.triangularView<Eigen::StrictlyLower>().transpose();
        Eigen::LLT<Mat> llt(q);
        if (llt.info() != Eigen::Success)
            throw NumericError("dpgmm cluster scale lost positive definiteness");
        c.Lq = llt.matrixL();
        c.cache_ok = false;
    }

    void rebuild_all() {
        for (int k = 0; k < static_cast<int>(clusters_.size()); ++k) rebuild_cluster(k);
    }

    void refresh_cache(Cluster& c) const {
        c.kappa_n = prior_.kappa0 + c.n;
        c.nu_n = prior_.nu0 + c.n;
        c.m_n = (prior_.kappa0 * prior_.mean0 + c.sum) / c.kappa_n;
        c.Lpsi = c.Lq;
        chol_rank1_downdate(c.Lpsi, Vec(std::sqrt(c.kappa_n) * c.m_n));
        c.logdet_psi = 2.0 * c.Lpsi.diagonal().array().log().sum();
        c.cache_ok = true;
    }

    // Posterior-predictive multivariate Student-t density of x under the
    // cluster's NIW posterior: dof = nu_n - d + 1, scale (kappa_n+1)/(kappa_n
    // dof) * Psi_n.
    double log_predictive(Cluster& c, int i) {
        if (!c.cache_ok) refresh_cache(c);
        const double dof = c.nu_n - d_ + 1.0;
        const double scale = (c.kappa_n + 1.0) / (c.kappa_n * dof);
        Vec residual = X_.col(i) - c.m_n;
        c.Lpsi.triangularView<Eigen::Lower>().solveInPlace(residual);
        const double q = residual.squaredNorm();
        const long n_int = std::lround(c.n);
        const double lg_num = lgamma_half(n_int + d_);
        const double lg_den = lgamma_half(n_int);
        return lg_num - lg_den - 0.5 * d_ * (std::log(dof) + kLogPi) -
               0.5 * (d_ * std::log(scale) + c.logdet_psi) -
               0.5 * (dof + d_) * std::log1p(q / (scale * dof));
    }

    // lgamma((nu0 - d + 1 + offset)/2); offsets are integral because n is.
    double lgamma_half(long offset) const {
        return lgamma_half_[static_cast<std::size_t>(offset)];
    }

    int sample_assignment(int i, std::mt19937_64& rng) {
        const int K = static_cast<int>(clusters_.size());
        // CRP weight n_k (or alpha) times the predictive density, in logs.
        scores_.resize(static_cast<std::size_t>(K) + 1);
        for (int k = 0; k < K; ++k) {
            Cluster& c = clusters_[static_cast<std::size_t>(k)];
            scores_[static_cast<std::size_t>(k)] = std::log(c.n) + log_predictive(c, i);
        }
        scores_[static_cast<std::size_t>(K)] =
            std::log(cfg_.alpha) + log_predictive(empty_, i);

        const double m = *std::max_element(scores_.begin(), scores_.end());
        double total = 0.0;
        for (auto& s : scores_) {
            s = std::exp(s - m);
            total += s;
        }
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        double u = unit(rng) * total;
        for (std::size_t k = 0; k < scores_.size(); ++k) {
            u -= scores_[k];
            if (u <= 0.0) return static_cast<int>(k);
        }
        return static_cast<int>(scores_.size()) - 1;
    }

    void sequential_sweep() {
        order_.resize(static_cast<std::size_t>(N_));
        std::iota(order_.begin(), order_.end(), 0);
        std::shuffle(order_.begin(), order_.end(), rng_);
        for (int i : order_) {
            const int old = z_[static_cast<std::size_t>(i)];
            const bool emptied = remove_point(i);
            if (emptied) erase_cluster(old);
            int k = sample_assignment(i, rng_);
            if (k == static_cast<int>(clusters_.size())) k = new_cluster();
            add_point(i, k);
        }
    }

    // Approximate parallel sweep: every point proposes an assignment against
    // the sweep-start state; proposals are committed sequentially afterward.
    // Clusters are tracked by stable id so commits survive deletions.
    void parallel_sweep(int sweep) {
        for (auto& c : clusters_)
            if (!c.cache_ok) refresh_cache(c);

        const int threads = cfg_.threads > 0
                                ? cfg_.threads
                                : static_cast<int>(std::thread::hardware_concurrency());
        const int T = std::max(1, threads);
        std::vector<uint64_t> proposal(static_cast<std::size_t>(N_));  // cluster id or 0 = new
        std::vector<Cluster> snapshot = clusters_;
        Cluster empty_snapshot = empty_;

        auto worker = [&](int t) {
            std::mt19937_64 rng(splitmix64(cfg_.seed ^ (0x5eedULL + sweep) * 0x9e3779b9ULL) ^
                                splitmix64(static_cast<uint64_t>(t) + 1));
            std::vector<double> scores(snapshot.size() + 1);
            for (int i = t; i < N_; i += T) {
                for (std::size_t k = 0; k < snapshot.size(); ++k) {
                    Cluster& c = snapshot[k];
                    // Snapshot stats still include the point itself; only the
                    // CRP occupancy is corrected for it.
                    const double occupancy =
                        z_[static_cast<std::size_t>(i)] == static_cast<int>(k)
                            ? std::max(c.n - 1.0, 1e-12)
                            : c.n;
                    scores[k] = std::log(occupancy) + log_predictive(c, i);
                }
                scores[snapshot.size()] =
                    std::log(cfg_.alpha) + log_predictive(empty_snapshot, i);
                const double m = *std::max_element(scores.begin(), scores.end());
                double total = 0.0;
                for (auto& s : scores) total += std::exp(s - m);
                std::uniform_real_distribution<double> unit(0.0, 1.0);
                double u = unit(rng) * total;
                std::size_t pick = scores.size() - 1;
                for (std::size_t k = 0; k < scores.size(); ++k) {
                    u -= std::exp(scores[k] - m);
                    if (u <= 0.0) {
                        pick = k;
                        break;
                    }
                }
                proposal[static_cast<std::size_t>(i)] =
                    pick < snapshot.size() ? snapshot[pick].id : 0;
            }
        };
        std::vector<std::thread> pool;
        for (int t = 0; t < T; ++t) pool.emplace_back(worker, t);
        for (auto& th : pool) th.join();

        for (int i = 0; i < N_; ++i) {
            const int old = z_[static_cast<std::size_t>(i)];
            const bool emptied = remove_point(i);
            if (emptied) erase_cluster(old);
            int k = find_cluster(proposal[static_cast<std::size_t>(i)]);
            if (k < 0) k = new_cluster();
            add_point(i, k);
        }
    }

    int find_cluster(uint64_t id) const {
        if (id == 0) return -1;
        for (std::size_t k = 0; k < clusters_.size(); ++k)
            if (clusters_[k].id == id) return static_cast<int>(k);
        return -1;
    }

    // log P(X, z) = CRP partition probability plus per-cluster NIW marginal
    // likelihoods.
    double joint_log_prob() {
        const int K = static_cast<int>(clusters_.size());
        double lp = K * std::log(cfg_.alpha) + std::lgamma(cfg_.alpha) -
                    std::lgamma(cfg_.alpha + N_);
        const double lg0 = log_multigamma(0.5 * prior_.nu0, d_);
        for (auto& c : clusters_) {
            if (!c.cache_ok) refresh_cache(c);
            lp += std::lgamma(c.n);
            lp += -0.5 * c.n * d_ * kLogPi + log_multigamma(0.5 * c.nu_n, d_) - lg0 +
                  0.5 * prior_.nu0 * logdet_psi0_ - 0.5 * c.nu_n * c.logdet_psi +
                  0.5 * d_ * (std::log(prior_.kappa0) - std::log(c.kappa_n));
        }
        return lp;
    }

    Mat regularize(Mat cov) const {
        cov = 0.5 * (cov + cov.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Mat> solver(cov);
        if (solver.info() != Eigen::Success)
            throw NumericError("covariance eigendecomposition failed");
        const double floor = kCovEigFloorScale * cov.trace() / d_;
        Vec vals = solver.eigenvalues().cwiseMax(floor);
        Mat out = solver.eigenvectors() * vals.asDiagonal() * solver.eigenvectors().transpose();
        return 0.5 * (out + out.transpose());
    }

private:
    Mat X_;  // d x N, points as columns
    NiwPrior prior_;
    DpgmmConfig cfg_;
    int d_;
    int N_;
    std::mt19937_64 rng_;
    Mat Lq_empty_;
    Cluster empty_;
    std::vector<Cluster> clusters_;
    std::vector<int> z_;
    std::vector<int> order_;
    std::vector<double> scores_;
    std::vector<double> lgamma_half_;
    uint64_t next_id_ = 1;
    double logdet_psi0_ = 0.0;
};

}  // namespace

DpgmmModel fit(const Eigen::Ref<const Mat>& points, const ModalityLayout& layout,
               const NiwPrior& prior, const DpgmmConfig& config) {
    Sampler sampler(points, prior, config);
    std::vector<TraceRow> trace;
    sampler.run(trace);
    DpgmmModel model = sampler.extract(layout);
    model.trace = std::move(trace);
    return model;
}

DpgmmModel fit(const std::vector<FeatureSequence>& data, const NiwPrior& prior,
               const DpgmmConfig& config) {
    if (data.empty()) throw DataError("dpgmm fit: no training sequences");
    const ModalityLayout layout = data.front().layout;
    Eigen::Index total = 0;
    for (const auto& seq : data) {
        seq.validate();
        if (!(seq.layout == layout))
            throw DataError("dpgmm fit: inconsistent modality layouts across sequences");
        total += seq.size();
    }
    Mat points(total, layout.total());
    Eigen::Index row = 0;
    for (const auto& seq : data) {
        points.middleRows(row, seq.size()) = seq.vectors;
        row += seq.size();
    }
    return fit(points, layout, prior, config);
}

PosteriorEvaluator::PosteriorEvaluator(const DpgmmModel& model) : dims_(model.dims()) {
    if (model.clusters.empty()) throw DataError("posterior evaluator: model has no clusters");
    for (const auto& c : model.clusters) {
        if (!(c.weight > 0.0)) throw DataError("posterior evaluator: non-positive weight");
        Eigen::LLT<Mat> llt(c.covariance);
        if (llt.info() != Eigen::Success)
            throw NumericError("posterior evaluator: covariance not positive definite");
        Mat L = llt.matrixL();
        log_weight_.push_back(std::log(c.weight));
        mean_.push_back(c.mean);
        log_norm_.push_back(-0.5 * (dims_ * kLog2Pi +
                                    2.0 * L.diagonal().array().log().sum()));
        chol_.push_back(std::move(L));
    }
}

ClusterPosterior PosteriorEvaluator::operator()(const Eigen::Ref<const Vec>& x) const {
    if (x.size() != dims_)
        throw DataError("posterior: input has " + std::to_string(x.size()) +
                        " dims, model expects " + std::to_string(dims_));
    if (!x.allFinite()) throw DataError("posterior: non-finite input");

    const auto K = static_cast<Eigen::Index>(chol_.size());
    Vec logp(K);
    for (Eigen::Index k = 0; k < K; ++k) {
        Vec residual = x - mean_[static_cast<std::size_t>(k)];
        chol_[static_cast<std::size_t>(k)].triangularView<Eigen::Lower>().solveInPlace(residual);
        logp[k] = log_weight_[static_cast<std::size_t>(k)] +
                  log_norm_[static_cast<std::size_t>(k)] - 0.5 * residual.squaredNorm();
    }
    const double m = logp.maxCoeff();
    Vec probs = (logp.array() - m).exp();
    probs /= probs.sum();
    return probs;
}

ClusterPosterior posterior(const DpgmmModel& model, const Eigen::Ref<const Vec>& x) {
    return PosteriorEvaluator(model)(x);
}

DpgmmModel marginal_model(const DpgmmModel& model, const std::vector<int>& observed) {
    if (observed.empty()) throw DataError("marginal: empty observed dimension set");
    const int d = model.dims();
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (observed[i] < 0 || observed[i] >= d)
            throw DataError("marginal: dimension index out of range");
        if (i > 0 && observed[i] <= observed[i - 1])
            throw DataError("marginal: observed dimensions must be strictly increasing");
    }

    DpgmmModel out;
    out.config = model.config;
    out.sampler_mode = model.sampler_mode;
    const auto m = static_cast<Eigen::Index>(observed.size());
    int audio_count = 0;
    for (int idx : observed)
        if (idx < model.layout.audio_dim) ++audio_count;
    out.layout = ModalityLayout{audio_count, static_cast<int>(m) - audio_count};

    for (const auto& c : model.clusters) {
        GaussianCluster g;
        g.weight = c.weight;
        g.mean.resize(m);
        g.covariance.resize(m, m);
        for (Eigen::Index i = 0; i < m; ++i) {
            g.mean[i] = c.mean[observed[static_cast<std::size_t>(i)]];
            for (Eigen::Index j = 0; j < m; ++j)
                g.covariance(i, j) = c.covariance(observed[static_cast<std::size_t>(i)],
                                                  observed[static_cast<std::size_t>(j)]);
        }
        out.clusters.push_back(std::move(g));
    }
    return out;
}

ClusterPosterior posterior_marginal(const DpgmmModel& model, const Eigen::Ref<const Vec>& x_obs,
                                    const std::vector<int>& observed) {
    if (static_cast<std::size_t>(x_obs.size()) != observed.size())
        throw DataError("marginal: observation length does not match dimension set");
    return posterior(marginal_model(model, observed), x_obs);
}

void serialize(const DpgmmModel& model, std::ostream& out) {
    io::BinaryWriter w(out, "AVPM", 1);
    const int d = model.dims();
    w.u32(static_cast<uint32_t>(d));
    w.u32(static_cast<uint32_t>(model.num_clusters()));
    w.u32(static_cast<uint32_t>(model.layout.audio_dim));
    w.u32(static_cast<uint32_t>(model.layout.visual_dim));
    w.f64(model.config.alpha);
    w.u32(static_cast<uint32_t>(model.config.iterations));
    w.u32(static_cast<uint32_t>(model.config.init_clusters));
    w.u64(model.config.seed);
    w.f64(model.config.min_cluster_weight);
    w.str(model.sampler_mode);
    w.u32(static_cast<uint32_t>(model.trace.size()));
    for (const auto& row : model.trace) {
        w.u32(static_cast<uint32_t>(row.sweep));
        w.u32(static_cast<uint32_t>(row.num_clusters));
        w.f64(row.joint_log_prob);
    }
    for (const auto& c : model.clusters) {
        w.f64(c.weight);
        w.vec(c.mean);
        w.mat(c.covariance);
    }
    w.finish();
}

DpgmmModel deserialize(std::istream& in) {
    io::BinaryReader r(in, "AVPM", 1);
    DpgmmModel model;
    const auto d = static_cast<Eigen::Index>(r.u32());
    const auto K = static_cast<Eigen::Index>(r.u32());
    model.layout.audio_dim = static_cast<int>(r.u32());
    model.layout.visual_dim = static_cast<int>(r.u32());
    model.config.alpha = r.f64();
    model.config.iterations = static_cast<int>(r.u32());
    model.config.init_clusters = static_cast<int>(r.u32());
    model.config.seed = r.u64();
    model.config.min_cluster_weight = r.f64();
    model.sampler_mode = r.str();
    const auto trace_len = r.u32();
    model.trace.resize(trace_len);
    for (auto& row : model.trace) {
        row.sweep = static_cast<int>(r.u32());
        row.num_clusters = static_cast<int>(r.u32());
        row.joint_log_prob = r.f64();
    }
    if (d < 1 || K < 1) throw DataError("model container declares empty model");
    for (Eigen::Index k = 0; k < K; ++k) {
        GaussianCluster c;
        c.weight = r.f64();
        c.mean = r.vec(d);
        c.covariance = r.mat(d, d);
        model.clusters.push_back(std::move(c));
    }
    return model;
}

void save_model(const std::filesystem::path& path, const DpgmmModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write model: " + path.string());
    serialize(model, out);
    if (!out) throw DataError("short write to model: " + path.string());
}

DpgmmModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model: " + path.string());
    return deserialize(in);
}

void save_trace_csv(const std::filesystem::path& path, const DpgmmModel& model) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write trace: " + path.string());
    out << "# mode=" << model.sampler_mode << "\n";
    out << "sweep,num_clusters,joint_log_prob\n";
    char buf[64];
    for (const auto& row : model.trace) {
        std::snprintf(buf, sizeof buf, "%d,%d,%.17g", row.sweep, row.num_clusters,
                      row.joint_log_prob);
        out << buf << "\n";
    }
}

}  // namespace avphon::dpgmm
