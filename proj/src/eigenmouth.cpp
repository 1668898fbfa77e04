#include "avphon/eigenmouth.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <fstream>

#include "avphon/container.hpp"

namespace avphon::vision {

namespace {

// Sign convention: the largest-magnitude entry of each component is positive.
void fix_signs(Mat& components) {
    for (Eigen::Index c = 0; c < components.cols(); ++c) {
        Eigen::Index imax = 0;
        components.col(c).cwiseAbs().maxCoeff(&imax);
        if (components(imax, c) < 0.0) components.col(c) = -components.col(c);
    }
}

}  // namespace

PcaResult fit_pca(const Eigen::Ref<const Mat>& samples, int k) {
    const Eigen::Index n = samples.rows();
    const Eigen::Index d = samples.cols();
    if (k < 1) throw ConfigError("pca component count must be at least 1");
    if (n < k + 1)
        throw DataError("pca needs at least " + std::to_string(k + 1) + " samples, got " +
                        std::to_string(n));

    PcaResult result;
    result.mean = samples.colwise().mean();
    Mat centered = samples.rowwise() - result.mean.transpose();

    Vec eigenvalues;
    Mat eigenvectors;  // columns, unit length, ascending order from Eigen
    if (n < d) {
        // Gram-matrix route: eigenvectors of X Xᵀ/(n−1) lift to covariance
        // eigenvectors via Xᵀ v / ||Xᵀ v||, with identical eigenvalues.
        Mat gram = centered * centered.transpose() / static_cast<double>(n - 1);
        Eigen::SelfAdjointEigenSolver<Mat> solver(gram);
        if (solver.info() != Eigen::Success) throw NumericError("pca eigendecomposition failed");
        eigenvalues = solver.eigenvalues();
        eigenvectors = centered.transpose() * solver.eigenvectors();
    } else {
        Mat cov = centered.transpose() * centered / static_cast<double>(n - 1);
        Eigen::SelfAdjointEigenSolver<Mat> solver(cov);
        if (solver.info() != Eigen::Success) throw NumericError("pca eigendecomposition failed");
        eigenvalues = solver.eigenvalues();
        eigenvectors = solver.eigenvectors();
    }

    const double lambda_max = eigenvalues.size() ? eigenvalues.maxCoeff() : 0.0;
    const double tol = lambda_max * static_cast<double>(std::max(n, d)) * 1e-12;
    int rank = 0;
    for (Eigen::Index i = 0; i < eigenvalues.size(); ++i)
        if (eigenvalues[i] > tol && eigenvalues[i] > 0.0) ++rank;
    if (rank < k)
        throw DataError("pca rank deficient: data supports at most k=" + std::to_string(rank) +
                        " components, requested " + std::to_string(k));

    result.components.resize(d, k);
    result.eigenvalues.resize(k);
    for (int j = 0; j < k; ++j) {
        const Eigen::Index src = eigenvalues.size() - 1 - j;  // descending
        result.eigenvalues[j] = eigenvalues[src];
        Vec v = eigenvectors.col(src);
        result.components.col(j) = v / v.norm();
    }
    fix_signs(result.components);
    return result;
}

EigenmouthBasis fit_eigenmouths(const std::vector<Image8>& frames, int k) {
    if (frames.empty()) throw DataError("no pretraining frames");
    const int d = kMouthWidth * kMouthHeight;
    Mat samples(static_cast<Eigen::Index>(frames.size()), d);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const Image8& f = frames[i];
        if (f.width != kMouthWidth || f.height != kMouthHeight)
            throw DataError("mouth frame must be " + std::to_string(kMouthWidth) + "x" +
                            std::to_string(kMouthHeight) + ", got " + std::to_string(f.width) +
                            "x" + std::to_string(f.height));
        samples.row(static_cast<Eigen::Index>(i)) = vectorize(f).transpose();
    }

    PcaResult pca = fit_pca(samples, k);
    EigenmouthBasis basis;
    basis.mean_image = std::move(pca.mean);
    basis.components = std::move(pca.components);
    basis.explained_variance = std::move(pca.eigenvalues);
    return basis;
}

Vec project(const Eigen::Ref<const Vec>& pixels, const EigenmouthBasis& basis) {
    if (pixels.size() != basis.dims())
        throw DataError("projection dimension mismatch: frame has " +
                        std::to_string(pixels.size()) + " pixels, basis expects " +
                        std::to_string(basis.dims()));
    return basis.components.transpose() * (pixels - basis.mean_image);
}

Vec project(const Image8& frame, const EigenmouthBasis& basis) {
    if (frame.width != basis.width || frame.height != basis.height)
        throw DataError("projection dimension mismatch: frame is " + std::to_string(frame.width) +
                        "x" + std::to_string(frame.height));
    return project(vectorize(frame), basis);
}

std::vector<FrameTriple> match_frames(const std::vector<double>& window_centers,
                                      const std::vector<double>& frame_timestamps) {
    if (frame_timestamps.empty()) throw DataError("no video frames to match");
    const int n = static_cast<int>(frame_timestamps.size());

    std::vector<FrameTriple> triples;
    triples.reserve(window_centers.size());
    for (double center : window_centers) {
        auto it = std::upper_bound(frame_timestamps.begin(), frame_timestamps.end(), center);
        if (it == frame_timestamps.begin())
            throw DataError("no video frame at or before window center " +
                            std::to_string(center));
        const int c = static_cast<int>(it - frame_timestamps.begin()) - 1;
        triples.push_back({std::max(c - 1, 0), c, std::min(c + 1, n - 1)});
    }
    return triples;
}

FeatureSequence extract_visual_features(const std::vector<FrameImage>& frames,
                                        const WindowGrid& grid, const EigenmouthBasis& basis,
                                        const std::string& utterance) {
    std::vector<double> timestamps(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) timestamps[i] = frames[i].timestamp;
    const auto triples = match_frames(grid.centers, timestamps);

    // Project each frame once; windows only gather coefficients.
    const int k = basis.k();
    Mat coeffs(static_cast<Eigen::Index>(frames.size()), k);
    for (std::size_t i = 0; i < frames.size(); ++i)
        coeffs.row(static_cast<Eigen::Index>(i)) = project(frames[i].image, basis).transpose();

    FeatureSequence seq;
    seq.vectors.resize(static_cast<Eigen::Index>(triples.size()), 3 * k);
    for (std::size_t w = 0; w < triples.size(); ++w) {
        const auto& t = triples[w];
        auto row = seq.vectors.row(static_cast<Eigen::Index>(w));
        row.segment(0, k) = coeffs.row(t.center);
        row.segment(k, k) = coeffs.row(t.center) - coeffs.row(t.prev);
        row.segment(2 * k, k) = coeffs.row(t.next) - coeffs.row(t.center);
    }
    seq.layout = ModalityLayout{0, 3 * k};
    seq.grid = grid;
    seq.utterance = utterance;
    seq.validate();
    return seq;
}

namespace io {

void save_basis(const std::filesystem::path& path, const EigenmouthBasis& basis) {
    avphon::io::BinaryWriter out(path, "AVPB", 1);
    out.u32(static_cast<uint32_t>(basis.width));
    out.u32(static_cast<uint32_t>(basis.height));
    out.u32(static_cast<uint32_t>(basis.k()));
    out.vec(basis.mean_image);
    out.mat(basis.components);
    out.vec(basis.explained_variance);
    out.finish();
}

EigenmouthBasis load_basis(const std::filesystem::path& path) {
    avphon::io::BinaryReader in(path, "AVPB", 1);
    EigenmouthBasis basis;
    basis.width = static_cast<int>(in.u32());
    basis.height = static_cast<int>(in.u32());
    const int k = static_cast<int>(in.u32());
    basis.mean_image = in.vec(basis.width * basis.height);
    basis.components = in.mat(basis.width * basis.height, k);
    basis.explained_variance = in.vec(k);
    return basis;
}

}  // namespace io
}  // namespace avphon::vision
