#pragma once

#include <filesystem>
#include <vector>

#include "avphon/image.hpp"
#include "avphon/types.hpp"

namespace avphon::vision {

/// Mean-centered PCA basis over vectorized mouth crops.
struct EigenmouthBasis {
    int width = kMouthWidth;
    int height = kMouthHeight;
    Vec mean_image;           // width*height
    Mat components;           // width*height x k, orthonormal columns
    Vec explained_variance;   // k, non-increasing

    int k() const { return static_cast<int>(components.cols()); }
    int dims() const { return width * height; }
};

/// Principal components of a sample matrix (rows = observations).
/// Components are the top-k eigenvectors of the sample covariance, ordered by
/// decreasing eigenvalue, each sign-fixed so its largest-magnitude entry is
/// positive. Uses the Gram-matrix eigendecomposition when observations are
/// fewer than dimensions; equivalent to decomposing the covariance itself.
/// Throws DataError when fewer than k+1 rows are given or the centered data
/// has rank below k (the message names the achievable k).
struct PcaResult {
    Vec mean;
    Mat components;
    Vec eigenvalues;
};
PcaResult fit_pca(const Eigen::Ref<const Mat>& samples, int k);

/// PCA over cropped mouth frames; every frame must be kMouthWidth x kMouthHeight.
EigenmouthBasis fit_eigenmouths(const std::vector<Image8>& frames, int k);

/// Coefficients of a frame in the basis: componentsᵀ (vec(frame) − mean).
Vec project(const Image8& frame, const EigenmouthBasis& basis);
Vec project(const Eigen::Ref<const Vec>& pixels, const EigenmouthBasis& basis);

/// Per-window frame triple, indices into the frame timestamp list.
struct FrameTriple {
    int prev;
    int center;
    int next;

    bool operator==(const FrameTriple&) const = default;
};

/// For each window center, picks the latest frame with timestamp at or before
/// the center (ties take the co-timed frame) plus its neighbours, clamped to
/// the clip ends. Throws DataError when no frame precedes the first center.
std::vector<FrameTriple> match_frames(const std::vector<double>& window_centers,
                                      const std::vector<double>& frame_timestamps);

/// Static + dynamic eigenmouth features per window:
/// (proj(center), proj(center) − proj(prev), proj(next) − proj(center)),
/// 3k dimensions, visual-only layout.
FeatureSequence extract_visual_features(const std::vector<FrameImage>& frames,
                                        const WindowGrid& grid, const EigenmouthBasis& basis,
                                        const std::string& utterance);

namespace io {

void save_basis(const std::filesystem::path& path, const EigenmouthBasis& basis);
EigenmouthBasis load_basis(const std::filesystem::path& path);

}  // namespace io
}  // namespace avphon::vision
