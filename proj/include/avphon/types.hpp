#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <string>
#include <vector>

#include "avphon/error.hpp"

namespace avphon {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

template <class T>
using VecX = Eigen::Vector<T, Eigen::Dynamic>;
template <class T>
using MatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;

/// Which feature dimensions belong to which modality. Audio dimensions come
/// first: audio occupies [0, audio_dim), visual [audio_dim, audio_dim + visual_dim).
struct ModalityLayout {
    int audio_dim = 0;
    int visual_dim = 0;

    int total() const { return audio_dim + visual_dim; }

    bool operator==(const ModalityLayout&) const = default;
};

/// Analysis-window grid over one utterance. Window i covers
/// [i*hop, i*hop + window_len) and its center sits at i*hop + window_len/2.
struct WindowGrid {
    double window_len = 0.025;
    double hop = 0.010;
    std::vector<double> centers;

    std::size_t size() const { return centers.size(); }
};

inline bool grids_equal(const WindowGrid& a, const WindowGrid& b, double tol = 1e-12) {
    if (a.centers.size() != b.centers.size()) return false;
    if (std::abs(a.window_len - b.window_len) > tol) return false;
    if (std::abs(a.hop - b.hop) > tol) return false;
    for (std::size_t i = 0; i < a.centers.size(); ++i)
        if (std::abs(a.centers[i] - b.centers[i]) > tol) return false;
    return true;
}

/// Time-ordered per-window feature vectors for one utterance.
/// Rows are windows, columns are feature dimensions.
struct FeatureSequence {
    Mat vectors;
    ModalityLayout layout;
    WindowGrid grid;
    std::string utterance;

    Eigen::Index size() const { return vectors.rows(); }
    int dims() const { return static_cast<int>(vectors.cols()); }

    void validate() const {
        if (vectors.cols() != layout.total())
            throw DataError("feature sequence '" + utterance + "': vector width " +
                            std::to_string(vectors.cols()) + " does not match layout total " +
                            std::to_string(layout.total()));
        if (!vectors.allFinite())
            throw DataError("feature sequence '" + utterance + "' contains non-finite entries");
    }
};

}  // namespace avphon
