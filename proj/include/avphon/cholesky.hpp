#pragma once

#include <Eigen/Core>

#include <cmath>

#include "avphon/error.hpp"

namespace avphon {

/// In-place rank-1 update of a lower-triangular Cholesky factor:
/// L L' <- L L' + v v'. Consumes v as scratch.
template <typename Scalar>
void chol_rank1_update(Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& L,
                       Eigen::Vector<Scalar, Eigen::Dynamic> v) {
    const Eigen::Index d = L.rows();
    for (Eigen::Index j = 0; j < d; ++j) {
        const Scalar ljj = L(j, j);
        const Scalar r = std::hypot(ljj, v[j]);
        const Scalar c = r / ljj;
        const Scalar s = v[j] / ljj;
        L(j, j) = r;
        const Eigen::Index tail = d - j - 1;
        if (tail > 0) {
            auto Lcol = L.col(j).tail(tail);
            auto vtail = v.tail(tail);
            Lcol = (Lcol + s * vtail) / c;
            vtail = c * vtail - s * Lcol;
        }
    }
}

/// In-place rank-1 downdate: L L' <- L L' - v v'. Throws NumericError when
/// the result is not positive definite. Consumes v as scratch.
template <typename Scalar>
void chol_rank1_downdate(Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& L,
                         Eigen::Vector<Scalar, Eigen::Dynamic> v) {
    const Eigen::Index d = L.rows();
    for (Eigen::Index j = 0; j < d; ++j) {
        const Scalar ljj = L(j, j);
        const Scalar arg = (ljj - v[j]) * (ljj + v[j]);
        if (!(arg > Scalar(0)))
            throw NumericError("cholesky downdate lost positive definiteness");
        const Scalar r = std::sqrt(arg);
        const Scalar c = r / ljj;
        const Scalar s = v[j] / ljj;
        L(j, j) = r;
        const Eigen::Index tail = d - j - 1;
        if (tail > 0) {
            auto Lcol = L.col(j).tail(tail);
            auto vtail = v.tail(tail);
            Lcol = (Lcol - s * vtail) / c;
            vtail = c * vtail - s * Lcol;
        }
    }
}

}  // namespace avphon
