#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <filesystem>
#include <random>

#include "avphon/eigenmouth.hpp"

using namespace avphon;

namespace {

Image8 flat_frame(uint8_t value) {
    Image8 img;
    img.width = kMouthWidth;
    img.height = kMouthHeight;
    img.pixels.assign(static_cast<std::size_t>(img.size()), value);
    return img;
}

Image8 random_frame(std::mt19937_64& rng) {
    Image8 img = flat_frame(0);
    for (auto& p : img.pixels) p = static_cast<uint8_t>(rng() % 256);
    return img;
}

// Frames on an exact two-pattern affine subspace (integer pixel values, so
// 8-bit quantization is lossless).
std::vector<Image8> two_pattern_frames() {
    std::vector<Image8> frames;
    for (int a : {-20, 0, 20})
        for (int b : {-15, 0, 15}) {
            Image8 img = flat_frame(100);
            for (int r = 0; r < img.height; ++r)
                for (int c = 0; c < img.width; ++c) {
                    int v = 100;
                    if (c < img.width / 2) v += a;  // left-half pattern
                    if (r < img.height / 2) v += b;  // top-half pattern
                    img.at(r, c) = static_cast<uint8_t>(v);
                }
            frames.push_back(std::move(img));
        }
    return frames;
}

}  // namespace

TEST_CASE("grayscale formula endpoints and equal channels") {
    CHECK(to_grayscale(255, 255, 255) == 255);
    CHECK(to_grayscale(0, 0, 0) == 0);
    CHECK(to_grayscale(100, 100, 100) == 100);
    CHECK(to_grayscale(255, 0, 0) == 76);  // round(0.2989*255)
}

TEST_CASE("two-pattern frames are reconstructed exactly with k=2") {
    const auto frames = two_pattern_frames();
    const auto basis = vision::fit_eigenmouths(frames, 2);
    for (const auto& frame : frames) {
        const Vec x = vectorize(frame);
        const Vec coeffs = vision::project(frame, basis);
        const Vec reconstructed = basis.mean_image + basis.components * coeffs;
        CHECK((reconstructed - x).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("identical frames have rank zero and raise an error") {
    std::vector<Image8> frames(5, flat_frame(137));
    CHECK_THROWS_AS(vision::fit_eigenmouths(frames, 1), DataError);
}

TEST_CASE("rank-deficient data names the achievable component count") {
    const auto frames = two_pattern_frames();  // rank 2
    CHECK_THROWS_WITH_AS(vision::fit_eigenmouths(frames, 5), doctest::Contains("k=2"),
                         DataError);
}

TEST_CASE("too few frames for the requested k") {
    std::mt19937_64 rng(3);
    std::vector<Image8> frames{random_frame(rng), random_frame(rng)};
    CHECK_THROWS_AS(vision::fit_eigenmouths(frames, 2), DataError);
}

TEST_CASE("core pca agrees with a brute-force covariance eigendecomposition") {
    std::mt19937_64 rng(29);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 25; ++trial) {
        const int n = 12 + static_cast<int>(rng() % 30);
        const int d = 3 + static_cast<int>(rng() % 12);
        const int k = 1 + static_cast<int>(rng() % std::min(4, d));
        Mat data(n, d);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < d; ++j) data(i, j) = g(rng) * (1.0 + j);

        const auto pca = vision::fit_pca(data, k);

        // Explicitly formed covariance, dense eigensolver.
        const Vec mean = data.colwise().mean();
        const Mat centered = data.rowwise() - mean.transpose();
        const Mat cov = centered.transpose() * centered / (n - 1);
        Eigen::SelfAdjointEigenSolver<Mat> solver(cov);

        CHECK((pca.mean - mean).cwiseAbs().maxCoeff() < 1e-12);
        for (int j = 0; j < k; ++j) {
            const double expected = solver.eigenvalues()[d - 1 - j];
            CHECK(pca.eigenvalues[j] == doctest::Approx(expected).epsilon(1e-8));
            Vec ref = solver.eigenvectors().col(d - 1 - j);
            Eigen::Index imax = 0;
            ref.cwiseAbs().maxCoeff(&imax);
            if (ref[imax] < 0.0) ref = -ref;
            CHECK((pca.components.col(j) - ref).cwiseAbs().maxCoeff() < 1e-7);
        }
        // Non-increasing explained variance.
        for (int j = 1; j < k; ++j) CHECK(pca.eigenvalues[j] <= pca.eigenvalues[j - 1] + 1e-12);
    }
}

TEST_CASE("components are orthonormal and the fit is deterministic") {
    std::mt19937_64 rng(31);
    std::vector<Image8> frames;
    for (int i = 0; i < 30; ++i) frames.push_back(random_frame(rng));

    const auto basis1 = vision::fit_eigenmouths(frames, 4);
    const auto basis2 = vision::fit_eigenmouths(frames, 4);
    CHECK(basis1.components == basis2.components);
    CHECK(basis1.mean_image == basis2.mean_image);

    const Mat gram = basis1.components.transpose() * basis1.components;
    CHECK((gram - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("projection of the mean image is zero; components project to unit axes") {
    const auto frames = two_pattern_frames();
    const auto basis = vision::fit_eigenmouths(frames, 2);

    CHECK(vision::project(basis.mean_image, basis).cwiseAbs().maxCoeff() < 1e-9);

    const Vec shifted = basis.mean_image + 2.0 * basis.components.col(0);
    const Vec coeffs = vision::project(shifted, basis);
    CHECK(coeffs[0] == doctest::Approx(2.0));
    CHECK(std::abs(coeffs[1]) < 1e-9);
}

TEST_CASE("projection solves the least-squares problem over the basis span") {
    std::mt19937_64 rng(37);
    std::vector<Image8> frames;
    for (int i = 0; i < 25; ++i) frames.push_back(random_frame(rng));
    const auto basis = vision::fit_eigenmouths(frames, 3);

    const Image8 probe = random_frame(rng);
    const Vec coeffs = vision::project(probe, basis);
    const Vec lstsq = basis.components.colPivHouseholderQr().solve(
        Vec(vectorize(probe) - basis.mean_image));
    CHECK((coeffs - lstsq).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("projection is linear before quantization") {
    std::mt19937_64 rng(41);
    std::vector<Image8> frames;
    for (int i = 0; i < 20; ++i) frames.push_back(random_frame(rng));
    const auto basis = vision::fit_eigenmouths(frames, 2);

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const Vec f = vectorize(random_frame(rng));
        const Vec g = vectorize(random_frame(rng));
        const double alpha = unit(rng);
        const Vec blend = alpha * f + (1.0 - alpha) * g;
        const Vec lhs = vision::project(blend, basis);
        const Vec rhs =
            alpha * vision::project(f, basis) + (1.0 - alpha) * vision::project(g, basis);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("frame matching: ties take the co-timed frame") {
    std::vector<double> timestamps;
    for (int i = 0; i < 30; ++i) timestamps.push_back(i / 60.0);
    const auto triples = vision::match_frames({0.100}, timestamps);
    CHECK(triples[0].center == 6);
    CHECK(triples[0].prev == 5);
    CHECK(triples[0].next == 7);
}

TEST_CASE("frame matching clamps at clip boundaries") {
    const std::vector<double> timestamps{0.0, 1.0 / 60, 2.0 / 60};
    const auto early = vision::match_frames({0.005}, timestamps);
    CHECK(early[0].center == 0);
    CHECK(early[0].prev == 0);

    const auto late = vision::match_frames({0.9}, timestamps);
    CHECK(late[0].center == 2);
    CHECK(late[0].next == 2);

    CHECK_THROWS_AS(vision::match_frames({-0.5}, timestamps), DataError);
}

TEST_CASE("static video yields zero dynamic features; k=4 gives 12 dims") {
    std::mt19937_64 rng(43);
    std::vector<Image8> train;
    for (int i = 0; i < 20; ++i) train.push_back(random_frame(rng));
    const auto basis = vision::fit_eigenmouths(train, 4);

    std::vector<FrameImage> clip;
    const Image8 still = random_frame(rng);
    for (int i = 0; i < 30; ++i) clip.push_back({still, i / 60.0});

    WindowGrid grid;
    for (int i = 0; i < 40; ++i) grid.centers.push_back(i * 0.010 + 0.0125);

    const auto seq = vision::extract_visual_features(clip, grid, basis, "still");
    CHECK(seq.dims() == 12);
    CHECK(seq.size() == 40);
    CHECK(seq.layout.visual_dim == 12);
    CHECK(seq.vectors.middleCols(4, 8).cwiseAbs().maxCoeff() == 0.0);

    // Windows sharing a frame triple get identical features.
    CHECK(seq.vectors.row(0) == seq.vectors.row(1));
}

TEST_CASE("basis round-trips through its container exactly") {
    std::mt19937_64 rng(47);
    std::vector<Image8> frames;
    for (int i = 0; i < 12; ++i) frames.push_back(random_frame(rng));
    const auto basis = vision::fit_eigenmouths(frames, 3);

    const auto path = std::filesystem::temp_directory_path() / "avphon_test_basis.avpb";
    vision::io::save_basis(path, basis);
    const auto loaded = vision::io::load_basis(path);
    CHECK(loaded.mean_image == basis.mean_image);
    CHECK(loaded.components == basis.components);
    CHECK(loaded.explained_variance == basis.explained_variance);
    std::filesystem::remove(path);
}
