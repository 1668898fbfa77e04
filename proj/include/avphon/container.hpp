#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "avphon/types.hpp"

namespace avphon::io {

/// Little-endian binary container with a 4-char magic and a u32 version.
/// All project binary artifacts (features, basis, model) share this frame.
class BinaryWriter {
public:
    BinaryWriter(const std::filesystem::path& path, const char magic[4], uint32_t version);
    BinaryWriter(std::ostream& stream, const char magic[4], uint32_t version);

    void u32(uint32_t v) { raw(&v, sizeof v); }
    void u64(uint64_t v) { raw(&v, sizeof v); }
    void f32(float v) { raw(&v, sizeof v); }
    void f64(double v) { raw(&v, sizeof v); }
    void str(const std::string& s);
    void vec(const Vec& v);
    void mat(const Mat& m);  // column-major payload, dimensions already known to the reader
    void vec_f32(const Vec& v);

    /// Flushes and verifies the stream; throws DataError on failure.
    void finish();

private:
    void raw(const void* data, std::size_t bytes);

    std::unique_ptr<std::ofstream> owned_;
    std::ostream* out_;
    std::string where_;
};

class BinaryReader {
public:
    BinaryReader(const std::filesystem::path& path, const char magic[4], uint32_t version);
    BinaryReader(std::istream& stream, const char magic[4], uint32_t version);

    uint32_t u32();
    uint64_t u64();
    float f32();
    double f64();
    std::string str();
    Vec vec(Eigen::Index n);
    Mat mat(Eigen::Index rows, Eigen::Index cols);
    Vec vec_f32(Eigen::Index n);

private:
    void raw(void* data, std::size_t bytes);
    void check_header(const char magic[4], uint32_t version);

    std::unique_ptr<std::ifstream> owned_;
    std::istream* in_;
    std::string where_;
};

/// Feature container (.avfc): header carries the modality layout and the
/// window grid; payload is row-major 32-bit floats.
void save_features(const std::filesystem::path& path, const FeatureSequence& seq);
FeatureSequence load_features(const std::filesystem::path& path);

/// Debug CSV dump: one row per window, first column the window center.
void save_features_csv(const std::filesystem::path& path, const FeatureSequence& seq);

/// Writes through a temp file in the same directory, then renames.
class AtomicFile {
public:
    explicit AtomicFile(const std::filesystem::path& target);
    ~AtomicFile();
    const std::filesystem::path& temp_path() const { return temp_; }
    void commit();

private:
    std::filesystem::path target_;
    std::filesystem::path temp_;
    bool committed_ = false;
};

}  // namespace avphon::io
