#include "avphon/container.hpp"

#include <bit>
#include <cstring>

static_assert(std::endian::native == std::endian::little,
              "binary containers assume a little-endian host");

namespace avphon::io {

BinaryWriter::BinaryWriter(const std::filesystem::path& path, const char magic[4],
                           uint32_t version)
    : owned_(std::make_unique<std::ofstream>(path, std::ios::binary)),
      out_(owned_.get()),
      where_(path.string()) {
    if (!*owned_) throw DataError("cannot open for writing: " + where_);
    raw(magic, 4);
    u32(version);
}

BinaryWriter::BinaryWriter(std::ostream& stream, const char magic[4], uint32_t version)
    : out_(&stream), where_("<stream>") {
    raw(magic, 4);
    u32(version);
}

void BinaryWriter::raw(const void* data, std::size_t bytes) {
    out_->write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
}

void BinaryWriter::str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    raw(s.data(), s.size());
}

void BinaryWriter::vec(const Vec& v) { raw(v.data(), sizeof(double) * v.size()); }

void BinaryWriter::mat(const Mat& m) { raw(m.data(), sizeof(double) * m.size()); }

void BinaryWriter::vec_f32(const Vec& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) f32(static_cast<float>(v[i]));
}

void BinaryWriter::finish() {
    out_->flush();
    if (!*out_) throw DataError("write failed: " + where_);
}

BinaryReader::BinaryReader(const std::filesystem::path& path, const char magic[4],
                           uint32_t version)
    : owned_(std::make_unique<std::ifstream>(path, std::ios::binary)),
      in_(owned_.get()),
      where_(path.string()) {
    if (!*owned_) throw DataError("cannot open: " + where_);
    check_header(magic, version);
}

BinaryReader::BinaryReader(std::istream& stream, const char magic[4], uint32_t version)
    : in_(&stream), where_("<stream>") {
    check_header(magic, version);
}

void BinaryReader::check_header(const char magic[4], uint32_t version) {
    char got[4];
    raw(got, 4);
    if (std::memcmp(got, magic, 4) != 0)
        throw DataError("bad magic in " + where_ + " (expected " + std::string(magic, 4) + ")");
    const uint32_t v = u32();
    if (v != version)
        throw DataError("unsupported container version " + std::to_string(v) + " in " + where_ +
                        " (expected " + std::to_string(version) + ")");
}

void BinaryReader::raw(void* data, std::size_t bytes) {
    in_->read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(in_->gcount()) != bytes)
        throw DataError("truncated container: " + where_);
}

uint32_t BinaryReader::u32() {
    uint32_t v;
    raw(&v, sizeof v);
    return v;
}

uint64_t BinaryReader::u64() {
    uint64_t v;
    raw(&v, sizeof v);
    return v;
}

float BinaryReader::f32() {
    float v;
    raw(&v, sizeof v);
    return v;
}

double BinaryReader::f64() {
    double v;
    raw(&v, sizeof v);
    return v;
}

std::string BinaryReader::str() {
    const uint32_t n = u32();
    if (n > (1u << 20)) throw DataError("corrupt string length in " + where_);
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
}

Vec BinaryReader::vec(Eigen::Index n) {
    Vec v(n);
    raw(v.data(), sizeof(double) * static_cast<std::size_t>(n));
    return v;
}

Mat BinaryReader::mat(Eigen::Index rows, Eigen::Index cols) {
    Mat m(rows, cols);
    raw(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
    return m;
}

Vec BinaryReader::vec_f32(Eigen::Index n) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = f32();
    return v;
}

void save_features(const std::filesystem::path& path, const FeatureSequence& seq) {
    seq.validate();
    BinaryWriter out(path, "AVFC", 1);
    out.u32(static_cast<uint32_t>(seq.size()));
    out.u32(static_cast<uint32_t>(seq.dims()));
    out.u32(static_cast<uint32_t>(seq.layout.audio_dim));
    out.u32(static_cast<uint32_t>(seq.layout.visual_dim));
    out.f64(seq.grid.window_len);
    out.f64(seq.grid.hop);
    out.f64(seq.grid.centers.empty() ? 0.0 : seq.grid.centers.front());
    out.str(seq.utterance);
    for (Eigen::Index r = 0; r < seq.vectors.rows(); ++r) out.vec_f32(seq.vectors.row(r));
    out.finish();
}

FeatureSequence load_features(const std::filesystem::path& path) {
    BinaryReader in(path, "AVFC", 1);
    const auto count = static_cast<Eigen::Index>(in.u32());
    const auto dims = static_cast<Eigen::Index>(in.u32());
    FeatureSequence seq;
    seq.layout.audio_dim = static_cast<int>(in.u32());
    seq.layout.visual_dim = static_cast<int>(in.u32());
    seq.grid.window_len = in.f64();
    seq.grid.hop = in.f64();
    const double first_center = in.f64();
    seq.utterance = in.str();
    seq.vectors.resize(count, dims);
    for (Eigen::Index r = 0; r < count; ++r) seq.vectors.row(r) = in.vec_f32(dims);
    seq.grid.centers.resize(static_cast<std::size_t>(count));
    for (Eigen::Index i = 0; i < count; ++i)
        seq.grid.centers[static_cast<std::size_t>(i)] = first_center + i * seq.grid.hop;
    seq.validate();
    return seq;
}

void save_features_csv(const std::filesystem::path& path, const FeatureSequence& seq) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write csv: " + path.string());
    out << "center_s";
    for (int d = 0; d < seq.dims(); ++d) out << ",f" << d;
    out << "\n";
    char buf[32];
    for (Eigen::Index r = 0; r < seq.size(); ++r) {
        std::snprintf(buf, sizeof buf, "%.6f", seq.grid.centers[static_cast<std::size_t>(r)]);
        out << buf;
        for (int d = 0; d < seq.dims(); ++d) {
            std::snprintf(buf, sizeof buf, "%.9g", seq.vectors(r, d));
            out << ',' << buf;
        }
        out << "\n";
    }
}

AtomicFile::AtomicFile(const std::filesystem::path& target)
    : target_(target), temp_(target.string() + ".tmp") {}

AtomicFile::~AtomicFile() {
    if (!committed_) {
        std::error_code ec;
        std::filesystem::remove(temp_, ec);
    }
}

void AtomicFile::commit() {
    std::filesystem::rename(temp_, target_);
    committed_ = true;
}

}  // namespace avphon::io
