#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "avphon/abx.hpp"

namespace avphon::io {

/// One row of a phoneme alignment file.
struct AlignmentSegment {
    double start = 0.0;
    double end = 0.0;
    std::string phoneme;
    std::string word;
    std::string speaker;
};

/// Reads a per-utterance alignment TSV with the header
/// start_s<TAB>end_s<TAB>phoneme_label<TAB>word<TAB>speaker. Rows must be
/// ascending and non-overlapping.
std::vector<AlignmentSegment> read_alignment(const std::filesystem::path& path);

/// Converts segments into phone tokens, filling prev/next context labels
/// from adjacent segments (cross-word contexts included, utterance edges get
/// the reserved edge label).
std::vector<abx::PhoneToken> tokens_from_alignment(const std::vector<AlignmentSegment>& segments,
                                                   const std::string& utterance);

/// Reads a class map TSV with the header phoneme<TAB>class where class is
/// "vowel" or "consonant".
abx::ClassMap read_class_map(const std::filesystem::path& path);

void write_class_map(const std::filesystem::path& path, const abx::ClassMap& class_map);

}  // namespace avphon::io
