#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "avphon/error.hpp"

namespace avphon::io {

/// Plain-text key-value configuration with [section] headers and '#'
/// comments. Section and key order are preserved for round-trip hashing.
class ConfigFile {
public:
    static ConfigFile parse_file(const std::filesystem::path& path);
    static ConfigFile parse_text(const std::string& text, const std::string& origin = "<text>");

    bool has_section(const std::string& section) const;
    std::vector<std::string> sections_matching(const std::string& prefix) const;

    bool has_key(const std::string& section, const std::string& key) const;
    std::string get_string(const std::string& section, const std::string& key) const;
    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) const;
    double get_double(const std::string& section, const std::string& key) const;
    double get_double(const std::string& section, const std::string& key, double fallback) const;
    long get_int(const std::string& section, const std::string& key) const;
    long get_int(const std::string& section, const std::string& key, long fallback) const;
    bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
    std::vector<double> get_vector(const std::string& section, const std::string& key) const;

    const std::string& text() const { return text_; }

private:
    std::optional<std::string> lookup(const std::string& section, const std::string& key) const;

    std::map<std::string, std::map<std::string, std::string>> values_;
    std::vector<std::string> section_order_;
    std::string text_;
    std::string origin_;
};

/// FNV-1a hash of a configuration's canonical text, for run manifests.
uint64_t config_hash(const std::string& text);

}  // namespace avphon::io
