#include "avphon/config_file.hpp"

#include <fstream>
#include <sstream>

namespace avphon::io {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

}  // namespace

ConfigFile ConfigFile::parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_text(buffer.str(), path.string());
}

ConfigFile ConfigFile::parse_text(const std::string& text, const std::string& origin) {
    ConfigFile cfg;
    cfg.text_ = text;
    cfg.origin_ = origin;

    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(origin + ":" + std::to_string(lineno) +
                                  ": unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty section name");
            if (!cfg.values_.count(section)) cfg.section_order_.push_back(section);
            cfg.values_[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": expected key = value, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        if (section.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) +
                              ": key outside any [section]");
        cfg.values_[section][key] = value;
    }
    return cfg;
}

bool ConfigFile::has_section(const std::string& section) const {
    return values_.count(section) > 0;
}

std::vector<std::string> ConfigFile::sections_matching(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& s : section_order_)
        if (s.rfind(prefix, 0) == 0) out.push_back(s);
    return out;
}

bool ConfigFile::has_key(const std::string& section, const std::string& key) const {
    return lookup(section, key).has_value();
}

std::optional<std::string> ConfigFile::lookup(const std::string& section,
                                              const std::string& key) const {
    const auto sit = values_.find(section);
    if (sit == values_.end()) return std::nullopt;
    const auto kit = sit->second.find(key);
    if (kit == sit->second.end()) return std::nullopt;
    return kit->second;
}

std::string ConfigFile::get_string(const std::string& section, const std::string& key) const {
    const auto v = lookup(section, key);
    if (!v) throw ConfigError(origin_ + ": missing required key [" + section + "] " + key);
    return *v;
}

std::string ConfigFile::get_string(const std::string& section, const std::string& key,
                                   const std::string& fallback) const {
    return lookup(section, key).value_or(fallback);
}

double ConfigFile::get_double(const std::string& section, const std::string& key) const {
    const std::string v = get_string(section, key);
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError(origin_ + ": [" + section + "] " + key + " is not a number: '" + v +
                          "'");
    }
}

double ConfigFile::get_double(const std::string& section, const std::string& key,
                              double fallback) const {
    return has_key(section, key) ? get_double(section, key) : fallback;
}

long ConfigFile::get_int(const std::string& section, const std::string& key) const {
    const std::string v = get_string(section, key);
    try {
        std::size_t used = 0;
        const long i = std::stol(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return i;
    } catch (const std::exception&) {
        throw ConfigError(origin_ + ": [" + section + "] " + key + " is not an integer: '" + v +
                          "'");
    }
}

long ConfigFile::get_int(const std::string& section, const std::string& key,
                         long fallback) const {
    return has_key(section, key) ? get_int(section, key) : fallback;
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key,
                          bool fallback) const {
    if (!has_key(section, key)) return fallback;
    const std::string v = get_string(section, key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(origin_ + ": [" + section + "] " + key + " is not a boolean: '" + v + "'");
}

std::vector<double> ConfigFile::get_vector(const std::string& section,
                                           const std::string& key) const {
    const std::string v = get_string(section, key);
    std::istringstream in(v);
    std::vector<double> out;
    double x;
    while (in >> x) out.push_back(x);
    if (out.empty() || !in.eof())
        throw ConfigError(origin_ + ": [" + section + "] " + key +
                          " is not a space-separated number list: '" + v + "'");
    return out;
}

uint64_t config_hash(const std::string& text) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace avphon::io
