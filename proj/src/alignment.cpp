#include "avphon/alignment.hpp"

#include <fstream>
#include <sstream>

namespace avphon::io {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t pos = 0;
    while (true) {
        const std::size_t tab = line.find('\t', pos);
        if (tab == std::string::npos) {
            fields.push_back(line.substr(pos));
            break;
        }
        fields.push_back(line.substr(pos, tab - pos));
        pos = tab + 1;
    }
    if (!fields.empty() && !fields.back().empty() && fields.back().back() == '\r')
        fields.back().pop_back();
    return fields;
}

double parse_seconds(const std::string& s, const std::filesystem::path& path) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw DataError("bad time value '" + s + "' in " + path.string());
    }
}

}  // namespace

std::vector<AlignmentSegment> read_alignment(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open alignment: " + path.string());

    std::string line;
    if (!std::getline(in, line))
        throw DataError("alignment missing header row: " + path.string());
    const auto header = split_tabs(line);
    if (header.size() < 5 || header[0] != "start_s" || header[1] != "end_s" ||
        header[2] != "phoneme_label" || header[3] != "word" || header[4] != "speaker")
        throw DataError("alignment header must be "
                        "start_s\tend_s\tphoneme_label\tword\tspeaker: " +
                        path.string());

    std::vector<AlignmentSegment> segments;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_tabs(line);
        if (fields.size() < 5)
            throw DataError("alignment row with fewer than 5 fields in " + path.string());
        AlignmentSegment seg;
        seg.start = parse_seconds(fields[0], path);
        seg.end = parse_seconds(fields[1], path);
        seg.phoneme = fields[2];
        seg.word = fields[3];
        seg.speaker = fields[4];
        if (!(seg.start < seg.end))
            throw DataError("alignment segment with non-positive duration in " + path.string());
        if (!segments.empty() && seg.start < segments.back().end - 1e-9)
            throw DataError("overlapping alignment segments in " + path.string());
        segments.push_back(std::move(seg));
    }
    return segments;
}

std::vector<abx::PhoneToken> tokens_from_alignment(const std::vector<AlignmentSegment>& segments,
                                                   const std::string& utterance) {
    std::vector<abx::PhoneToken> tokens;
    tokens.reserve(segments.size());
    for (std::size_t i = 0; i < segments.size(); ++i) {
        abx::PhoneToken t;
        t.utterance = utterance;
        t.label = segments[i].phoneme;
        t.start = segments[i].start;
        t.end = segments[i].end;
        t.speaker = segments[i].speaker;
        t.prev_label = i > 0 ? segments[i - 1].phoneme : abx::kEdgeContext;
        t.next_label = i + 1 < segments.size() ? segments[i + 1].phoneme : abx::kEdgeContext;
        tokens.push_back(std::move(t));
    }
    return tokens;
}

abx::ClassMap read_class_map(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open class map: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError("class map missing header: " + path.string());
    const auto header = split_tabs(line);
    if (header.size() < 2 || header[0] != "phoneme" || header[1] != "class")
        throw DataError("class map header must be phoneme\tclass: " + path.string());

    abx::ClassMap map;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split_tabs(line);
        if (fields.size() < 2) throw DataError("class map row with fewer than 2 fields");
        if (fields[1] == "vowel")
            map[fields[0]] = abx::PhonemeClass::Vowel;
        else if (fields[1] == "consonant")
            map[fields[0]] = abx::PhonemeClass::Consonant;
        else
            throw DataError("class must be vowel or consonant, got '" + fields[1] + "' for " +
                            fields[0]);
    }
    return map;
}

void write_class_map(const std::filesystem::path& path, const abx::ClassMap& class_map) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write class map: " + path.string());
    out << "phoneme\tclass\n";
    for (const auto& [label, cls] : class_map)
        out << label << '\t' << (cls == abx::PhonemeClass::Vowel ? "vowel" : "consonant")
            << "\n";
}

}  // namespace avphon::io
