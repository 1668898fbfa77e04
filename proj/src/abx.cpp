#include "avphon/abx.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include <nlohmann/json.hpp>

namespace avphon::abx {

namespace {

using ordered_json = nlohmann::ordered_json;

const char* class_name(PhonemeClass c) {
    return c == PhonemeClass::Vowel ? "vowel" : "consonant";
}

uint64_t fnv1a(uint64_t h, const void* data, std::size_t bytes) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

uint64_t fnv1a_str(uint64_t h, const std::string& s) { return fnv1a(h, s.data(), s.size()); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace

AbxBattery build_battery(std::vector<PhoneToken> tokens, const ClassMap& class_map,
                         const BatteryOptions& options) {
    for (const auto& t : tokens) {
        if (!(t.start < t.end))
            throw DataError("token '" + t.label + "' in " + t.utterance +
                            " has non-positive duration");
        if (!class_map.count(t.label))
            throw DataError("phoneme label not in class map: " + t.label);
    }
    std::sort(tokens.begin(), tokens.end(), [](const PhoneToken& a, const PhoneToken& b) {
        return std::tie(a.utterance, a.start) < std::tie(b.utterance, b.start);
    });

    // Group token indices by (speaker?, context, label).
    using GroupKey = std::tuple<std::string, std::string, std::string>;  // speaker, prev, next
    std::map<GroupKey, std::map<std::string, std::vector<int>>> groups;
    for (int i = 0; i < static_cast<int>(tokens.size()); ++i) {
        const auto& t = tokens[static_cast<std::size_t>(i)];
        GroupKey key{options.within_speaker ? t.speaker : std::string(), t.prev_label,
                     t.next_label};
        groups[key][t.label].push_back(i);
    }

    AbxBattery battery;
    battery.tokens = std::move(tokens);
    for (const auto& [key, by_label] : groups) {
        for (const auto& [label_x, xs] : by_label) {
            for (const auto& [label_b, bs] : by_label) {
                if (label_x == label_b) continue;
                if (class_map.at(label_x) != class_map.at(label_b)) continue;
                for (int x : xs)
                    for (int a : xs) {
                        if (a == x) continue;
                        for (int b : bs) battery.triples.push_back({a, b, x});
                    }
            }
        }
    }
    return battery;
}

std::pair<int, int> window_span(const WindowGrid& grid, double start, double end) {
    const auto& c = grid.centers;
    const auto lo = std::lower_bound(c.begin(), c.end(), start);
    const auto hi = std::lower_bound(c.begin(), c.end(), end);
    return {static_cast<int>(lo - c.begin()), static_cast<int>(hi - c.begin())};
}

double js_divergence(const Eigen::Ref<const Vec>& p, const Eigen::Ref<const Vec>& q,
                     double floor) {
    if (p.size() != q.size())
        throw DataError("js divergence: support sizes differ (" + std::to_string(p.size()) +
                        " vs " + std::to_string(q.size()) + ")");
    Vec pf = p.cwiseMax(floor);
    Vec qf = q.cwiseMax(floor);
    pf /= pf.sum();
    qf /= qf.sum();
    // 0.5*sum p ln(p/q) + 0.5*sum q ln(q/p) = 0.5*sum (p-q) ln(p/q), with each
    // term evaluated in canonical order so symmetry is exact and every term
    // is nonnegative.
    double total = 0.0;
    for (Eigen::Index c = 0; c < pf.size(); ++c) {
        const double hi = std::max(pf[c], qf[c]);
        const double lo = std::min(pf[c], qf[c]);
        if (hi > lo) total += (hi - lo) * std::log(hi / lo);
    }
    return 0.5 * total;
}

double dtw_dissimilarity(const PosteriorToken& s1, const PosteriorToken& s2) {
    if (s1.empty() || s2.empty()) throw DataError("dtw on empty posterior token");
    const int n = static_cast<int>(s1.frames.size());
    const int m = static_cast<int>(s2.frames.size());

    Mat cost(n, m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            cost(i, j) = js_divergence(s1.frames[static_cast<std::size_t>(i)],
                                       s2.frames[static_cast<std::size_t>(j)]);

    Mat acc(n, m);
    Eigen::MatrixXi len(n, m);
    acc(0, 0) = cost(0, 0);
    len(0, 0) = 1;
    for (int i = 1; i < n; ++i) {
        acc(i, 0) = acc(i - 1, 0) + cost(i, 0);
        len(i, 0) = i + 1;
    }
    for (int j = 1; j < m; ++j) {
        acc(0, j) = acc(0, j - 1) + cost(0, j);
        len(0, j) = j + 1;
    }
    for (int i = 1; i < n; ++i) {
        for (int j = 1; j < m; ++j) {
            // Diagonal preferred on exact ties.
            double best = acc(i - 1, j - 1);
            int best_len = len(i - 1, j - 1);
            if (acc(i - 1, j) < best) {
                best = acc(i - 1, j);
                best_len = len(i - 1, j);
            }
            if (acc(i, j - 1) < best) {
                best = acc(i, j - 1);
                best_len = len(i, j - 1);
            }
            acc(i, j) = best + cost(i, j);
            len(i, j) = best_len + 1;
        }
    }
    return acc(n - 1, m - 1) / len(n - 1, m - 1);
}

double score_triple(const PosteriorToken& a, const PosteriorToken& b, const PosteriorToken& x) {
    const double da = dtw_dissimilarity(a, x);
    const double db = dtw_dissimilarity(b, x);
    if (da < db) return 1.0;
    if (db < da) return 0.0;
    return 0.5;
}

ScoreReport aggregate(const AbxBattery& battery, const ClassMap& class_map,
                      const std::vector<double>& triple_scores, bool triple_weighted) {
    if (battery.triples.empty()) throw DataError("aggregate: empty battery");
    if (triple_scores.size() != battery.triples.size())
        throw DataError("aggregate: score count does not match triple count");

    struct Totals {
        double sum = 0.0;
        long count = 0;
    };
    std::map<std::pair<std::string, std::string>, Totals> per_contrast;
    for (std::size_t i = 0; i < battery.triples.size(); ++i) {
        const auto& triple = battery.triples[i];
        std::string la = battery.tokens[static_cast<std::size_t>(triple.x)].label;
        std::string lb = battery.tokens[static_cast<std::size_t>(triple.b)].label;
        if (lb < la) std::swap(la, lb);
        auto& totals = per_contrast[{la, lb}];
        totals.sum += triple_scores[i];
        totals.count += 1;
    }

    ScoreReport report;
    report.triple_weighted = triple_weighted;
    report.num_triples = static_cast<long>(battery.triples.size());
    report.battery_hash = battery_hash(battery);
    double overall_sum = 0.0;
    long overall_weight = 0;
    for (const auto& [pair, totals] : per_contrast) {
        ContrastScore cs;
        cs.label_a = pair.first;
        cs.label_b = pair.second;
        cs.phoneme_class = class_map.at(pair.first);
        cs.score = totals.sum / totals.count;
        cs.triples = totals.count;
        report.contrasts.push_back(cs);
        if (triple_weighted) {
            overall_sum += totals.sum;
            overall_weight += totals.count;
        } else {
            overall_sum += cs.score;
            overall_weight += 1;
        }
    }
    report.overall = overall_sum / overall_weight;
    return report;
}

double relative_improvement(double test_score, double baseline_score) {
    if (baseline_score == 0.5) throw DataError("baseline at chance");
    return (test_score - baseline_score) / (baseline_score - 0.5);
}

namespace {

// Midranks of the pooled samples, then U1 = R1 - n1(n1+1)/2.
double u_statistic(const std::vector<double>& ranks, int n1) {
    double r1 = 0.0;
    for (int i = 0; i < n1; ++i) r1 += ranks[static_cast<std::size_t>(i)];
    return r1 - n1 * (n1 + 1) / 2.0;
}

std::vector<double> midranks(const std::vector<double>& pooled) {
    const int n = static_cast<int>(pooled.size());
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return pooled[static_cast<std::size_t>(a)] <
                                         pooled[static_cast<std::size_t>(b)]; });
    std::vector<double> ranks(static_cast<std::size_t>(n));
    int i = 0;
    while (i < n) {
        int j = i;
        while (j + 1 < n && pooled[static_cast<std::size_t>(order[static_cast<std::size_t>(
                                j + 1)])] ==
                                pooled[static_cast<std::size_t>(order[static_cast<std::size_t>(
                                    i)])])
            ++j;
        const double rank = (i + j) / 2.0 + 1.0;
        for (int k = i; k <= j; ++k)
            ranks[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = rank;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

MannWhitneyResult mann_whitney_u(const std::vector<double>& sample1,
                                 const std::vector<double>& sample2) {
    const int n1 = static_cast<int>(sample1.size());
    const int n2 = static_cast<int>(sample2.size());
    if (n1 == 0 || n2 == 0) throw DataError("mann-whitney: empty sample");

    std::vector<double> pooled = sample1;
    pooled.insert(pooled.end(), sample2.begin(), sample2.end());
    const std::vector<double> ranks = midranks(pooled);

    MannWhitneyResult result;
    result.u = u_statistic(ranks, n1);
    const double mu = n1 * static_cast<double>(n2) / 2.0;
    const double dev = std::abs(result.u - mu);

    if (n1 <= 10 && n2 <= 10) {
        // Exact: enumerate which pooled positions belong to sample 1 and count
        // arrangements at least as extreme (by |U - mean|) as observed.
        const int n = n1 + n2;
        std::vector<int> pick(static_cast<std::size_t>(n1));
        std::iota(pick.begin(), pick.end(), 0);
        long total = 0, extreme = 0;
        while (true) {
            double r1 = 0.0;
            for (int idx : pick) r1 += ranks[static_cast<std::size_t>(idx)];
            const double u = r1 - n1 * (n1 + 1) / 2.0;
            ++total;
            if (std::abs(u - mu) >= dev - 1e-12) ++extreme;
            // next combination
            int i = n1 - 1;
            while (i >= 0 && pick[static_cast<std::size_t>(i)] == n - n1 + i) --i;
            if (i < 0) break;
            ++pick[static_cast<std::size_t>(i)];
            for (int j = i + 1; j < n1; ++j)
                pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
        }
        result.p = static_cast<double>(extreme) / static_cast<double>(total);
        return result;
    }

    // Normal approximation with tie correction.
    const int n = n1 + n2;
    std::map<double, int> tie_counts;
    for (double v : pooled) tie_counts[v] += 1;
    double tie_term = 0.0;
    for (const auto& [value, t] : tie_counts) tie_term += static_cast<double>(t) * t * t - t;
    const double var = n1 * static_cast<double>(n2) / 12.0 *
                       ((n + 1) - tie_term / (static_cast<double>(n) * (n - 1)));
    if (var <= 0.0) {
        result.p = 1.0;
        return result;
    }
    const double z = (dev - 0.5) / std::sqrt(var);
    result.p = std::clamp(2.0 * (1.0 - normal_cdf(std::max(z, 0.0))), 0.0, 1.0);
    return result;
}

uint64_t battery_hash(const AbxBattery& battery) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& t : battery.tokens) {
        h = fnv1a_str(h, t.utterance);
        h = fnv1a_str(h, t.label);
        h = fnv1a(h, &t.start, sizeof t.start);
        h = fnv1a(h, &t.end, sizeof t.end);
    }
    for (const auto& tr : battery.triples) {
        h = fnv1a(h, &tr.a, sizeof tr.a);
        h = fnv1a(h, &tr.b, sizeof tr.b);
        h = fnv1a(h, &tr.x, sizeof tr.x);
    }
    return h;
}

void save_battery_csv(const std::filesystem::path& path, const AbxBattery& battery) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write battery csv: " + path.string());
    out << "a_utt,a_label,a_start,b_utt,b_label,b_start,x_utt,x_label,x_start,prev,next\n";
    char buf[64];
    auto cell = [&](const PhoneToken& t) {
        std::snprintf(buf, sizeof buf, "%.6f", t.start);
        out << t.utterance << ',' << t.label << ',' << buf;
    };
    for (const auto& tr : battery.triples) {
        const auto& a = battery.tokens[static_cast<std::size_t>(tr.a)];
        const auto& b = battery.tokens[static_cast<std::size_t>(tr.b)];
        const auto& x = battery.tokens[static_cast<std::size_t>(tr.x)];
        cell(a);
        out << ',';
        cell(b);
        out << ',';
        cell(x);
        out << ',' << x.prev_label << ',' << x.next_label << "\n";
    }
}

void save_triple_scores_csv(const std::filesystem::path& path, const AbxBattery& battery,
                            const std::vector<double>& scores) {
    if (scores.size() != battery.triples.size())
        throw DataError("triple score csv: score count mismatch");
    std::ofstream out(path);
    if (!out) throw DataError("cannot write scores csv: " + path.string());
    out << "x_label,b_label,prev,next,score\n";
    for (std::size_t i = 0; i < battery.triples.size(); ++i) {
        const auto& x = battery.tokens[static_cast<std::size_t>(battery.triples[i].x)];
        const auto& b = battery.tokens[static_cast<std::size_t>(battery.triples[i].b)];
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.1f", scores[i]);
        out << x.label << ',' << b.label << ',' << x.prev_label << ',' << x.next_label << ','
            << buf << "\n";
    }
}

void save_report_json(const std::filesystem::path& path, const ScoreReport& report) {
    ordered_json j;
    j["schema_version"] = 1;
    j["overall"] = report.overall;
    j["weighting"] = report.triple_weighted ? "triple_weighted" : "equal_contrast";
    j["num_triples"] = report.num_triples;
    j["num_tokens_excluded"] = report.num_tokens_excluded;
    j["battery_hash"] = report.battery_hash;
    ordered_json contrasts = ordered_json::array();
    for (const auto& c : report.contrasts) {
        contrasts.push_back({{"label_a", c.label_a},
                             {"label_b", c.label_b},
                             {"class", class_name(c.phoneme_class)},
                             {"score", c.score},
                             {"triples", c.triples}});
    }
    j["contrasts"] = std::move(contrasts);
    std::ofstream out(path);
    if (!out) throw DataError("cannot write report: " + path.string());
    out << j.dump(2) << "\n";
}

ScoreReport load_report_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open report: " + path.string());
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw DataError("malformed report json " + path.string() + ": " + e.what());
    }
    if (j.value("schema_version", 0) != 1)
        throw DataError("unsupported report schema in " + path.string());
    ScoreReport report;
    report.overall = j.at("overall").get<double>();
    report.triple_weighted = j.value("weighting", "equal_contrast") == std::string("triple_weighted");
    report.num_triples = j.at("num_triples").get<long>();
    report.num_tokens_excluded = j.value("num_tokens_excluded", 0L);
    report.battery_hash = j.value("battery_hash", 0ULL);
    for (const auto& c : j.at("contrasts")) {
        ContrastScore cs;
        cs.label_a = c.at("label_a").get<std::string>();
        cs.label_b = c.at("label_b").get<std::string>();
        cs.phoneme_class = c.at("class").get<std::string>() == "vowel" ? PhonemeClass::Vowel
                                                                       : PhonemeClass::Consonant;
        cs.score = c.at("score").get<double>();
        cs.triples = c.at("triples").get<long>();
        report.contrasts.push_back(std::move(cs));
    }
    return report;
}

}  // namespace avphon::abx
