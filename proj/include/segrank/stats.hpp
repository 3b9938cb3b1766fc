#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include "segrank/errors.hpp"
#include "segrank/text.hpp"

namespace segrank {

/// N-gram frequency table. Keys are normalized (lowercase, single-spaced)
/// token sequences; absent keys count as zero. Immutable after load.
struct NGramStats {
    std::unordered_map<std::string, std::int64_t> entries;
    std::int64_t total_unigrams = 0;
    int max_order = 1;

    /// Frequency of an n-gram, normalizing the argument first. Absent -> 0.
    std::int64_t freq(std::string_view ngram) const {
        auto it = entries.find(normalize(ngram));
        return it == entries.end() ? 0 : it->second;
    }

    std::int64_t freq_tokens(const std::string* first, std::size_t count) const {
        return freq(join(first, count));
    }
};

/// Membership set of normalized Wikipedia titles.
struct TitleSet {
    std::unordered_set<std::string> titles;

    bool contains(std::string_view s) const {
        return titles.count(normalize(s)) > 0;
    }

    bool contains_tokens(const std::string* first, std::size_t count) const {
        return contains(join(first, count));
    }
};

namespace detail {

inline std::int64_t parse_count(std::string_view s, const std::string& path, std::size_t line_no) {
    std::int64_t value = 0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end || s.empty() || value < 0) {
        throw DataError(path + ": line " + std::to_string(line_no) + ": expected a non-negative integer count, got '" + std::string(s) + "'");
    }
    return value;
}

inline void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace detail

/// Loads an n-gram frequency snapshot from a `ngram<TAB>count` TSV.
/// Duplicate keys are summed. total_unigrams is the sum of unigram counts
/// unless a `__TOTAL__<TAB>count` override line is present (last one wins).
inline NGramStats load_stats(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open n-gram stats file: " + path);

    NGramStats stats;
    std::int64_t unigram_sum = 0;
    bool has_override = false;
    std::int64_t override_total = 0;

    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw DataError(path + ": line " + std::to_string(line_no) + ": missing tab separator");
        }
        std::string_view key_raw(line.data(), tab);
        std::string_view count_raw(line.data() + tab + 1, line.size() - tab - 1);
        std::int64_t count = detail::parse_count(count_raw, path, line_no);
        if (key_raw == "__TOTAL__") {
            has_override = true;
            override_total = count;
            continue;
        }
        std::string key = normalize(key_raw);
        if (key.empty()) {
            throw DataError(path + ": line " + std::to_string(line_no) + ": empty n-gram");
        }
        stats.entries[key] += count;
        int order = token_count(key);
        if (order > stats.max_order) stats.max_order = order;
        if (order == 1) unigram_sum += count;
    }
    stats.total_unigrams = has_override ? override_total : unigram_sum;
    return stats;
}

/// Loads a title set from a file with one title per line. Titles are
/// normalized the same way as membership queries; blank lines are skipped.
inline TitleSet load_titles(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open title file: " + path);
    TitleSet set;
    std::string line;
    while (std::getline(in, line)) {
        detail::strip_cr(line);
        std::string key = normalize(line);
        if (!key.empty()) set.titles.insert(std::move(key));
    }
    return set;
}

/// Pointwise mutual information of two token strings with add-one smoothing
/// on every count:
///   log( (freq(left+right)+1) * (total+1) / ((freq(left)+1) * (freq(right)+1)) )
inline double pmi(const NGramStats& stats, std::string_view left, std::string_view right) {
    if (stats.total_unigrams == 0) {
        throw DataError("pmi: n-gram statistics have zero total unigram mass");
    }
    std::string l = normalize(left);
    std::string r = normalize(right);
    if (l.empty() || r.empty()) {
        throw DataError("pmi: empty n-gram argument");
    }
    double joint = static_cast<double>(stats.freq(l + " " + r) + 1);
    double fl = static_cast<double>(stats.freq(l) + 1);
    double fr = static_cast<double>(stats.freq(r) + 1);
    double total = static_cast<double>(stats.total_unigrams + 1);
    return std::log(joint * total / (fl * fr));
}

inline double pmi_tokens(const NGramStats& stats,
                         const std::string* left, std::size_t left_count,
                         const std::string* right, std::size_t right_count) {
    return pmi(stats, join(left, left_count), join(right, right_count));
}

}  // namespace segrank
