#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "segrank/errors.hpp"
#include "segrank/text.hpp"

namespace segrank {

/// A tokenized query. Tokens keep their original casing; statistics lookups
/// normalize separately.
struct Query {
    std::string raw;
    std::vector<std::string> tokens;

    std::size_t size() const { return tokens.size(); }
};

/// A contiguous token span [start, start+len).
struct Span {
    std::size_t start = 0;
    std::size_t len = 0;

    friend bool operator==(const Span& a, const Span& b) {
        return a.start == b.start && a.len == b.len;
    }
};

/// Break vector plus the segment list it induces. breaks[i] == 1 places a
/// boundary between tokens i and i+1.
struct Segmentation {
    std::vector<std::uint8_t> breaks;
    std::vector<Span> segments;

    std::size_t segment_count() const { return segments.size(); }

    friend bool operator==(const Segmentation& a, const Segmentation& b) {
        return a.breaks == b.breaks;
    }
};

inline Query tokenize(std::string_view raw) {
    Query q;
    q.raw = std::string(raw);
    q.tokens = split_ws(raw);
    if (q.tokens.empty()) {
        throw DataError("empty query: no tokens in '" + q.raw + "'");
    }
    return q;
}

inline Segmentation breaks_to_segments(const Query& query, std::vector<std::uint8_t> breaks) {
    const std::size_t n = query.size();
    if (breaks.size() != n - 1) {
        throw DataError("break vector length " + std::to_string(breaks.size()) +
                        " does not match query of " + std::to_string(n) + " tokens");
    }
    Segmentation seg;
    seg.breaks = std::move(breaks);
    std::size_t start = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        if (seg.breaks[i]) {
            seg.segments.push_back({start, i + 1 - start});
            start = i + 1;
        }
    }
    seg.segments.push_back({start, n - start});
    return seg;
}

inline Segmentation all_singletons(const Query& query) {
    return breaks_to_segments(query, std::vector<std::uint8_t>(query.size() - 1, 1));
}

inline Segmentation single_segment(const Query& query) {
    return breaks_to_segments(query, std::vector<std::uint8_t>(query.size() - 1, 0));
}

/// All 2^(n-1) segmentations in lexicographic break-vector order
/// (break positions compared left to right, 0 before 1).
inline std::vector<Segmentation> enumerate_all(const Query& query, int limit = 16) {
    const std::size_t n = query.size();
    if (static_cast<int>(n) > limit) {
        throw DataError("query of " + std::to_string(n) + " tokens exceeds the enumeration bound of " + std::to_string(limit));
    }
    const std::size_t count = std::size_t{1} << (n - 1);
    std::vector<Segmentation> out;
    out.reserve(count);
    for (std::size_t mask = 0; mask < count; ++mask) {
        std::vector<std::uint8_t> breaks(n - 1, 0);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            breaks[i] = static_cast<std::uint8_t>((mask >> (n - 2 - i)) & 1u);
        }
        out.push_back(breaks_to_segments(query, std::move(breaks)));
    }
    return out;
}

/// Number of segments (as token spans) the two segmentations share.
inline std::size_t count_common_segments(const Segmentation& a, const Segmentation& b) {
    std::size_t matched = 0;
    for (Span sa : a.segments) {
        for (Span sb : b.segments) {
            if (sa == sb) {
                ++matched;
                break;
            }
        }
    }
    return matched;
}

/// Renders segments joined by " / ", e.g. "beijing / seven eleven / stores".
inline std::string to_slash_string(const Query& query, const Segmentation& seg) {
    std::string out;
    for (std::size_t s = 0; s < seg.segments.size(); ++s) {
        if (s > 0) out += " / ";
        out += join(query.tokens.data() + seg.segments[s].start, seg.segments[s].len);
    }
    return out;
}

/// Parses the slash notation back into a query and its segmentation.
inline std::pair<Query, Segmentation> parse_slash(std::string_view text) {
    auto parts = split_ws(text);
    Query q;
    q.raw = std::string(text);
    std::vector<std::uint8_t> breaks;
    bool pending_break = false;
    bool after_slash = true;  // a "/" may not open the string or follow another
    for (const auto& part : parts) {
        if (part == "/") {
            if (after_slash) throw DataError("malformed slash notation: '" + q.raw + "'");
            pending_break = true;
            after_slash = true;
        } else {
            if (!q.tokens.empty()) breaks.push_back(pending_break ? 1 : 0);
            pending_break = false;
            q.tokens.push_back(part);
            after_slash = false;
        }
    }
    if (q.tokens.empty() || after_slash) {
        throw DataError("malformed slash notation: '" + q.raw + "'");
    }
    q.raw = join(q.tokens);
    Segmentation seg = breaks_to_segments(q, std::move(breaks));
    return {std::move(q), std::move(seg)};
}

}  // namespace segrank
