#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "segrank/errors.hpp"
#include "segrank/segmentation.hpp"
#include "segrank/stats.hpp"

namespace segrank {

/// Weight of a single segment:
///   title branch:  |s|^2 + |s| * max over contiguous 2-token substrings t of freq(t)
///                  (the max term is 0 for one-token titles)
///   otherwise:     |s| * freq(s)
inline double segment_weight(const Query& query, Span s,
                             const NGramStats& stats, const TitleSet& titles) {
    const std::string* first = query.tokens.data() + s.start;
    const double len = static_cast<double>(s.len);
    if (titles.contains_tokens(first, s.len)) {
        std::int64_t best = 0;
        for (std::size_t i = 0; i + 1 < s.len; ++i) {
            best = std::max(best, stats.freq_tokens(first + i, 2));
        }
        return len * len + len * static_cast<double>(best);
    }
    return len * static_cast<double>(stats.freq_tokens(first, s.len));
}

inline std::vector<double> segment_weights(const Query& query, const Segmentation& seg,
                                           const NGramStats& stats, const TitleSet& titles) {
    std::vector<double> out;
    out.reserve(seg.segments.size());
    for (Span s : seg.segments) {
        out.push_back(segment_weight(query, s, stats, titles));
    }
    return out;
}

/// Applies the scoring rule to precomputed per-segment weights: the sum over
/// multi-word segments when all of them have positive weight, -1 when any
/// multi-word segment has weight <= 0, and 0 when no multi-word segment
/// exists (empty sum).
inline double score_from_weights(const Segmentation& seg, const std::vector<double>& weights) {
    if (weights.size() != seg.segments.size()) {
        throw InternalError("segment weight vector does not match segment count");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < seg.segments.size(); ++i) {
        if (seg.segments[i].len < 2) continue;
        if (weights[i] <= 0.0) return -1.0;
        sum += weights[i];
    }
    return sum;
}

inline double segmentation_score(const Query& query, const Segmentation& seg,
                                 const NGramStats& stats, const TitleSet& titles) {
    return score_from_weights(seg, segment_weights(query, seg, stats, titles));
}

struct ScoredSegmentation {
    Segmentation segmentation;
    double score = 0.0;
    std::vector<double> segment_weights;
};

/// Ranked top-k segmentations of one query. Candidates are ordered by score
/// descending with lexicographic break-vector order breaking ties; score -1
/// candidates trail every non-negative one.
struct CandidateList {
    Query query;
    std::vector<ScoredSegmentation> candidates;
    int k = 0;
};

namespace detail {

struct Partial {
    double sum = 0.0;
    std::vector<std::uint8_t> breaks;  // full length n-1, zeros past the frontier
};

inline bool lex_less(const std::vector<std::uint8_t>& a, const std::vector<std::uint8_t>& b) {
    return a < b;
}

// Non-poisoned partials ordered by (sum desc, breaks lex asc).
inline bool score_order(const Partial& a, const Partial& b) {
    if (a.sum != b.sum) return a.sum > b.sum;
    return lex_less(a.breaks, b.breaks);
}

inline bool lex_order(const Partial& a, const Partial& b) {
    return lex_less(a.breaks, b.breaks);
}

template <typename Cmp>
inline void pool_insert(std::vector<Partial>& pool, Partial p, std::size_t cap, Cmp cmp) {
    auto it = std::upper_bound(pool.begin(), pool.end(), p, cmp);
    pool.insert(it, std::move(p));
    if (pool.size() > cap) pool.pop_back();
}

}  // namespace detail

/// Top-k segmentations by dynamic programming over prefix positions,
/// equivalent to exhaustively scoring every segmentation and sorting.
/// Per position three bounded pools are kept: the k best clean prefixes by
/// partial score, plus the k lexicographically smallest clean and poisoned
/// prefixes (a prefix is poisoned once it closes a multi-word segment of
/// non-positive weight; its final score is pinned at -1).
inline CandidateList topk(const Query& query, int k,
                          const NGramStats& stats, const TitleSet& titles) {
    if (k < 1) throw ConfigError("topk: k must be >= 1, got " + std::to_string(k));
    using detail::Partial;
    const std::size_t n = query.size();
    const std::size_t cap = static_cast<std::size_t>(k);

    // pools[state]: best = clean by (sum desc, lex), clean_lex / poisoned_lex by lex asc.
    struct Pools {
        std::vector<Partial> best, clean_lex, poisoned_lex;
    };
    std::vector<Pools> pools(n + 1);
    Partial start;
    start.breaks.assign(n - 1, 0);
    pools[0].best.push_back(start);
    pools[0].clean_lex.push_back(start);

    for (std::size_t i = 0; i < n; ++i) {
        if (pools[i].best.empty() && pools[i].poisoned_lex.empty()) continue;
        for (std::size_t j = i + 1; j <= n; ++j) {
            const std::size_t seg_len = j - i;
            double w = 0.0;
            bool clean_step = true;
            if (seg_len >= 2) {
                w = segment_weight(query, Span{i, seg_len}, stats, titles);
                clean_step = w > 0.0;
            }
            auto extend = [&](const Partial& p) {
                Partial q = p;
                if (j < n) q.breaks[j - 1] = 1;
                return q;
            };
            if (clean_step) {
                const double add = seg_len >= 2 ? w : 0.0;
                for (const Partial& p : pools[i].best) {
                    Partial q = extend(p);
                    q.sum += add;
                    detail::pool_insert(pools[j].best, std::move(q), cap, detail::score_order);
                }
                for (const Partial& p : pools[i].clean_lex) {
                    detail::pool_insert(pools[j].clean_lex, extend(p), cap, detail::lex_order);
                }
            } else {
                // A clean prefix closing a bad segment joins the poisoned pool.
                for (const Partial& p : pools[i].clean_lex) {
                    detail::pool_insert(pools[j].poisoned_lex, extend(p), cap, detail::lex_order);
                }
            }
            for (const Partial& p : pools[i].poisoned_lex) {
                detail::pool_insert(pools[j].poisoned_lex, extend(p), cap, detail::lex_order);
            }
        }
    }

    CandidateList out;
    out.query = query;
    out.k = k;
    auto emit = [&](const Partial& p, bool poisoned) {
        ScoredSegmentation cand;
        cand.segmentation = breaks_to_segments(query, p.breaks);
        cand.segment_weights = segment_weights(query, cand.segmentation, stats, titles);
        cand.score = poisoned ? -1.0 : p.sum;
        if (score_from_weights(cand.segmentation, cand.segment_weights) != cand.score) {
            throw InternalError("topk: accumulated score disagrees with recomputed score");
        }
        out.candidates.push_back(std::move(cand));
    };
    for (const Partial& p : pools[n].best) {
        if (out.candidates.size() >= cap) break;
        emit(p, false);
    }
    for (const Partial& p : pools[n].poisoned_lex) {
        if (out.candidates.size() >= cap) break;
        emit(p, true);
    }
    return out;
}

}  // namespace segrank
