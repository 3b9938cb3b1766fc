#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "segrank/errors.hpp"
#include "segrank/segmentation.hpp"

namespace segrank {

/// One query with one break vector per annotator.
struct AnnotatedQuery {
    Query query;
    std::vector<std::vector<std::uint8_t>> annotations;
};

/// Majority-vote break fusion: a break is kept where at least half of the
/// annotators placed one (with an even annotator count, exactly half
/// suffices).
inline Segmentation fuse_breaks(const AnnotatedQuery& aq) {
    const std::size_t n = aq.query.size();
    if (aq.annotations.empty()) {
        throw DataError("fuse_breaks: query '" + aq.query.raw + "' has no annotations");
    }
    for (const auto& a : aq.annotations) {
        if (a.size() != n - 1) {
            throw DataError("fuse_breaks: annotation length mismatch for query '" + aq.query.raw + "'");
        }
    }
    const std::size_t voters = aq.annotations.size();
    const std::size_t threshold = (voters + 1) / 2;  // ceil(A/2)
    std::vector<std::uint8_t> fused(n - 1, 0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        std::size_t votes = 0;
        for (const auto& a : aq.annotations) votes += a[i] ? 1 : 0;
        fused[i] = votes >= threshold ? 1 : 0;
    }
    return breaks_to_segments(aq.query, std::move(fused));
}

struct SegMetrics {
    double query_accuracy = 0.0;
    double segment_precision = 0.0;
    double segment_recall = 0.0;
    double segment_f = 0.0;
    double break_accuracy = 0.0;
};

enum class Averaging { micro, macro };

struct SegmentedQuery {
    Query query;
    Segmentation seg;
};

namespace detail {

inline double harmonic(double p, double r) {
    return (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

}  // namespace detail

/// The five segmentation measures over aligned prediction/gold lists.
/// Micro averaging pools segment and break counts across queries; macro
/// averages per-query ratios (queries with no break positions are skipped
/// for macro break accuracy).
inline SegMetrics evaluate(const std::vector<SegmentedQuery>& predictions,
                           const std::vector<SegmentedQuery>& golds,
                           Averaging averaging = Averaging::micro) {
    if (predictions.size() != golds.size()) {
        throw DataError("evaluate: prediction and gold lists differ in length");
    }
    if (predictions.empty()) {
        throw DataError("evaluate: no queries to evaluate");
    }
    std::size_t exact = 0;
    std::size_t matched_total = 0, pred_total = 0, gold_total = 0;
    std::size_t break_hits = 0, break_positions = 0;
    double macro_p = 0.0, macro_r = 0.0, macro_b = 0.0;
    std::size_t macro_b_count = 0;

    for (std::size_t q = 0; q < predictions.size(); ++q) {
        const auto& pred = predictions[q];
        const auto& gold = golds[q];
        if (pred.query.tokens != gold.query.tokens) {
            throw DataError("evaluate: query mismatch at entry " + std::to_string(q) +
                            " ('" + pred.query.raw + "' vs '" + gold.query.raw + "')");
        }
        if (pred.seg.breaks == gold.seg.breaks) ++exact;

        // Segments compare by token span, not surface string, so repeated
        // words cannot spuriously match.
        std::size_t matched = count_common_segments(pred.seg, gold.seg);
        matched_total += matched;
        pred_total += pred.seg.segment_count();
        gold_total += gold.seg.segment_count();
        macro_p += static_cast<double>(matched) / static_cast<double>(pred.seg.segment_count());
        macro_r += static_cast<double>(matched) / static_cast<double>(gold.seg.segment_count());

        std::size_t hits = 0;
        for (std::size_t i = 0; i < pred.seg.breaks.size(); ++i) {
            if (pred.seg.breaks[i] == gold.seg.breaks[i]) ++hits;
        }
        break_hits += hits;
        break_positions += pred.seg.breaks.size();
        if (!pred.seg.breaks.empty()) {
            macro_b += static_cast<double>(hits) / static_cast<double>(pred.seg.breaks.size());
            ++macro_b_count;
        }
    }

    const double nq = static_cast<double>(predictions.size());
    SegMetrics m;
    m.query_accuracy = static_cast<double>(exact) / nq;
    if (averaging == Averaging::micro) {
        m.segment_precision = pred_total ? static_cast<double>(matched_total) / static_cast<double>(pred_total) : 0.0;
        m.segment_recall = gold_total ? static_cast<double>(matched_total) / static_cast<double>(gold_total) : 0.0;
        m.break_accuracy = break_positions ? static_cast<double>(break_hits) / static_cast<double>(break_positions) : 1.0;
    } else {
        m.segment_precision = macro_p / nq;
        m.segment_recall = macro_r / nq;
        m.break_accuracy = macro_b_count ? macro_b / static_cast<double>(macro_b_count) : 1.0;
    }
    m.segment_f = detail::harmonic(m.segment_precision, m.segment_recall);
    return m;
}

}  // namespace segrank
