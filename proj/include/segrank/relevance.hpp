#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "segrank/errors.hpp"
#include "segrank/segmentation.hpp"
#include "segrank/text.hpp"

namespace segrank {

inline constexpr std::size_t kBaseFieldCount = 7;
inline constexpr std::size_t kKeyFieldIndex = 7;
inline constexpr std::array<const char*, 8> kFieldNames = {
    "url",    "title", "body",      "meta_keywords",
    "meta_description", "anchor",   "associated_queries", "key_ngram"};

/// A multi-field document. Field texts are stored as lowercased token
/// sequences; the key_ngram field is built from the body, not ingested.
struct Document {
    std::string id;
    std::array<std::vector<std::string>, 8> fields;
    bool has_key = false;
};

/// Dual word/phrase query representation. word_ngrams[o-1] holds the order-o
/// n-grams over the original query words, phrase_ngrams[o-1] the order-o
/// n-grams over whole segments, both as space-joined lowercase strings.
/// words/phrases keep the underlying units (a phrase unit is a full segment)
/// for counting models that need unit boundaries.
struct DualQueryRep {
    std::array<std::vector<std::string>, 3> word_ngrams;
    std::array<std::vector<std::string>, 3> phrase_ngrams;
    std::vector<std::vector<std::string>> words;
    std::vector<std::vector<std::string>> phrases;
};

inline DualQueryRep build_dual_rep(const Query& query, const Segmentation& seg) {
    if (seg.breaks.size() + 1 != query.size()) {
        throw DataError("build_dual_rep: segmentation is over a different query");
    }
    DualQueryRep rep;
    for (const auto& t : query.tokens) {
        rep.words.push_back({to_lower(t)});
    }
    for (Span s : seg.segments) {
        std::vector<std::string> unit;
        unit.reserve(s.len);
        for (std::size_t i = 0; i < s.len; ++i) {
            unit.push_back(to_lower(query.tokens[s.start + i]));
        }
        rep.phrases.push_back(std::move(unit));
    }
    auto fill = [](const std::vector<std::vector<std::string>>& units,
                   std::array<std::vector<std::string>, 3>& out) {
        for (std::size_t order = 1; order <= 3; ++order) {
            if (units.size() + 1 <= order) continue;
            for (std::size_t i = 0; i + order <= units.size(); ++i) {
                std::string gram;
                for (std::size_t u = 0; u < order; ++u) {
                    if (!gram.empty()) gram += ' ';
                    gram += join(units[i + u]);
                }
                out[order - 1].push_back(std::move(gram));
            }
        }
    };
    fill(rep.words, rep.word_ngrams);
    fill(rep.phrases, rep.phrase_ngrams);
    return rep;
}

/// Per-field collection statistics: document count, n-gram document
/// frequencies (token runs up to a bounded length), and the average order-o
/// n-gram document length |field| - o + 1.
struct FieldStats {
    std::int64_t doc_count = 0;
    std::unordered_map<std::string, std::int64_t> df;
    std::array<double, 3> avg_len = {0.0, 0.0, 0.0};
};

struct CollectionStats {
    std::array<FieldStats, 8> fields;
    std::int64_t doc_count = 0;
    bool has_key = false;
};

inline CollectionStats build_collection_stats(const std::vector<Document>& docs,
                                              std::size_t max_df_token_len = 8) {
    CollectionStats stats;
    stats.doc_count = static_cast<std::int64_t>(docs.size());
    bool any_key = false, all_key = !docs.empty();
    for (const auto& d : docs) {
        if (d.has_key) {
            any_key = true;
        } else {
            all_key = false;
        }
    }
    if (any_key && !all_key) {
        throw DataError("collection mixes documents with and without a key_ngram field");
    }
    stats.has_key = any_key && all_key;
    const std::size_t field_count = stats.has_key ? 8 : kBaseFieldCount;

    std::array<std::array<double, 3>, 8> len_sums{};
    for (const auto& doc : docs) {
        for (std::size_t f = 0; f < field_count; ++f) {
            const auto& tokens = doc.fields[f];
            for (std::size_t o = 1; o <= 3; ++o) {
                len_sums[f][o - 1] += tokens.size() + 1 > o
                                          ? static_cast<double>(tokens.size() + 1 - o)
                                          : 0.0;
            }
            std::set<std::string> seen;
            const std::size_t max_len = std::min(max_df_token_len, tokens.size());
            for (std::size_t len = 1; len <= max_len; ++len) {
                for (std::size_t i = 0; i + len <= tokens.size(); ++i) {
                    seen.insert(join(tokens.data() + i, len));
                }
            }
            for (const auto& g : seen) {
                ++stats.fields[f].df[g];
            }
        }
    }
    for (std::size_t f = 0; f < 8; ++f) {
        stats.fields[f].doc_count = stats.doc_count;
        if (stats.doc_count > 0) {
            for (std::size_t o = 0; o < 3; ++o) {
                stats.fields[f].avg_len[o] = len_sums[f][o] / static_cast<double>(stats.doc_count);
            }
        }
    }
    return stats;
}

// --- token-run counting ------------------------------------------------------

/// Start positions of the gram as a contiguous token run within the field.
inline std::vector<std::size_t> run_positions(const std::vector<std::string>& field,
                                              const std::vector<std::string>& gram) {
    std::vector<std::size_t> out;
    if (gram.empty() || field.size() < gram.size()) return out;
    for (std::size_t i = 0; i + gram.size() <= field.size(); ++i) {
        bool hit = true;
        for (std::size_t k = 0; k < gram.size(); ++k) {
            if (field[i + k] != gram[k]) {
                hit = false;
                break;
            }
        }
        if (hit) out.push_back(i);
    }
    return out;
}

inline std::size_t count_runs(const std::vector<std::string>& field,
                              const std::vector<std::string>& gram) {
    return run_positions(field, gram).size();
}

/// Exact-adjacent co-occurrences of two units: occurrences of the
/// concatenated token run.
inline std::size_t count_adjacent(const std::vector<std::string>& field,
                                  const std::vector<std::string>& unit_a,
                                  const std::vector<std::string>& unit_b) {
    std::vector<std::string> cat = unit_a;
    cat.insert(cat.end(), unit_b.begin(), unit_b.end());
    return count_runs(field, cat);
}

/// Unordered within-window co-occurrences of two units. The distance between
/// two runs is the gap between their nearest endpoints plus one, so adjacent
/// runs are at distance 1 and for single words the distance equals the
/// position difference; pairs at distance < window are counted, in either
/// order. Identical units count each unordered occurrence pair once.
inline std::size_t count_window_cooccurrences(const std::vector<std::string>& field,
                                              const std::vector<std::string>& unit_a,
                                              const std::vector<std::string>& unit_b,
                                              std::size_t window = 8) {
    if (window < 2) {
        throw ConfigError("window must be >= 2, got " + std::to_string(window));
    }
    const auto pa = run_positions(field, unit_a);
    if (pa.empty()) return 0;
    const bool same = unit_a == unit_b;
    const auto pb = same ? pa : run_positions(field, unit_b);
    if (pb.empty()) return 0;
    const auto la = static_cast<std::int64_t>(unit_a.size());
    const auto lb = static_cast<std::int64_t>(unit_b.size());
    const auto win = static_cast<std::int64_t>(window);

    std::size_t ordered = 0;
    for (std::size_t ia = 0; ia < pa.size(); ++ia) {
        const auto i = static_cast<std::int64_t>(pa[ia]);
        // b at p >= i needs p - (i + la) + 1 < window; b at p < i needs
        // i - (p + lb) + 1 < window. Both bounds form one contiguous range.
        const std::int64_t lo = i - lb - win + 2;
        const std::int64_t hi = i + la + win - 2;  // >= 1 since la >= 1 and win >= 2
        auto first = std::lower_bound(pb.begin(), pb.end(), lo < 0 ? 0 : static_cast<std::size_t>(lo));
        auto last = std::upper_bound(pb.begin(), pb.end(), static_cast<std::size_t>(hi));
        std::size_t hits = static_cast<std::size_t>(last - first);
        if (same && hits > 0) --hits;  // exclude the occurrence pairing with itself
        ordered += hits;
    }
    return same ? ordered / 2 : ordered;
}

// --- n-gram BM25 --------------------------------------------------------------

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

/// Floored Robertson-Sparck-Jones inverse document frequency.
inline double floored_idf(std::int64_t doc_count, std::int64_t df) {
    double idf = std::log((static_cast<double>(doc_count - df) + 0.5) /
                          (static_cast<double>(df) + 0.5));
    return idf > 0.0 ? idf : 0.0;
}

/// BM25 over the distinct n-grams of one query vector against one field.
/// tf counts contiguous token-run occurrences; the document length is the
/// order-adjusted n-gram length |field| - order + 1.
inline double ngram_bm25(const std::vector<std::string>& ngrams,
                         const std::vector<std::string>& field_tokens,
                         const FieldStats& fs, int order, double k1, double b) {
    if (order < 1 || order > 3) throw ConfigError("ngram_bm25: order must be 1..3");
    if (k1 <= 0.0) throw ConfigError("ngram_bm25: k1 must be positive");
    if (b < 0.0 || b > 1.0) throw ConfigError("ngram_bm25: b must be in [0,1]");
    const double len = field_tokens.size() + 1 > static_cast<std::size_t>(order)
                           ? static_cast<double>(field_tokens.size() + 1 - order)
                           : 0.0;
    if (len > 0.0 && fs.avg_len[order - 1] == 0.0) {
        throw DataError("ngram_bm25: zero average length for a non-empty field");
    }
    double score = 0.0;
    std::set<std::string> seen;
    for (const auto& gram : ngrams) {
        if (!seen.insert(gram).second) continue;  // distinct grams, first-occurrence order
        const double tf = static_cast<double>(count_runs(field_tokens, split_ws(gram)));
        if (tf == 0.0) continue;
        auto it = fs.df.find(gram);
        const std::int64_t df = it == fs.df.end() ? 0 : it->second;
        const double idf = floored_idf(fs.doc_count, df);
        const double norm = 1.0 - b + b * len / fs.avg_len[order - 1];
        score += idf * tf * (k1 + 1.0) / (tf + k1 * norm);
    }
    return score;
}

enum class Scheme { bm25, kn, dm };

inline std::size_t feature_count(Scheme scheme) {
    switch (scheme) {
        case Scheme::bm25: return 42;
        case Scheme::kn: return 48;
        case Scheme::dm: return 294;
    }
    throw InternalError("unknown scheme");
}

/// Whether the given feature column belongs to the phrase-based half.
inline bool is_phrase_cell(Scheme scheme, std::size_t index) {
    if (scheme == Scheme::dm) return (index / 21) % 2 == 1;
    return index % 6 >= 3;
}

inline constexpr std::array<const char*, 3> kDmFreqNames = {"unigram_tf", "bigram_adjacent", "bigram_window"};

/// Stable, documented column name of one feature cell.
inline std::string cell_name(Scheme scheme, std::size_t index) {
    if (index >= feature_count(scheme)) throw InternalError("cell index out of range");
    if (scheme == Scheme::dm) {
        std::size_t ftype = index % 3;
        std::size_t src = (index / 3) % 7;
        std::size_t rep = (index / 21) % 2;
        std::size_t field = index / 42;
        return std::string("dm:") + kFieldNames[field] + (rep ? ":phrase:" : ":word:") +
               "w" + std::to_string(src + 1) + ":" + kDmFreqNames[ftype];
    }
    std::size_t order = index % 3 + 1;
    std::size_t rep = (index / 3) % 2;
    std::size_t field = index / 6;
    return std::string(scheme == Scheme::kn ? "kn:" : "bm25:") + kFieldNames[field] +
           (rep ? ":phrase:" : ":word:") + std::to_string(order);
}

/// The 42 BM25 features: field-major over the seven base fields, word vector
/// before phrase vector, orders 1..3 innermost.
inline std::vector<double> bm25_features(const Document& doc, const DualQueryRep& rep,
                                         const CollectionStats& stats,
                                         const Bm25Params& params = {}) {
    std::vector<double> out;
    out.reserve(42);
    for (std::size_t f = 0; f < kBaseFieldCount; ++f) {
        for (int r = 0; r < 2; ++r) {
            const auto& vecs = r == 0 ? rep.word_ngrams : rep.phrase_ngrams;
            for (int order = 1; order <= 3; ++order) {
                out.push_back(ngram_bm25(vecs[order - 1], doc.fields[f], stats.fields[f],
                                         order, params.k1, params.b));
            }
        }
    }
    return out;
}

/// tf-idf key n-gram selection from the body: n-grams of orders 1..3 pooled,
/// scored tf * floored idf, tie-broken by first occurrence, then order, then
/// the gram string. Returns the new field's token sequence (selected grams
/// concatenated in score order).
inline std::vector<std::string> extract_key_ngrams(const std::vector<std::string>& body,
                                                   int budget,
                                                   const FieldStats& body_stats) {
    if (budget < 1) throw ConfigError("extract_key_ngrams: budget must be >= 1");
    struct Entry {
        std::string gram;
        double score;
        std::size_t first_pos;
        std::size_t order;
    };
    std::vector<Entry> entries;
    std::unordered_map<std::string, std::size_t> index;
    for (std::size_t order = 1; order <= 3 && order <= body.size(); ++order) {
        for (std::size_t i = 0; i + order <= body.size(); ++i) {
            std::string gram = join(body.data() + i, order);
            auto [it, fresh] = index.emplace(gram, entries.size());
            if (fresh) {
                entries.push_back({std::move(gram), 0.0, i, order});
            }
            entries[it->second].score += 1.0;  // raw tf for now
        }
    }
    for (auto& e : entries) {
        auto it = body_stats.df.find(e.gram);
        const std::int64_t df = it == body_stats.df.end() ? 0 : it->second;
        e.score *= floored_idf(body_stats.doc_count, df);
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.first_pos != b.first_pos) return a.first_pos < b.first_pos;
        if (a.order != b.order) return a.order < b.order;
        return a.gram < b.gram;
    });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < entries.size() && i < static_cast<std::size_t>(budget); ++i) {
        auto toks = split_ws(entries[i].gram);
        out.insert(out.end(), toks.begin(), toks.end());
    }
    return out;
}

/// The 48 key-n-gram-model features: the 42 BM25 cells plus six for the
/// key_ngram field, same ordering convention.
inline std::vector<double> kn_features(const Document& doc, const DualQueryRep& rep,
                                       const CollectionStats& stats,
                                       const Bm25Params& params = {}) {
    if (!doc.has_key || !stats.has_key) {
        throw DataError("kn_features: key_ngram field has not been built");
    }
    std::vector<double> out = bm25_features(doc, rep, stats, params);
    for (int r = 0; r < 2; ++r) {
        const auto& vecs = r == 0 ? rep.word_ngrams : rep.phrase_ngrams;
        for (int order = 1; order <= 3; ++order) {
            out.push_back(ngram_bm25(vecs[order - 1], doc.fields[kKeyFieldIndex],
                                     stats.fields[kKeyFieldIndex], order, params.k1, params.b));
        }
    }
    return out;
}

/// Per-(order, source) weights for dependency-model concepts. The constant
/// provider returns 1 for every n-gram; a TSV-backed provider returns the
/// listed seven weights and zeros for unlisted n-grams.
struct DmWeightProvider {
    std::unordered_map<std::string, std::array<double, 7>> table;
    std::array<double, 7> fallback{};

    std::array<double, 7> get(const std::string& ngram) const {
        auto it = table.find(ngram);
        return it == table.end() ? fallback : it->second;
    }

    static DmWeightProvider constant(double value = 1.0) {
        DmWeightProvider p;
        p.fallback.fill(value);
        return p;
    }

    static DmWeightProvider from_tsv(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open dependency weight file: " + path);
        DmWeightProvider p;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty()) continue;
            std::vector<std::string> cols;  // split on tabs; the gram itself may contain spaces
            std::size_t start = 0;
            while (start <= line.size()) {
                auto tab = line.find('\t', start);
                if (tab == std::string::npos) {
                    cols.push_back(line.substr(start));
                    break;
                }
                cols.push_back(line.substr(start, tab - start));
                start = tab + 1;
            }
            if (cols.size() != 8) {
                throw DataError(path + ": line " + std::to_string(line_no) +
                                ": expected ngram + 7 weights, got " + std::to_string(cols.size()) + " columns");
            }
            std::array<double, 7> w{};
            for (std::size_t i = 0; i < 7; ++i) {
                try {
                    w[i] = std::stod(cols[i + 1]);
                } catch (const std::exception&) {
                    throw DataError(path + ": line " + std::to_string(line_no) + ": bad weight '" + cols[i + 1] + "'");
                }
            }
            p.table[normalize(cols[0])] = w;
        }
        return p;
    }
};

/// The 294 dependency-model features: field-major (seven base fields), word
/// vector before phrase vector, then the seven weight sources, then the three
/// frequency types (unigram tf, bigram exact-adjacent, bigram unordered
/// within-window), every count normalized by the field's n-gram length.
/// Sums run over the representation multiset as-is (repeats contribute per
/// occurrence).
inline std::vector<double> dm_features(const Document& doc, const DualQueryRep& rep,
                                       const DmWeightProvider& weights, std::size_t window = 8) {
    if (window < 2) {
        throw ConfigError("dm_features: window must be >= 2, got " + std::to_string(window));
    }
    std::vector<double> out(294, 0.0);
    for (std::size_t f = 0; f < kBaseFieldCount; ++f) {
        const auto& field = doc.fields[f];
        const double len1 = static_cast<double>(field.size());
        const double len2 = field.empty() ? 0.0 : static_cast<double>(field.size() - 1);
        for (int r = 0; r < 2; ++r) {
            const auto& units = r == 0 ? rep.words : rep.phrases;
            const auto& grams1 = r == 0 ? rep.word_ngrams[0] : rep.phrase_ngrams[0];
            const auto& grams2 = r == 0 ? rep.word_ngrams[1] : rep.phrase_ngrams[1];
            const std::size_t base = (f * 2 + static_cast<std::size_t>(r)) * 21;
            for (std::size_t e = 0; e < grams1.size(); ++e) {
                const double norm_tf =
                    len1 > 0.0 ? static_cast<double>(count_runs(field, units[e])) / len1 : 0.0;
                if (norm_tf == 0.0) continue;
                const auto w = weights.get(grams1[e]);
                for (std::size_t s = 0; s < 7; ++s) {
                    out[base + s * 3 + 0] += w[s] * norm_tf;
                }
            }
            for (std::size_t e = 0; e < grams2.size(); ++e) {
                const auto& ua = units[e];
                const auto& ub = units[e + 1];
                const double adj =
                    len2 > 0.0 ? static_cast<double>(count_adjacent(field, ua, ub)) / len2 : 0.0;
                const double win =
                    len2 > 0.0
                        ? static_cast<double>(count_window_cooccurrences(field, ua, ub, window)) / len2
                        : 0.0;
                if (adj == 0.0 && win == 0.0) continue;
                const auto w = weights.get(grams2[e]);
                for (std::size_t s = 0; s < 7; ++s) {
                    out[base + s * 3 + 1] += w[s] * adj;
                    out[base + s * 3 + 2] += w[s] * win;
                }
            }
        }
    }
    return out;
}

}  // namespace segrank
