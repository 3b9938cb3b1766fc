#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "segrank/errors.hpp"
#include "segrank/stats.hpp"
#include "segrank/wbn.hpp"

namespace segrank {

/// Words that tend to stand alone as one-word segments; each gets its own
/// indicator feature. The default list is a project choice (the count of
/// eighteen is fixed by the feature design, the words are configurable).
inline std::vector<std::string> default_indicator_words() {
    return {"and", "or",  "vs", "the", "a",    "an",  "of",  "for", "in",
            "on",  "at",  "to", "with", "by",  "from", "free", "new", "best"};
}

struct RerankConfig {
    std::vector<std::string> indicator_words = default_indicator_words();
};

/// Canonical feature order. The vector layout is fixed for the lifetime of a
/// model; models persist the names and loading validates them.
inline std::vector<std::string> feature_names(const RerankConfig& cfg) {
    std::vector<std::string> names = {
        "f1_1_rank",
        "f1_2_score",
        "f1_3_weight_sum_len1",
        "f1_3_weight_sum_len2",
        "f1_3_weight_sum_len3",
        "f1_3_weight_sum_len4",
        "f1_3_weight_sum_len5",
        "f1_3_weight_sum_len6_plus",
        "f1_4_first_segment_weight",
        "f1_5_mean_segment_weight",
        "f1_6_segment_count",
        "f1_7_mean_segment_length",
        "f1_8_max_title_segment_length",
        "f2_1_max_adjacent_segment_mi",
        "f2_2_max_cross_break_word_mi",
        "f2_3_min_within_segment_word_mi",
    };
    for (const auto& w : cfg.indicator_words) {
        names.push_back("f3_1_single_word_" + normalize(w));
    }
    names.insert(names.end(), {
        "f3_2_edge_two_word_segment",
        "f3_3_capitalized_run",
        "f3_4_single_multiword_segment",
        "f3_5_one_word_segment_count",
        "f4_1_split_of_top",
        "f4_2_merge_of_top",
        "f4_3_break_move_from_top",
        "f4_4_identical_break_count",
        "f4_5_identical_segment_count",
    });
    return names;
}

struct RerankFeatures {
    std::vector<double> values;
};

namespace detail {

inline std::size_t find_candidate(const CandidateList& list, const Segmentation& seg) {
    for (std::size_t i = 0; i < list.candidates.size(); ++i) {
        if (list.candidates[i].segmentation == seg) return i;
    }
    throw InternalError("extract_features: candidate is not a member of the list");
}

}  // namespace detail

/// Feature vector for one candidate of a ranked list. The list's rank-1
/// candidate serves as the reference segmentation for the similarity group.
inline RerankFeatures extract_features(const ScoredSegmentation& candidate,
                                       const CandidateList& list,
                                       const NGramStats& stats,
                                       const TitleSet& titles,
                                       const RerankConfig& cfg = {}) {
    const std::size_t rank_idx = detail::find_candidate(list, candidate.segmentation);
    const ScoredSegmentation& cand = list.candidates[rank_idx];
    const ScoredSegmentation& top = list.candidates.front();
    const Query& query = list.query;
    const Segmentation& seg = cand.segmentation;
    const std::vector<double>& weights = cand.segment_weights;
    const std::size_t n = query.size();
    const std::size_t m = seg.segment_count();

    RerankFeatures f;
    f.values.reserve(25 + cfg.indicator_words.size());
    auto push = [&f](double v) { f.values.push_back(v); };

    // F(1,*): quantities from the generative scorer.
    push(static_cast<double>(rank_idx + 1));
    push(cand.score);
    double len_sums[6] = {0, 0, 0, 0, 0, 0};
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t bucket = std::min<std::size_t>(seg.segments[i].len, 6) - 1;
        len_sums[bucket] += weights[i];
    }
    for (double v : len_sums) push(v);
    push(weights.front());
    push(std::accumulate(weights.begin(), weights.end(), 0.0) / static_cast<double>(m));
    push(static_cast<double>(m));
    push(static_cast<double>(n) / static_cast<double>(m));
    std::size_t max_title_len = 0;
    for (Span s : seg.segments) {
        if (s.len > max_title_len &&
            titles.contains_tokens(query.tokens.data() + s.start, s.len)) {
            max_title_len = s.len;
        }
    }
    push(static_cast<double>(max_title_len));

    // F(2,*): mutual information across and within segments.
    double max_seg_mi = 0.0;
    double max_word_mi = 0.0;
    if (m > 1) {
        max_seg_mi = -std::numeric_limits<double>::infinity();
        max_word_mi = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i + 1 < m; ++i) {
            Span a = seg.segments[i];
            Span b = seg.segments[i + 1];
            max_seg_mi = std::max(max_seg_mi,
                                  pmi_tokens(stats, query.tokens.data() + a.start, a.len,
                                             query.tokens.data() + b.start, b.len));
            std::size_t p = b.start - 1;  // word pair straddling the break
            max_word_mi = std::max(max_word_mi,
                                   pmi_tokens(stats, query.tokens.data() + p, 1,
                                              query.tokens.data() + p + 1, 1));
        }
    }
    push(max_seg_mi);
    push(max_word_mi);
    bool any_multi = false;
    double min_within_mi = std::numeric_limits<double>::infinity();
    for (Span s : seg.segments) {
        for (std::size_t p = s.start; p + 1 < s.start + s.len; ++p) {
            any_multi = true;
            min_within_mi = std::min(min_within_mi,
                                     pmi_tokens(stats, query.tokens.data() + p, 1,
                                                query.tokens.data() + p + 1, 1));
        }
    }
    push(any_multi ? min_within_mi : 0.0);

    // F(3,*): boolean shape features.
    for (const auto& word : cfg.indicator_words) {
        std::string w = normalize(word);
        bool hit = false;
        for (Span s : seg.segments) {
            if (s.len == 1 && to_lower(query.tokens[s.start]) == w) {
                hit = true;
                break;
            }
        }
        push(hit ? 1.0 : 0.0);
    }
    push(seg.segments.front().len == 2 || seg.segments.back().len == 2 ? 1.0 : 0.0);
    bool cap_run = false;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        auto capped = [&](std::size_t t) {
            return std::isupper(static_cast<unsigned char>(query.tokens[t][0])) != 0;
        };
        if (capped(i) && capped(i + 1)) {
            cap_run = true;
            break;
        }
    }
    push(cap_run ? 1.0 : 0.0);
    std::size_t multi_count = 0, single_count = 0;
    for (Span s : seg.segments) {
        (s.len >= 2 ? multi_count : single_count)++;
    }
    push(multi_count == 1 ? 1.0 : 0.0);
    push(static_cast<double>(single_count));

    // F(4,*): similarity to the top-ranked segmentation.
    const auto& cb = seg.breaks;
    const auto& tb = top.segmentation.breaks;
    std::vector<std::size_t> diffs;
    for (std::size_t i = 0; i < cb.size(); ++i) {
        if (cb[i] != tb[i]) diffs.push_back(i);
    }
    bool split = diffs.size() == 1 && cb[diffs[0]] == 1;
    bool merge = diffs.size() == 1 && cb[diffs[0]] == 0;
    bool move = diffs.size() == 2 && diffs[1] == diffs[0] + 1 && cb[diffs[0]] != cb[diffs[1]];
    push(split ? 1.0 : 0.0);
    push(merge ? 1.0 : 0.0);
    push(move ? 1.0 : 0.0);
    push(static_cast<double>(cb.size() - diffs.size()));
    push(static_cast<double>(count_common_segments(seg, top.segmentation)));
    return f;
}

/// One labeled candidate; group ties instances of the same query together.
struct TrainingInstance {
    std::vector<double> features;
    int label = -1;  // +1 or -1
    std::string group;
};

struct InstanceGroup {
    std::vector<TrainingInstance> instances;
    bool gold_in_list = false;
};

/// Labels every candidate of a list against the gold break vector: +1 for an
/// exact break match, -1 otherwise. A list that misses the gold entirely is
/// kept as an all-negative group and flagged.
inline InstanceGroup build_instances(const CandidateList& list, const Segmentation& gold,
                                     const NGramStats& stats, const TitleSet& titles,
                                     const RerankConfig& cfg = {}) {
    if (gold.breaks.size() + 1 != list.query.size()) {
        throw DataError("build_instances: gold segmentation is over a different query than the list");
    }
    InstanceGroup group;
    group.instances.reserve(list.candidates.size());
    for (const auto& cand : list.candidates) {
        TrainingInstance inst;
        inst.features = extract_features(cand, list, stats, titles, cfg).values;
        inst.label = cand.segmentation == gold ? +1 : -1;
        inst.group = list.query.raw;
        if (inst.label > 0) group.gold_in_list = true;
        group.instances.push_back(std::move(inst));
    }
    return group;
}

enum class Scaling { none, zscore };

/// Linear max-margin re-ranking model. weights align with feature_names();
/// bias participates in the decision only when use_bias is set.
struct LinearModel {
    std::vector<double> weights;
    double bias = 0.0;
    bool use_bias = true;
    double c = 1.0;
    double j = 1.0;
    Scaling scaling = Scaling::none;
    std::vector<std::string> names;
};

inline double decision_value(const LinearModel& model, const std::vector<double>& features) {
    if (features.size() != model.weights.size()) {
        throw InternalError("decision_value: feature dimension mismatch");
    }
    double d = model.use_bias ? model.bias : 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
        d += model.weights[i] * features[i];
    }
    return d;
}

/// Primal objective: 0.5*||w||^2 + c * sum_i cost_i * max(0, 1 - y_i f(x_i)),
/// where cost_i is j for positive instances and 1 for negatives.
inline double hinge_objective(const std::vector<double>& weights, double bias, bool use_bias,
                              const std::vector<TrainingInstance>& instances,
                              double c, double j) {
    double obj = 0.0;
    for (double w : weights) obj += 0.5 * w * w;
    for (const auto& inst : instances) {
        double d = use_bias ? bias : 0.0;
        for (std::size_t i = 0; i < inst.features.size(); ++i) {
            d += weights[i] * inst.features[i];
        }
        double slack = 1.0 - static_cast<double>(inst.label) * d;
        if (slack > 0.0) {
            obj += c * (inst.label > 0 ? j : 1.0) * slack;
        }
    }
    return obj;
}

struct TrainOptions {
    std::size_t max_epochs = 100000;
    double tolerance = 1e-6;   // stop once the best objective stalls below this
    std::size_t stall_epochs = 2000;
    Scaling scaling = Scaling::none;
    std::uint64_t seed = 0;    // drives the training permutations
};

/// Trains the re-ranking model: L2-regularized hinge loss
///   0.5*||w||^2 + c * sum_i cost_i * max(0, 1 - y_i (w.x_i + b))
/// with cost_i = j on positives and 1 on negatives, minimized by dual
/// coordinate descent with seeded per-epoch permutations (deterministic for
/// a fixed seed). The bias is carried as an augmented constant feature
/// (value 10), so it is weakly regularized; with use_bias off the column is
/// dropped and the bias is exactly zero. With z-scoring the standardization
/// is folded back into the returned weights; without a bias term only the
/// scale factor is applied (centering would force a non-zero bias).
inline LinearModel train(const std::vector<TrainingInstance>& instances,
                         double c, double j, bool use_bias,
                         const TrainOptions& opts = {}) {
    if (instances.empty()) throw DataError("train: no instances");
    if (c <= 0.0 || j <= 0.0) throw ConfigError("train: c and j must be positive");
    const std::size_t dim = instances.front().features.size();
    bool has_pos = false, has_neg = false;
    for (const auto& inst : instances) {
        if (inst.features.size() != dim) {
            throw DataError("train: inconsistent feature dimensions");
        }
        (inst.label > 0 ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg) {
        throw DataError("train: need at least one positive and one negative instance");
    }

    std::vector<double> mean(dim, 0.0), scale(dim, 1.0);
    if (opts.scaling == Scaling::zscore) {
        std::vector<double> var(dim, 0.0);
        for (const auto& inst : instances) {
            for (std::size_t d = 0; d < dim; ++d) mean[d] += inst.features[d];
        }
        for (double& v : mean) v /= static_cast<double>(instances.size());
        for (const auto& inst : instances) {
            for (std::size_t d = 0; d < dim; ++d) {
                double delta = inst.features[d] - mean[d];
                var[d] += delta * delta;
            }
        }
        for (std::size_t d = 0; d < dim; ++d) {
            double sd = std::sqrt(var[d] / static_cast<double>(instances.size()));
            scale[d] = sd > 0.0 ? sd : 1.0;
            if (!use_bias) mean[d] = 0.0;  // scale-only; keeps the zero bias exact
        }
    }

    constexpr double kBiasFeature = 10.0;
    const std::size_t n = instances.size();
    const std::size_t adim = dim + (use_bias ? 1 : 0);
    std::vector<std::vector<double>> x(n);
    std::vector<double> y(n), cost(n), q(n);  // q = ||x_i||^2
    for (std::size_t i = 0; i < n; ++i) {
        x[i].resize(adim);
        for (std::size_t d = 0; d < dim; ++d) {
            x[i][d] = (instances[i].features[d] - mean[d]) / scale[d];
        }
        if (use_bias) x[i][dim] = kBiasFeature;
        double norm_sq = 0.0;
        for (double v : x[i]) norm_sq += v * v;
        y[i] = static_cast<double>(instances[i].label);
        cost[i] = c * (instances[i].label > 0 ? j : 1.0);
        q[i] = norm_sq;
    }

    std::vector<double> w(adim, 0.0), alpha(n, 0.0);
    auto internal_objective = [&]() {
        double obj = 0.0;
        for (double v : w) obj += 0.5 * v * v;
        for (std::size_t i = 0; i < n; ++i) {
            double d = 0.0;
            for (std::size_t k = 0; k < adim; ++k) d += w[k] * x[i][k];
            double slack = 1.0 - y[i] * d;
            if (slack > 0.0) obj += cost[i] * slack;
        }
        return obj;
    };

    double best_obj = internal_objective();
    std::vector<double> best_w = w;
    std::size_t stalled = 0;
    std::mt19937_64 rng(opts.seed);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t epoch = 0; epoch < opts.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double max_pg = 0.0;
        for (std::size_t i : order) {
            if (q[i] == 0.0) continue;  // empty row: contributes a constant
            double s = 0.0;
            for (std::size_t k = 0; k < adim; ++k) s += w[k] * x[i][k];
            const double g = y[i] * s - 1.0;
            double pg = g;
            if (alpha[i] <= 0.0) pg = std::min(g, 0.0);
            if (alpha[i] >= cost[i]) pg = std::max(g, 0.0);
            if (pg == 0.0) continue;
            max_pg = std::max(max_pg, std::abs(pg));
            double next = std::clamp(alpha[i] - g / q[i], 0.0, cost[i]);
            double delta = next - alpha[i];
            if (delta != 0.0) {
                for (std::size_t k = 0; k < adim; ++k) w[k] += delta * y[i] * x[i][k];
                alpha[i] = next;
            }
        }
        const double obj = internal_objective();
        if (obj < best_obj - opts.tolerance) {
            best_obj = obj;
            best_w = w;
            stalled = 0;
        } else {
            ++stalled;
        }
        if (max_pg < opts.tolerance || stalled >= opts.stall_epochs) break;
    }

    LinearModel model;
    model.weights.resize(dim);
    model.bias = use_bias ? best_w[dim] * kBiasFeature : 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
        model.weights[d] = best_w[d] / scale[d];
        if (use_bias) model.bias -= best_w[d] * mean[d] / scale[d];
    }
    model.use_bias = use_bias;
    model.c = c;
    model.j = j;
    model.scaling = opts.scaling;
    return model;
}

/// Index of the candidate with the highest decision value; ties keep the
/// earlier (better generative rank) candidate.
inline std::size_t rerank_choose(const CandidateList& list, const LinearModel& model,
                                 const NGramStats& stats, const TitleSet& titles,
                                 const RerankConfig& cfg = {}) {
    if (list.candidates.empty()) throw InternalError("rerank: empty candidate list");
    std::size_t best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < list.candidates.size(); ++i) {
        auto f = extract_features(list.candidates[i], list, stats, titles, cfg);
        double v = decision_value(model, f.values);
        if (v > best_value) {
            best_value = v;
            best = i;
        }
    }
    return best;
}

inline Segmentation rerank(const CandidateList& list, const LinearModel& model,
                           const NGramStats& stats, const TitleSet& titles,
                           const RerankConfig& cfg = {}) {
    return list.candidates[rerank_choose(list, model, stats, titles, cfg)].segmentation;
}

// --- model persistence -----------------------------------------------------

namespace detail {

inline std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace detail

inline constexpr const char* kModelMagic = "segrank-rerank-model-v1";

inline void save_model(const LinearModel& model, std::ostream& out) {
    out << kModelMagic << "\n";
    out << "dim\t" << model.weights.size() << "\n";
    out << "b\t" << (model.use_bias ? 1 : 0) << "\n";
    out << "c\t" << detail::fmt_double(model.c) << "\n";
    out << "j\t" << detail::fmt_double(model.j) << "\n";
    out << "scaling\t" << (model.scaling == Scaling::zscore ? "zscore" : "none") << "\n";
    for (std::size_t i = 0; i < model.weights.size(); ++i) {
        out << model.names.at(i) << "\t" << detail::fmt_double(model.weights[i]) << "\n";
    }
    out << "bias\t" << detail::fmt_double(model.bias) << "\n";
}

inline void save_model(const LinearModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open model file for writing: " + path);
    save_model(model, out);
}

inline LinearModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model file: " + path);
    std::string line;
    auto next = [&](const char* what) {
        if (!std::getline(in, line)) {
            throw DataError(path + ": truncated model file (missing " + std::string(what) + ")");
        }
        detail::strip_cr(line);
        return line;
    };
    if (next("magic") != kModelMagic) {
        throw DataError(path + ": not a segrank re-ranking model (bad magic line)");
    }
    auto field = [&](const char* key) {
        next(key);
        auto tab = line.find('\t');
        if (tab == std::string::npos || line.compare(0, tab, key) != 0) {
            throw DataError(path + ": expected '" + std::string(key) + "' line, got '" + line + "'");
        }
        return line.substr(tab + 1);
    };
    LinearModel model;
    std::size_t dim = std::stoul(field("dim"));
    model.use_bias = field("b") == "1";
    model.c = std::stod(field("c"));
    model.j = std::stod(field("j"));
    std::string scaling = field("scaling");
    if (scaling != "none" && scaling != "zscore") {
        throw DataError(path + ": unknown scaling '" + scaling + "'");
    }
    model.scaling = scaling == "zscore" ? Scaling::zscore : Scaling::none;
    model.weights.reserve(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        next("feature weight");
        auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw DataError(path + ": malformed feature line '" + line + "'");
        }
        model.names.push_back(line.substr(0, tab));
        model.weights.push_back(std::stod(line.substr(tab + 1)));
    }
    model.bias = std::stod(field("bias"));
    return model;
}

// --- cross validation --------------------------------------------------------

/// Precomputed per-query material for training and accuracy measurement.
struct RerankGroup {
    CandidateList list;
    std::vector<std::vector<double>> features;  // one vector per candidate
    int gold_index = -1;                        // -1 when gold is not in the list
};

inline RerankGroup prepare_group(CandidateList list, const Segmentation& gold,
                                 const NGramStats& stats, const TitleSet& titles,
                                 const RerankConfig& cfg = {}) {
    RerankGroup g;
    g.features.reserve(list.candidates.size());
    for (std::size_t i = 0; i < list.candidates.size(); ++i) {
        g.features.push_back(
            extract_features(list.candidates[i], list, stats, titles, cfg).values);
        if (list.candidates[i].segmentation == gold) g.gold_index = static_cast<int>(i);
    }
    g.list = std::move(list);
    return g;
}

inline std::vector<TrainingInstance> group_instances(const RerankGroup& g) {
    std::vector<TrainingInstance> out;
    out.reserve(g.features.size());
    for (std::size_t i = 0; i < g.features.size(); ++i) {
        out.push_back({g.features[i],
                       static_cast<int>(i) == g.gold_index ? +1 : -1,
                       g.list.query.raw});
    }
    return out;
}

/// Fraction of groups whose decision-maximal candidate is the gold one.
inline double segmentation_accuracy(const LinearModel& model,
                                    const std::vector<RerankGroup>& groups) {
    if (groups.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto& g : groups) {
        std::size_t best = 0;
        double best_value = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < g.features.size(); ++i) {
            double v = decision_value(model, g.features[i]);
            if (v > best_value) {
                best_value = v;
                best = i;
            }
        }
        if (static_cast<int>(best) == g.gold_index) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(groups.size());
}

struct ParamGrid {
    std::vector<double> c;
    std::vector<double> j;
    std::vector<int> b;
};

struct SweepPoint {
    double c = 0.0;
    double j = 0.0;
    int b = 0;
    double accuracy = 0.0;
};

struct SweepResult {
    SweepPoint best;
    std::vector<SweepPoint> points;
};

/// Grid search over {c, j, b} with deterministic k-fold assignment
/// (query index modulo fold count). Returns the point with the highest mean
/// fold segmentation accuracy; ties keep the first point in grid order
/// (c-major, then j, then b). Folds whose training set degenerates to a
/// single class score zero.
inline SweepResult cross_validate(const std::vector<RerankGroup>& groups,
                                  const ParamGrid& grid, std::size_t folds,
                                  const TrainOptions& opts = {}) {
    if (grid.c.empty() || grid.j.empty() || grid.b.empty()) {
        throw ConfigError("cross_validate: empty parameter grid");
    }
    if (folds < 2) throw ConfigError("cross_validate: folds must be >= 2");
    if (groups.size() < folds) {
        throw DataError("cross_validate: dataset smaller than the fold count");
    }
    SweepResult result;
    bool have_best = false;
    for (double c : grid.c) {
        for (double j : grid.j) {
            for (int b : grid.b) {
                double acc_sum = 0.0;
                for (std::size_t fold = 0; fold < folds; ++fold) {
                    std::vector<TrainingInstance> train_set;
                    std::vector<RerankGroup> eval_set;
                    for (std::size_t i = 0; i < groups.size(); ++i) {
                        if (i % folds == fold) {
                            eval_set.push_back(groups[i]);
                        } else {
                            auto inst = group_instances(groups[i]);
                            train_set.insert(train_set.end(), inst.begin(), inst.end());
                        }
                    }
                    try {
                        LinearModel model = train(train_set, c, j, b != 0, opts);
                        acc_sum += segmentation_accuracy(model, eval_set);
                    } catch (const DataError&) {
                        // degenerate training fold: counts as zero accuracy
                    }
                }
                SweepPoint point{c, j, b, acc_sum / static_cast<double>(folds)};
                result.points.push_back(point);
                if (!have_best || point.accuracy > result.best.accuracy) {
                    result.best = point;
                    have_best = true;
                }
            }
        }
    }
    return result;
}

}  // namespace segrank
