#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "segrank/errors.hpp"
#include "segrank/rerank.hpp"  // detail::fmt_double, detail::strip_cr

namespace segrank {

/// DCG@k with gain (2^grade - 1) and discount log2(rank + 1), 1-based ranks.
inline double dcg_at(const std::vector<int>& ranked_grades, int k) {
    double dcg = 0.0;
    const std::size_t depth = std::min<std::size_t>(ranked_grades.size(), static_cast<std::size_t>(k));
    for (std::size_t r = 0; r < depth; ++r) {
        dcg += (std::exp2(static_cast<double>(ranked_grades[r])) - 1.0) /
               std::log2(static_cast<double>(r) + 2.0);
    }
    return dcg;
}

/// NDCG@k of a ranked grade list; 0 when the ideal DCG is 0 (all grades 0).
inline double ndcg_at(const std::vector<int>& ranked_grades, int k) {
    if (k < 1) throw ConfigError("ndcg_at: k must be >= 1");
    std::vector<int> ideal = ranked_grades;
    std::sort(ideal.begin(), ideal.end(), std::greater<int>());
    const double best = dcg_at(ideal, k);
    if (best == 0.0) return 0.0;
    return dcg_at(ranked_grades, k) / best;
}

/// One query's judged documents: a feature row and an integer grade each.
struct LtrGroup {
    std::string qid;
    std::vector<std::vector<double>> features;
    std::vector<int> grades;
};

/// Documents ordered by descending combiner score; ties keep input order.
inline std::vector<int> ranked_grades(const LtrGroup& group, const std::vector<double>& weights) {
    std::vector<std::size_t> order(group.features.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> scores(group.features.size(), 0.0);
    for (std::size_t i = 0; i < group.features.size(); ++i) {
        double s = 0.0;
        for (std::size_t d = 0; d < weights.size(); ++d) {
            s += weights[d] * group.features[i][d];
        }
        scores[i] = s;
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<int> grades;
    grades.reserve(order.size());
    for (std::size_t i : order) grades.push_back(group.grades[i]);
    return grades;
}

inline double mean_ndcg(const std::vector<LtrGroup>& groups, const std::vector<double>& weights, int k) {
    if (groups.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& g : groups) {
        sum += ndcg_at(ranked_grades(g, weights), k);
    }
    return sum / static_cast<double>(groups.size());
}

struct LtrModel {
    std::vector<double> weights;
    bool degenerate = false;
    double train_ndcg = 0.0;
    double valid_ndcg = 0.0;
};

struct LtrOptions {
    int ndcg_k = 10;
    std::size_t max_passes = 32;
    std::size_t patience = 3;       // passes without validation improvement
    std::uint64_t seed = 0;         // recorded for provenance; the search is deterministic
};

/// Linear combiner trained by coordinate ascent directly on mean NDCG@k.
/// Each pass greedily line-searches every coordinate over a fixed step grid;
/// a non-empty validation set drives early stopping on validation NDCG.
/// If no coordinate ever improves, the zero-weight model is returned flagged
/// as degenerate.
inline LtrModel train_ltr(const std::vector<LtrGroup>& train_groups,
                          const std::vector<LtrGroup>& valid_groups,
                          const LtrOptions& opts = {}) {
    if (train_groups.empty()) throw DataError("train_ltr: no training groups");
    const std::size_t dim = train_groups.front().features.empty()
                                ? 0
                                : train_groups.front().features.front().size();
    std::set<int> grades;
    for (const auto& g : train_groups) {
        if (g.features.size() != g.grades.size()) {
            throw DataError("train_ltr: feature/grade count mismatch in group " + g.qid);
        }
        for (const auto& row : g.features) {
            if (row.size() != dim) throw DataError("train_ltr: inconsistent feature dimensions");
        }
        grades.insert(g.grades.begin(), g.grades.end());
    }
    if (grades.size() < 2) {
        throw DataError("train_ltr: judgments carry a single grade; nothing to rank");
    }

    static constexpr double kSteps[] = {8.0, 4.0, 2.0, 1.0, 0.5, 0.25, 0.125, 0.0625,
                                        -0.0625, -0.125, -0.25, -0.5, -1.0, -2.0, -4.0, -8.0};
    std::vector<double> w(dim, 0.0);
    double train_score = mean_ndcg(train_groups, w, opts.ndcg_k);
    const bool has_valid = !valid_groups.empty();
    LtrModel best;
    best.weights = w;
    best.train_ndcg = train_score;
    best.valid_ndcg = has_valid ? mean_ndcg(valid_groups, w, opts.ndcg_k) : 0.0;
    double best_selection = has_valid ? best.valid_ndcg : best.train_ndcg;
    bool ever_improved = false;
    std::size_t stale_passes = 0;

    for (std::size_t pass = 0; pass < opts.max_passes; ++pass) {
        bool pass_improved = false;
        for (std::size_t d = 0; d < dim; ++d) {
            for (;;) {
                double best_delta = 0.0;
                double best_score = train_score;
                for (double step : kSteps) {
                    w[d] += step;
                    double s = mean_ndcg(train_groups, w, opts.ndcg_k);
                    w[d] -= step;
                    if (s > best_score + 1e-12) {
                        best_score = s;
                        best_delta = step;
                    }
                }
                if (best_delta == 0.0) break;
                w[d] += best_delta;
                train_score = best_score;
                pass_improved = true;
                ever_improved = true;
            }
        }
        const double valid_score = has_valid ? mean_ndcg(valid_groups, w, opts.ndcg_k) : 0.0;
        const double selection = has_valid ? valid_score : train_score;
        if (selection > best_selection + 1e-12) {
            best_selection = selection;
            best.weights = w;
            best.train_ndcg = train_score;
            best.valid_ndcg = valid_score;
            stale_passes = 0;
        } else {
            ++stale_passes;
        }
        if (!pass_improved) break;
        if (has_valid && stale_passes >= opts.patience) break;
    }
    best.degenerate = !ever_improved;
    if (best.degenerate) {
        best.weights.assign(dim, 0.0);
    }
    return best;
}

// --- combiner persistence ----------------------------------------------------

inline constexpr const char* kLtrModelMagic = "segrank-ltr-model-v1";

inline void save_ltr_model(const LtrModel& model, const std::vector<std::string>& names,
                           std::ostream& out) {
    if (names.size() != model.weights.size()) {
        throw InternalError("save_ltr_model: name/weight count mismatch");
    }
    out << kLtrModelMagic << "\n";
    out << "dim\t" << model.weights.size() << "\n";
    out << "degenerate\t" << (model.degenerate ? 1 : 0) << "\n";
    for (std::size_t i = 0; i < model.weights.size(); ++i) {
        out << names[i] << "\t" << detail::fmt_double(model.weights[i]) << "\n";
    }
}

inline void save_ltr_model(const LtrModel& model, const std::vector<std::string>& names,
                           const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open combiner file for writing: " + path);
    save_ltr_model(model, names, out);
}

inline LtrModel load_ltr_model(const std::string& path, std::vector<std::string>* names_out = nullptr) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open combiner file: " + path);
    std::string line;
    auto next = [&](const char* what) {
        if (!std::getline(in, line)) {
            throw DataError(path + ": truncated combiner file (missing " + std::string(what) + ")");
        }
        detail::strip_cr(line);
        return line;
    };
    if (next("magic") != kLtrModelMagic) {
        throw DataError(path + ": not a segrank combiner model (bad magic line)");
    }
    auto field = [&](const char* key) {
        next(key);
        auto tab = line.find('\t');
        if (tab == std::string::npos || line.compare(0, tab, key) != 0) {
            throw DataError(path + ": expected '" + std::string(key) + "' line, got '" + line + "'");
        }
        return line.substr(tab + 1);
    };
    LtrModel model;
    std::size_t dim = std::stoul(field("dim"));
    model.degenerate = field("degenerate") == "1";
    for (std::size_t i = 0; i < dim; ++i) {
        next("weight line");
        auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw DataError(path + ": malformed weight line '" + line + "'");
        }
        if (names_out) names_out->push_back(line.substr(0, tab));
        model.weights.push_back(std::stod(line.substr(tab + 1)));
    }
    return model;
}

}  // namespace segrank
