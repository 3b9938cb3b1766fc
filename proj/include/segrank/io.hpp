#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "segrank/errors.hpp"
#include "segrank/ltr.hpp"
#include "segrank/relevance.hpp"
#include "segrank/segeval.hpp"

namespace segrank {

using json = nlohmann::json;

namespace detail {

inline std::string fmt_g9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

inline json parse_json_line(const std::string& line, const std::string& path, std::size_t line_no) {
    try {
        return json::parse(line);
    } catch (const json::parse_error& e) {
        throw DataError(path + ": line " + std::to_string(line_no) + ": " + e.what());
    }
}

inline std::vector<std::uint8_t> parse_break_array(const json& arr, const std::string& path,
                                                   std::size_t line_no) {
    if (!arr.is_array()) {
        throw DataError(path + ": line " + std::to_string(line_no) + ": break vector must be an array");
    }
    std::vector<std::uint8_t> out;
    out.reserve(arr.size());
    for (const auto& v : arr) {
        if (!v.is_number_integer() || (v.get<int>() != 0 && v.get<int>() != 1)) {
            throw DataError(path + ": line " + std::to_string(line_no) + ": breaks must be 0 or 1");
        }
        out.push_back(static_cast<std::uint8_t>(v.get<int>()));
    }
    return out;
}

}  // namespace detail

/// One line of the annotated-query corpus: a query plus per-annotator break
/// vectors and/or a single gold break vector.
struct AnnotatedEntry {
    Query query;
    std::vector<std::vector<std::uint8_t>> annotations;
    std::optional<std::vector<std::uint8_t>> gold;
};

inline std::vector<AnnotatedEntry> load_annotated_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus file: " + path);
    std::vector<AnnotatedEntry> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (line.empty()) continue;
        json obj = detail::parse_json_line(line, path, line_no);
        if (!obj.contains("query") || !obj["query"].is_string()) {
            throw DataError(path + ": line " + std::to_string(line_no) + ": missing \"query\" string");
        }
        AnnotatedEntry entry;
        try {
            entry.query = tokenize(obj["query"].get<std::string>());
        } catch (const DataError& e) {
            throw DataError(path + ": line " + std::to_string(line_no) + ": " + e.what());
        }
        const std::size_t breaks_len = entry.query.size() - 1;
        if (obj.contains("annotations")) {
            if (!obj["annotations"].is_array()) {
                throw DataError(path + ": line " + std::to_string(line_no) +
                                ": \"annotations\" must be an array of break vectors");
            }
            for (const auto& a : obj["annotations"]) {
                auto breaks = detail::parse_break_array(a, path, line_no);
                if (breaks.size() != breaks_len) {
                    throw DataError(path + ": line " + std::to_string(line_no) +
                                    ": annotation length does not match the query");
                }
                entry.annotations.push_back(std::move(breaks));
            }
        }
        if (obj.contains("gold")) {
            auto breaks = detail::parse_break_array(obj["gold"], path, line_no);
            if (breaks.size() != breaks_len) {
                throw DataError(path + ": line " + std::to_string(line_no) +
                                ": gold length does not match the query");
            }
            entry.gold = std::move(breaks);
        }
        if (!entry.gold && entry.annotations.empty()) {
            throw DataError(path + ": line " + std::to_string(line_no) +
                            ": entry has neither \"annotations\" nor \"gold\"");
        }
        out.push_back(std::move(entry));
    }
    return out;
}

/// The gold segmentation of an entry: the explicit one when present,
/// otherwise the break-fused annotations.
inline Segmentation gold_of(const AnnotatedEntry& entry) {
    if (entry.gold) {
        return breaks_to_segments(entry.query, *entry.gold);
    }
    return fuse_breaks({entry.query, entry.annotations});
}

/// Prediction lines: {"query": ..., "breaks": [...]} (a "segmentation"
/// slash string is accepted as a fallback).
inline std::vector<SegmentedQuery> load_predictions(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open prediction file: " + path);
    std::vector<SegmentedQuery> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (line.empty()) continue;
        json obj = detail::parse_json_line(line, path, line_no);
        if (!obj.contains("query") || !obj["query"].is_string()) {
            throw DataError(path + ": line " + std::to_string(line_no) + ": missing \"query\" string");
        }
        Query q = tokenize(obj["query"].get<std::string>());
        if (obj.contains("breaks")) {
            auto breaks = detail::parse_break_array(obj["breaks"], path, line_no);
            if (breaks.size() + 1 != q.size()) {
                throw DataError(path + ": line " + std::to_string(line_no) +
                                ": break vector does not match the query");
            }
            out.push_back({q, breaks_to_segments(q, std::move(breaks))});
        } else if (obj.contains("segmentation") && obj["segmentation"].is_string()) {
            auto [pq, seg] = parse_slash(obj["segmentation"].get<std::string>());
            if (pq.tokens != q.tokens) {
                throw DataError(path + ": line " + std::to_string(line_no) +
                                ": segmentation does not match the query");
            }
            out.push_back({std::move(pq), std::move(seg)});
        } else {
            throw DataError(path + ": line " + std::to_string(line_no) +
                            ": entry has neither \"breaks\" nor \"segmentation\"");
        }
    }
    return out;
}

// --- documents, judgments, ranking queries -----------------------------------

inline std::vector<Document> load_documents(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open document corpus: " + path);
    std::vector<Document> out;
    std::unordered_map<std::string, std::size_t> ids;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (line.empty()) continue;
        json obj = detail::parse_json_line(line, path, line_no);
        if (!obj.contains("id") || !obj["id"].is_string()) {
            throw DataError(path + ": line " + std::to_string(line_no) + ": missing \"id\" string");
        }
        Document doc;
        doc.id = obj["id"].get<std::string>();
        if (!ids.emplace(doc.id, line_no).second) {
            throw DataError(path + ": line " + std::to_string(line_no) + ": duplicate document id '" + doc.id + "'");
        }
        for (std::size_t f = 0; f < 8; ++f) {
            if (!obj.contains(kFieldNames[f])) continue;
            const auto& v = obj[kFieldNames[f]];
            if (!v.is_string()) {
                throw DataError(path + ": line " + std::to_string(line_no) + ": field \"" +
                                kFieldNames[f] + "\" must be a string");
            }
            doc.fields[f] = split_ws(to_lower(v.get<std::string>()));
            if (f == kKeyFieldIndex) doc.has_key = true;
        }
        out.push_back(std::move(doc));
    }
    return out;
}

struct Judgment {
    std::string qid;
    std::string doc_id;
    int grade = 0;
};

/// `query_id<TAB>doc_id<TAB>grade` with grades 0..4.
inline std::vector<Judgment> load_judgments(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open judgment file: " + path);
    std::vector<Judgment> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (line.empty()) continue;
        auto t1 = line.find('\t');
        auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t2 == std::string::npos) {
            throw DataError(path + ": line " + std::to_string(line_no) + ": expected query_id<TAB>doc_id<TAB>grade");
        }
        Judgment j;
        j.qid = line.substr(0, t1);
        j.doc_id = line.substr(t1 + 1, t2 - t1 - 1);
        std::string grade = line.substr(t2 + 1);
        if (grade.size() != 1 || grade[0] < '0' || grade[0] > '4') {
            throw DataError(path + ": line " + std::to_string(line_no) + ": grade must be 0..4, got '" + grade + "'");
        }
        j.grade = grade[0] - '0';
        out.push_back(std::move(j));
    }
    return out;
}

struct RankingQuery {
    std::string qid;
    std::string text;
};

/// `query_id<TAB>query_text`.
inline std::vector<RankingQuery> load_ranking_queries(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open query file: " + path);
    std::vector<RankingQuery> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (line.empty()) continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw DataError(path + ": line " + std::to_string(line_no) + ": expected query_id<TAB>query_text");
        }
        out.push_back({line.substr(0, tab), line.substr(tab + 1)});
    }
    return out;
}

// --- feature matrix ------------------------------------------------------------

struct MatrixRow {
    int grade = 0;
    std::string qid;
    std::vector<double> values;
};

/// Dense rows-of-`grade qid:<id> <idx>:<val> ...` text form with 1-based
/// column indices in the documented cell order.
inline void write_feature_matrix(std::ostream& out, const std::vector<MatrixRow>& rows) {
    for (const auto& row : rows) {
        out << row.grade << " qid:" << row.qid;
        for (std::size_t i = 0; i < row.values.size(); ++i) {
            out << ' ' << (i + 1) << ':' << detail::fmt_g9(row.values[i]);
        }
        out << '\n';
    }
}

inline std::vector<MatrixRow> load_feature_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open feature matrix: " + path);
    std::vector<MatrixRow> rows;
    std::size_t dim = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (line.empty()) continue;
        auto cols = split_ws(line);
        if (cols.size() < 2 || cols[1].rfind("qid:", 0) != 0) {
            throw DataError(path + ": line " + std::to_string(line_no) + ": expected 'grade qid:<id> ...'");
        }
        MatrixRow row;
        try {
            row.grade = std::stoi(cols[0]);
        } catch (const std::exception&) {
            throw DataError(path + ": line " + std::to_string(line_no) + ": bad grade '" + cols[0] + "'");
        }
        row.qid = cols[1].substr(4);
        for (std::size_t i = 2; i < cols.size(); ++i) {
            auto colon = cols[i].find(':');
            if (colon == std::string::npos) {
                throw DataError(path + ": line " + std::to_string(line_no) + ": bad cell '" + cols[i] + "'");
            }
            std::size_t idx = 0;
            double value = 0.0;
            try {
                idx = std::stoul(cols[i].substr(0, colon));
                value = std::stod(cols[i].substr(colon + 1));
            } catch (const std::exception&) {
                throw DataError(path + ": line " + std::to_string(line_no) + ": bad cell '" + cols[i] + "'");
            }
            if (idx < 1) {
                throw DataError(path + ": line " + std::to_string(line_no) + ": indices are 1-based");
            }
            if (idx > row.values.size()) row.values.resize(idx, 0.0);
            row.values[idx - 1] = value;
        }
        dim = std::max(dim, row.values.size());
        rows.push_back(std::move(row));
    }
    for (auto& row : rows) row.values.resize(dim, 0.0);
    return rows;
}

/// Groups matrix rows into per-query LTR groups, preserving first-appearance
/// order of query ids and row order within a query.
inline std::vector<LtrGroup> group_matrix_rows(const std::vector<MatrixRow>& rows) {
    std::vector<LtrGroup> groups;
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& row : rows) {
        auto [it, fresh] = index.emplace(row.qid, groups.size());
        if (fresh) {
            groups.push_back({row.qid, {}, {}});
        }
        groups[it->second].features.push_back(row.values);
        groups[it->second].grades.push_back(row.grade);
    }
    return groups;
}

// --- index artifact -------------------------------------------------------------

struct IndexData {
    std::vector<Document> docs;
    CollectionStats stats;
    int kn_budget = 0;           // 0: no key_ngram field built
    std::size_t max_df_len = 8;
};

inline constexpr const char* kIndexFormat = "segrank-index-v1";

inline json index_to_json(const IndexData& index) {
    json docs = json::array();
    for (const auto& d : index.docs) {
        json obj;
        obj["id"] = d.id;
        for (std::size_t f = 0; f < (d.has_key ? 8u : kBaseFieldCount); ++f) {
            obj[kFieldNames[f]] = join(d.fields[f]);
        }
        docs.push_back(std::move(obj));
    }
    json stats;
    for (std::size_t f = 0; f < (index.stats.has_key ? 8u : kBaseFieldCount); ++f) {
        json fj;
        fj["avg_len"] = index.stats.fields[f].avg_len;
        json df(json::value_t::object);
        for (const auto& [gram, count] : index.stats.fields[f].df) {
            df[gram] = count;
        }
        fj["df"] = std::move(df);
        stats[kFieldNames[f]] = std::move(fj);
    }
    return json{{"format", kIndexFormat},
                {"doc_count", index.stats.doc_count},
                {"kn_budget", index.kn_budget},
                {"max_df_len", index.max_df_len},
                {"docs", std::move(docs)},
                {"stats", std::move(stats)}};
}

inline IndexData index_from_json(const json& obj, const std::string& path) {
    if (!obj.is_object() || obj.value("format", "") != kIndexFormat) {
        throw DataError(path + ": not a segrank index file");
    }
    IndexData index;
    index.kn_budget = obj.value("kn_budget", 0);
    index.max_df_len = obj.value("max_df_len", std::size_t{8});
    for (const auto& dj : obj.at("docs")) {
        Document doc;
        doc.id = dj.at("id").get<std::string>();
        for (std::size_t f = 0; f < 8; ++f) {
            if (!dj.contains(kFieldNames[f])) continue;
            doc.fields[f] = split_ws(dj[kFieldNames[f]].get<std::string>());
            if (f == kKeyFieldIndex) doc.has_key = true;
        }
        index.docs.push_back(std::move(doc));
    }
    index.stats.doc_count = obj.at("doc_count").get<std::int64_t>();
    const auto& stats = obj.at("stats");
    for (std::size_t f = 0; f < 8; ++f) {
        if (!stats.contains(kFieldNames[f])) continue;
        const auto& fj = stats[kFieldNames[f]];
        FieldStats& fs = index.stats.fields[f];
        fs.doc_count = index.stats.doc_count;
        auto avg = fj.at("avg_len");
        for (std::size_t o = 0; o < 3; ++o) fs.avg_len[o] = avg.at(o).get<double>();
        for (const auto& [gram, count] : fj.at("df").items()) {
            fs.df[gram] = count.get<std::int64_t>();
        }
        if (f == kKeyFieldIndex) index.stats.has_key = true;
    }
    return index;
}

inline void save_index(const IndexData& index, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open index file for writing: " + path);
    out << index_to_json(index).dump() << "\n";
}

inline IndexData load_index(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open index file: " + path);
    json obj;
    try {
        in >> obj;
    } catch (const json::parse_error& e) {
        throw DataError(path + ": " + e.what());
    }
    return index_from_json(obj, path);
}

}  // namespace segrank
