// segrank: query segmentation and segmentation-aware relevance features.
//
// Subcommands wire the library into reproducible pipelines: candidate
// generation (topk), re-ranked segmentation (segment), model training
// (train-rerank, sweep, train-ltr), gold construction (fuse), evaluation
// (eval-seg, eval-rank), and relevance feature extraction (index, rank).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "segrank/errors.hpp"
#include "segrank/io.hpp"
#include "segrank/ltr.hpp"
#include "segrank/relevance.hpp"
#include "segrank/rerank.hpp"
#include "segrank/segeval.hpp"
#include "segrank/segmentation.hpp"
#include "segrank/stats.hpp"
#include "segrank/version.hpp"
#include "segrank/wbn.hpp"

namespace {

using segrank::json;

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        hash ^= c;
        hash *= 0x100000001b3ull;
    }
    return hash;
}

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Collects artifacts in memory and writes them only after the whole
/// subcommand succeeded; a failing write unlinks everything written so far.
class ArtifactWriter {
  public:
    void add(const std::string& path, std::string content) {
        artifacts_.push_back({path, std::move(content)});
    }

    void flush() {
        std::vector<std::string> written;
        for (const auto& [path, content] : artifacts_) {
            if (path == "-") {
                std::cout << content;
                continue;
            }
            std::ofstream out(path, std::ios::binary);
            if (!out || !(out << content) || !out.flush()) {
                for (const auto& p : written) std::filesystem::remove(p);
                std::filesystem::remove(path);
                throw segrank::DataError("cannot write artifact: " + path);
            }
            written.push_back(path);
        }
    }

  private:
    std::vector<std::pair<std::string, std::string>> artifacts_;
};

struct ManifestInfo {
    std::string subcommand;
    json config;
    std::uint64_t seed = 0;
};

std::string render_manifest(const ManifestInfo& info) {
    json m;
    m["tool"] = "segrank";
    m["version"] = segrank::kVersion;
    m["subcommand"] = info.subcommand;
    m["seed"] = info.seed;
    m["config"] = info.config;
    m["config_hash"] = hex64(fnv1a64(info.config.dump()));
    return m.dump(2) + "\n";
}

void add_manifest(ArtifactWriter& writer, const ManifestInfo& info,
                  const std::string& out_path, const std::string& manifest_path) {
    if (!manifest_path.empty()) {
        writer.add(manifest_path, render_manifest(info));
    } else if (out_path != "-") {
        writer.add(out_path + ".manifest.json", render_manifest(info));
    }
}

// --- statistics registry -----------------------------------------------------

/// --stats accepts `path` (registered as "default") or `name=path`, repeatable.
std::map<std::string, segrank::NGramStats> load_stats_registry(const std::vector<std::string>& specs) {
    std::map<std::string, segrank::NGramStats> registry;
    for (const auto& spec : specs) {
        auto eq = spec.find('=');
        std::string name = eq == std::string::npos ? "default" : spec.substr(0, eq);
        std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
        if (name.empty() || path.empty()) {
            throw segrank::ConfigError("bad --stats spec '" + spec + "' (want PATH or NAME=PATH)");
        }
        registry[name] = segrank::load_stats(path);
    }
    return registry;
}

const segrank::NGramStats& stats_source(const std::map<std::string, segrank::NGramStats>& registry,
                                        const std::string& name) {
    auto it = registry.find(name);
    if (it == registry.end()) {
        throw segrank::ConfigError("no --stats source named '" + name + "'");
    }
    return it->second;
}

std::vector<std::string> read_query_lines(const std::string& path) {
    std::vector<std::string> lines;
    auto consume = [&](std::istream& in) {
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!segrank::normalize(line).empty()) lines.push_back(line);
        }
    };
    if (path == "-") {
        consume(std::cin);
    } else {
        std::ifstream in(path);
        if (!in) throw segrank::DataError("cannot open query file: " + path);
        consume(in);
    }
    return lines;
}

json breaks_json(const std::vector<std::uint8_t>& breaks) {
    json arr = json::array();
    for (auto b : breaks) arr.push_back(static_cast<int>(b));
    return arr;
}

// --- shared option bundles -----------------------------------------------------

struct SegmenterOpts {
    std::vector<std::string> stats_specs;
    std::string titles_path;
    std::string wbn_source = "default";
    std::string mi_source = "default";
    std::string model_path;
    std::vector<std::string> indicator_words;
    int k = 6;
};

void add_stats_options(CLI::App* cmd, SegmenterOpts& opts, bool required = true) {
    auto* s = cmd->add_option("--stats", opts.stats_specs,
                              "n-gram frequency TSV, `PATH` or `NAME=PATH` (repeatable; "
                              "format: `ngram<TAB>count`, optional `__TOTAL__<TAB>count` line)");
    auto* t = cmd->add_option("--titles", opts.titles_path,
                              "title list, one normalized title per line");
    if (required) {
        s->required();
        t->required();
    }
    cmd->add_option("--wbn-source", opts.wbn_source, "stats source for segment weights")
        ->capture_default_str();
    cmd->add_option("--mi-source", opts.mi_source, "stats source for mutual-information features")
        ->capture_default_str();
    cmd->add_option("--k", opts.k, "candidate list size")->capture_default_str()
        ->check(CLI::PositiveNumber);
}

segrank::RerankConfig rerank_config(const SegmenterOpts& opts) {
    segrank::RerankConfig cfg;
    if (!opts.indicator_words.empty()) cfg.indicator_words = opts.indicator_words;
    return cfg;
}

/// A segmentation strategy shared by `rank` and `eval-seg`.
struct Segmenter {
    std::string kind = "none";  // none | wbn | rerank
    const segrank::NGramStats* wbn_stats = nullptr;
    const segrank::NGramStats* mi_stats = nullptr;
    const segrank::TitleSet* titles = nullptr;
    std::optional<segrank::LinearModel> model;
    segrank::RerankConfig cfg;
    int k = 6;

    segrank::Segmentation segment(const segrank::Query& query) const {
        if (kind == "none") return segrank::all_singletons(query);
        auto list = segrank::topk(query, kind == "wbn" ? 1 : k, *wbn_stats, *titles);
        if (kind == "wbn") return list.candidates.front().segmentation;
        return segrank::rerank(list, *model, *mi_stats, *titles, cfg);
    }
};

void validate_model_schema(const segrank::LinearModel& model, const segrank::RerankConfig& cfg) {
    if (model.names != segrank::feature_names(cfg)) {
        throw segrank::ConfigError(
            "model feature names do not match the configured feature schema "
            "(check --indicator-words)");
    }
}

// --- subcommands ------------------------------------------------------------

struct TopkArgs {
    SegmenterOpts seg;
    std::string queries = "-";
    std::string out = "-";
    std::string manifest;
};

void run_topk(const TopkArgs& args, std::uint64_t seed) {
    auto registry = load_stats_registry(args.seg.stats_specs);
    const auto& stats = stats_source(registry, args.seg.wbn_source);
    auto titles = segrank::load_titles(args.seg.titles_path);
    std::ostringstream out;
    for (const auto& line : read_query_lines(args.queries)) {
        auto query = segrank::tokenize(line);
        auto list = segrank::topk(query, args.seg.k, stats, titles);
        json cands = json::array();
        for (std::size_t i = 0; i < list.candidates.size(); ++i) {
            const auto& cand = list.candidates[i];
            cands.push_back({{"rank", i + 1},
                             {"segmentation", segrank::to_slash_string(query, cand.segmentation)},
                             {"breaks", breaks_json(cand.segmentation.breaks)},
                             {"score", cand.score},
                             {"segment_weights", cand.segment_weights}});
        }
        json obj{{"query", query.raw},
                 {"k", args.seg.k},
                 {"tie_break", "score_desc_then_break_lex"},
                 {"candidates", std::move(cands)}};
        out << obj.dump() << "\n";
    }
    ArtifactWriter writer;
    writer.add(args.out, out.str());
    ManifestInfo info{"topk",
                      json{{"stats", args.seg.stats_specs},
                           {"titles", args.seg.titles_path},
                           {"wbn_source", args.seg.wbn_source},
                           {"k", args.seg.k},
                           {"queries", args.queries},
                           {"out", args.out}},
                      seed};
    add_manifest(writer, info, args.out, args.manifest);
    writer.flush();
}

struct SegmentArgs {
    SegmenterOpts seg;
    std::string queries = "-";
    std::string out = "-";
    std::string manifest;
};

void run_segment(const SegmentArgs& args, std::uint64_t seed) {
    auto registry = load_stats_registry(args.seg.stats_specs);
    const auto& wbn_stats = stats_source(registry, args.seg.wbn_source);
    const auto& mi_stats = stats_source(registry, args.seg.mi_source);
    auto titles = segrank::load_titles(args.seg.titles_path);
    auto cfg = rerank_config(args.seg);
    auto model = segrank::load_model(args.seg.model_path);
    validate_model_schema(model, cfg);

    std::ostringstream out;
    for (const auto& line : read_query_lines(args.queries)) {
        auto query = segrank::tokenize(line);
        auto list = segrank::topk(query, args.seg.k, wbn_stats, titles);
        std::size_t choice = segrank::rerank_choose(list, model, mi_stats, titles, cfg);
        const auto& cand = list.candidates[choice];
        json obj{{"query", query.raw},
                 {"segmentation", segrank::to_slash_string(query, cand.segmentation)},
                 {"breaks", breaks_json(cand.segmentation.breaks)},
                 {"wbn_rank", choice + 1},
                 {"wbn_score", cand.score}};
        out << obj.dump() << "\n";
    }
    ArtifactWriter writer;
    writer.add(args.out, out.str());
    ManifestInfo info{"segment",
                      json{{"stats", args.seg.stats_specs},
                           {"titles", args.seg.titles_path},
                           {"wbn_source", args.seg.wbn_source},
                           {"mi_source", args.seg.mi_source},
                           {"model", args.seg.model_path},
                           {"k", args.seg.k},
                           {"queries", args.queries},
                           {"out", args.out}},
                      seed};
    add_manifest(writer, info, args.out, args.manifest);
    writer.flush();
}

struct FuseArgs {
    std::string corpus;
    std::string out = "-";
    std::string manifest;
};

void run_fuse(const FuseArgs& args, std::uint64_t seed) {
    auto corpus = segrank::load_annotated_corpus(args.corpus);
    std::ostringstream out;
    for (const auto& entry : corpus) {
        if (entry.annotations.empty()) {
            throw segrank::DataError("fuse: query '" + entry.query.raw + "' has no annotations");
        }
        auto gold = segrank::fuse_breaks({entry.query, entry.annotations});
        json obj{{"query", entry.query.raw}, {"gold", breaks_json(gold.breaks)}};
        out << obj.dump() << "\n";
    }
    ArtifactWriter writer;
    writer.add(args.out, out.str());
    ManifestInfo info{"fuse", json{{"corpus", args.corpus}, {"out", args.out}}, seed};
    add_manifest(writer, info, args.out, args.manifest);
    writer.flush();
}

// Per-query candidate groups for training and cross validation.
std::vector<segrank::RerankGroup> corpus_groups(const std::vector<segrank::AnnotatedEntry>& corpus,
                                                const segrank::NGramStats& wbn_stats,
                                                const segrank::NGramStats& mi_stats,
                                                const segrank::TitleSet& titles, int k,
                                                const segrank::RerankConfig& cfg,
                                                bool drop_gold_absent) {
    std::vector<segrank::RerankGroup> groups;
    for (const auto& entry : corpus) {
        auto gold = segrank::gold_of(entry);
        auto list = segrank::topk(entry.query, k, wbn_stats, titles);
        auto group = segrank::prepare_group(std::move(list), gold, mi_stats, titles, cfg);
        if (drop_gold_absent && group.gold_index < 0) continue;
        groups.push_back(std::move(group));
    }
    return groups;
}

std::vector<segrank::TrainingInstance> all_instances(const std::vector<segrank::RerankGroup>& groups) {
    std::vector<segrank::TrainingInstance> out;
    for (const auto& g : groups) {
        auto inst = segrank::group_instances(g);
        out.insert(out.end(), inst.begin(), inst.end());
    }
    return out;
}

struct TrainRerankArgs {
    SegmenterOpts seg;
    std::string corpus;
    double c = 1.0;
    double j = 1.0;
    int b = 1;
    bool zscore = false;
    bool drop_gold_absent = false;
    std::string out = "-";
    std::string manifest;
};

void run_train_rerank(const TrainRerankArgs& args, std::uint64_t seed) {
    auto registry = load_stats_registry(args.seg.stats_specs);
    const auto& wbn_stats = stats_source(registry, args.seg.wbn_source);
    const auto& mi_stats = stats_source(registry, args.seg.mi_source);
    auto titles = segrank::load_titles(args.seg.titles_path);
    auto cfg = rerank_config(args.seg);
    auto corpus = segrank::load_annotated_corpus(args.corpus);
    auto groups = corpus_groups(corpus, wbn_stats, mi_stats, titles, args.seg.k, cfg,
                                args.drop_gold_absent);
    segrank::TrainOptions topts;
    topts.seed = seed;
    topts.scaling = args.zscore ? segrank::Scaling::zscore : segrank::Scaling::none;
    auto model = segrank::train(all_instances(groups), args.c, args.j, args.b != 0, topts);
    model.names = segrank::feature_names(cfg);
    std::ostringstream out;
    segrank::save_model(model, out);

    ArtifactWriter writer;
    writer.add(args.out, out.str());
    ManifestInfo info{"train-rerank",
                      json{{"stats", args.seg.stats_specs},
                           {"titles", args.seg.titles_path},
                           {"wbn_source", args.seg.wbn_source},
                           {"mi_source", args.seg.mi_source},
                           {"corpus", args.corpus},
                           {"k", args.seg.k},
                           {"c", args.c},
                           {"j", args.j},
                           {"b", args.b},
                           {"zscore", args.zscore},
                           {"drop_gold_absent", args.drop_gold_absent},
                           {"out", args.out}},
                      seed};
    add_manifest(writer, info, args.out, args.manifest);
    writer.flush();
}

struct SweepArgs {
    SegmenterOpts seg;
    std::string corpus;
    std::vector<double> grid_c = {0.1, 1.0, 10.0};
    std::vector<double> grid_j = {1.0, 2.0};
    std::vector<int> grid_b = {1, 0};
    std::size_t folds = 4;
    bool zscore = false;
    bool drop_gold_absent = false;
    std::string model_out;
    std::string out = "-";
    std::string manifest;
};

void run_sweep(const SweepArgs& args, std::uint64_t seed) {
    auto registry = load_stats_registry(args.seg.stats_specs);
    const auto& wbn_stats = stats_source(registry, args.seg.wbn_source);
    const auto& mi_stats = stats_source(registry, args.seg.mi_source);
    auto titles = segrank::load_titles(args.seg.titles_path);
    auto cfg = rerank_config(args.seg);
    auto corpus = segrank::load_annotated_corpus(args.corpus);
    auto groups = corpus_groups(corpus, wbn_stats, mi_stats, titles, args.seg.k, cfg,
                                args.drop_gold_absent);
    segrank::TrainOptions topts;
    topts.seed = seed;
    topts.scaling = args.zscore ? segrank::Scaling::zscore : segrank::Scaling::none;
    segrank::ParamGrid grid{args.grid_c, args.grid_j, args.grid_b};
    auto result = segrank::cross_validate(groups, grid, args.folds, topts);

    json points = json::array();
    for (const auto& p : result.points) {
        points.push_back({{"c", p.c}, {"j", p.j}, {"b", p.b}, {"accuracy", p.accuracy}});
    }
    json report{{"best", {{"c", result.best.c}, {"j", result.best.j}, {"b", result.best.b},
                          {"accuracy", result.best.accuracy}}},
                {"folds", args.folds},
                {"points", std::move(points)}};

    ArtifactWriter writer;
    writer.add(args.out, report.dump(2) + "\n");
    if (!args.model_out.empty()) {
        auto model = segrank::train(all_instances(groups), result.best.c, result.best.j,
                                    result.best.b != 0, topts);
        model.names = segrank::feature_names(cfg);
        std::ostringstream model_text;
        segrank::save_model(model, model_text);
        writer.add(args.model_out, model_text.str());
    }
    ManifestInfo info{"sweep",
                      json{{"stats", args.seg.stats_specs},
                           {"titles", args.seg.titles_path},
                           {"wbn_source", args.seg.wbn_source},
                           {"mi_source", args.seg.mi_source},
                           {"corpus", args.corpus},
                           {"k", args.seg.k},
                           {"grid_c", args.grid_c},
                           {"grid_j", args.grid_j},
                           {"grid_b", args.grid_b},
                           {"folds", args.folds},
                           {"zscore", args.zscore},
                           {"drop_gold_absent", args.drop_gold_absent},
                           {"model_out", args.model_out},
                           {"out", args.out}},
                      seed};
    add_manifest(writer, info, args.out, args.manifest);
    writer.flush();
}

struct EvalSegArgs {
    SegmenterOpts seg;
    std::string gold;
    std::string pred;
    std::string segmenter;  // wbn | rerank, alternative to --pred
    std::string name;
    std::string averaging = "micro";
    std::string out = "-";
    std::string manifest;
};

void run_eval_seg(const EvalSegArgs& args, std::uint64_t seed) {
    auto corpus = segrank::load_annotated_corpus(args.gold);
    std::vector<segrank::SegmentedQuery> golds;
    for (const auto& entry : corpus) {
        golds.push_back({entry.query, segrank::gold_of(entry)});
    }

    std::vector<segrank::SegmentedQuery> preds;
    std::string system_name = args.name;
    if (!args.pred.empty()) {
        preds = segrank::load_predictions(args.pred);
        if (system_name.empty()) system_name = "pred";
    } else if (!args.segmenter.empty()) {
        if (args.seg.stats_specs.empty() || args.seg.titles_path.empty()) {
            throw segrank::ConfigError("eval-seg --segmenter needs --stats and --titles");
        }
        auto registry = load_stats_registry(args.seg.stats_specs);
        auto titles = segrank::load_titles(args.seg.titles_path);
        Segmenter segmenter;
        segmenter.kind = args.segmenter;
        segmenter.wbn_stats = &stats_source(registry, args.seg.wbn_source);
        segmenter.mi_stats = &stats_source(registry, args.seg.mi_source);
        segmenter.titles = &titles;
        segmenter.k = args.seg.k;
        segmenter.cfg = rerank_config(args.seg);
        if (args.segmenter == "rerank") {
            if (args.seg.model_path.empty()) {
                throw segrank::ConfigError("eval-seg --segmenter rerank needs --model");
            }
            segmenter.model = segrank::load_model(args.seg.model_path);
            validate_model_schema(*segmenter.model, segmenter.cfg);
        }
        for (const auto& g : golds) {
            preds.push_back({g.query, segmenter.segment(g.query)});
        }
        if (system_name.empty()) system_name = args.segmenter;
    } else {
        throw segrank::ConfigError("eval-seg needs either --pred or --segmenter");
    }

    auto averaging = args.averaging == "macro" ? segrank::Averaging::macro
                                               : segrank::Averaging::micro;
    auto metrics = segrank::evaluate(preds, golds, averaging);

    std::ostringstream out;
    char row[256];
    out << "# segrank segmentation report\n";
    out << "# averaging: " << args.averaging << "\n";
    out << "system\tquery_accuracy\tsegment_precision\tsegment_recall\tsegment_f\tbreak_accuracy\n";
    std::snprintf(row, sizeof(row), "%s\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\n", system_name.c_str(),
                  metrics.query_accuracy, metrics.segment_precision, metrics.segment_recall,
                  metrics.segment_f, metrics.break_accuracy);
    out << row;
    out << "# reference (BWC, published re-ranking results): "
           "query_accuracy 0.602, segment_precision 0.715, segment_recall 0.700, "
           "segment_f 0.707, break_accuracy 0.848\n";
    out << "# reference (WQS, published re-ranking results): "
           "query_accuracy 0.560, segment_precision 0.710, segment_recall 0.749, "
           "segment_f 0.729, break_accuracy 0.800\n";

    ArtifactWriter writer;
    writer.add(args.out, out.str());
    ManifestInfo info{"eval-seg",
                      json{{"gold", args.gold},
                           {"pred", args.pred},
                           {"segmenter", args.segmenter},
                           {"name", system_name},
                           {"averaging", args.averaging},
                           {"out", args.out}},
                      seed};
    add_manifest(writer, info, args.out, args.manifest);
    writer.flush();
}

struct IndexArgs {
    std::string corpus;
    int kn_budget = 20;
    std::size_t max_df_len = 8;
    std::string out = "-";
    std::string manifest;
};

void run_index(const IndexArgs& args, std::uint64_t seed) {
    auto docs = segrank::load_documents(args.corpus);
    for (auto& doc : docs) {  // the key field is built here, never ingested
        doc.fields[segrank::kKeyFieldIndex].clear();
        doc.has_key = false;
    }
    segrank::IndexData index;
    index.kn_budget = args.kn_budget;
    index.max_df_len = args.max_df_len;
    if (args.kn_budget > 0) {
        auto base_stats = segrank::build_collection_stats(docs, args.max_df_len);
        for (auto& doc : docs) {
            doc.fields[segrank::kKeyFieldIndex] = segrank::extract_key_ngrams(
                doc.fields[2], args.kn_budget, base_stats.fields[2]);
            doc.has_key = true;
        }
    }
    index.stats = segrank::build_collection_stats(docs, args.max_df_len);
    index.docs = std::move(docs);

    ArtifactWriter writer;
    writer.add(args.out, segrank::index_to_json(index).dump() + "\n");
    ManifestInfo info{"index",
                      json{{"corpus", args.corpus},
                           {"kn_budget", args.kn_budget},
                           {"max_df_len", args.max_df_len},
                           {"out", args.out}},
                      seed};
    add_manifest(writer, info, args.out, args.manifest);
    writer.flush();
}

struct RankArgs {
    SegmenterOpts seg;
    std::string index_path;
    std::string queries;
    std::string judgments;
    std::string scheme = "bm25";
    std::string segmenter = "none";
    std::string rep = "wp";
    double bm25_k1 = 1.2;
    double bm25_b = 0.75;
    std::string dm_weights_path;
    std::size_t window = 8;
    std::string out = "-";
    std::string manifest;
};

void run_rank(const RankArgs& args, std::uint64_t seed) {
    auto index = segrank::load_index(args.index_path);
    auto queries = segrank::load_ranking_queries(args.queries);
    auto judgments = segrank::load_judgments(args.judgments);

    segrank::Scheme scheme = args.scheme == "bm25" ? segrank::Scheme::bm25
                             : args.scheme == "kn" ? segrank::Scheme::kn
                                                   : segrank::Scheme::dm;
    if (scheme == segrank::Scheme::kn && !index.stats.has_key) {
        throw segrank::DataError("rank --scheme kn needs an index built with --kn-budget > 0");
    }

    std::map<std::string, segrank::NGramStats> registry;
    std::optional<segrank::TitleSet> titles;
    Segmenter segmenter;
    segmenter.kind = args.segmenter;
    segmenter.k = args.seg.k;
    segmenter.cfg = rerank_config(args.seg);
    if (args.segmenter != "none") {
        if (args.seg.stats_specs.empty() || args.seg.titles_path.empty()) {
            throw segrank::ConfigError("rank --segmenter " + args.segmenter +
                                       " needs --stats and --titles");
        }
        registry = load_stats_registry(args.seg.stats_specs);
        titles = segrank::load_titles(args.seg.titles_path);
        segmenter.wbn_stats = &stats_source(registry, args.seg.wbn_source);
        segmenter.mi_stats = &stats_source(registry, args.seg.mi_source);
        segmenter.titles = &*titles;
        if (args.segmenter == "rerank") {
            if (args.seg.model_path.empty()) {
                throw segrank::ConfigError("rank --segmenter rerank needs --model");
            }
            segmenter.model = segrank::load_model(args.seg.model_path);
            validate_model_schema(*segmenter.model, segmenter.cfg);
        }
    }

    std::unordered_map<std::string, const segrank::Document*> by_id;
    for (const auto& d : index.docs) by_id[d.id] = &d;
    std::unordered_map<std::string, std::vector<const segrank::Judgment*>> by_query;
    for (const auto& j : judgments) by_query[j.qid].push_back(&j);

    segrank::Bm25Params params{args.bm25_k1, args.bm25_b};
    segrank::DmWeightProvider weights =
        args.dm_weights_path.empty() ? segrank::DmWeightProvider::constant(1.0)
                                     : segrank::DmWeightProvider::from_tsv(args.dm_weights_path);

    // rep selection: w keeps the word half, p the phrase half, wp everything.
    const std::size_t full_dim = segrank::feature_count(scheme);
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < full_dim; ++i) {
        bool phrase = segrank::is_phrase_cell(scheme, i);
        if (args.rep == "wp" || (args.rep == "w" && !phrase) || (args.rep == "p" && phrase)) {
            kept.push_back(i);
        }
    }

    std::vector<segrank::MatrixRow> rows;
    for (const auto& rq : queries) {
        auto it = by_query.find(rq.qid);
        if (it == by_query.end()) continue;
        auto query = segrank::tokenize(rq.text);
        auto seg = segmenter.segment(query);
        auto rep = segrank::build_dual_rep(query, seg);
        for (const auto* j : it->second) {
            auto doc_it = by_id.find(j->doc_id);
            if (doc_it == by_id.end()) {
                throw segrank::DataError("judgment references unknown document '" + j->doc_id + "'");
            }
            std::vector<double> full;
            switch (scheme) {
                case segrank::Scheme::bm25:
                    full = segrank::bm25_features(*doc_it->second, rep, index.stats, params);
                    break;
                case segrank::Scheme::kn:
                    full = segrank::kn_features(*doc_it->second, rep, index.stats, params);
                    break;
                case segrank::Scheme::dm:
                    full = segrank::dm_features(*doc_it->second, rep, weights, args.window);
                    break;
            }
            segrank::MatrixRow row;
            row.grade = j->grade;
            row.qid = rq.qid;
            row.values.reserve(kept.size());
            for (std::size_t idx : kept) row.values.push_back(full[idx]);
            rows.push_back(std::move(row));
        }
    }

    std::ostringstream out;
    segrank::write_feature_matrix(out, rows);
    ArtifactWriter writer;
    writer.add(args.out, out.str());
    ManifestInfo info{"rank",
                      json{{"index", args.index_path},
                           {"queries", args.queries},
                           {"judgments", args.judgments},
                           {"scheme", args.scheme},
                           {"segmenter", args.segmenter},
                           {"rep", args.rep},
                           {"stats", args.seg.stats_specs},
                           {"titles", args.seg.titles_path},
                           {"model", args.seg.model_path},
                           {"k", args.seg.k},
                           {"bm25_k1", args.bm25_k1},
                           {"bm25_b", args.bm25_b},
                           {"dm_weights", args.dm_weights_path},
                           {"window", args.window},
                           {"out", args.out}},
                      seed};
    add_manifest(writer, info, args.out, args.manifest);
    writer.flush();
}

struct TrainLtrArgs {
    std::string features;
    std::string valid;
    int ndcg_k = 10;
    std::string out = "-";
    std::string manifest;
};

void run_train_ltr(const TrainLtrArgs& args, std::uint64_t seed) {
    auto train_groups = segrank::group_matrix_rows(segrank::load_feature_matrix(args.features));
    std::vector<segrank::LtrGroup> valid_groups;
    if (!args.valid.empty()) {
        valid_groups = segrank::group_matrix_rows(segrank::load_feature_matrix(args.valid));
    }
    segrank::LtrOptions opts;
    opts.ndcg_k = args.ndcg_k;
    opts.seed = seed;
    auto model = segrank::train_ltr(train_groups, valid_groups, opts);
    std::vector<std::string> names;
    for (std::size_t i = 0; i < model.weights.size(); ++i) {
        names.push_back("f" + std::to_string(i + 1));
    }
    std::ostringstream out;
    segrank::save_ltr_model(model, names, out);

    ArtifactWriter writer;
    writer.add(args.out, out.str());
    ManifestInfo info{"train-ltr",
                      json{{"features", args.features},
                           {"valid", args.valid},
                           {"ndcg_k", args.ndcg_k},
                           {"out", args.out}},
                      seed};
    add_manifest(writer, info, args.out, args.manifest);
    writer.flush();
}

struct EvalRankArgs {
    std::string features;
    std::string model;
    std::string ndcg = "1,5,10";
    std::string per_query;
    std::string out = "-";
    std::string manifest;
};

void run_eval_rank(const EvalRankArgs& args, std::uint64_t seed) {
    auto groups = segrank::group_matrix_rows(segrank::load_feature_matrix(args.features));
    auto model = segrank::load_ltr_model(args.model);
    std::vector<int> cutoffs;
    std::stringstream ss(args.ndcg);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            int k = std::stoi(item);
            if (k < 1) throw std::invalid_argument("k");
            cutoffs.push_back(k);
        } catch (const std::exception&) {
            throw segrank::ConfigError("bad --ndcg list '" + args.ndcg + "'");
        }
    }
    if (cutoffs.empty()) throw segrank::ConfigError("--ndcg needs at least one cutoff");
    if (!groups.empty() && groups.front().features.front().size() != model.weights.size()) {
        throw segrank::DataError("combiner dimension does not match the feature matrix");
    }

    std::ostringstream out;
    out << "# segrank ranking report\n";
    out << "k\tmean_ndcg\tqueries\n";
    char row[128];
    for (int k : cutoffs) {
        double mean = segrank::mean_ndcg(groups, model.weights, k);
        std::snprintf(row, sizeof(row), "%d\t%.6f\t%zu\n", k, mean, groups.size());
        out << row;
    }
    ArtifactWriter writer;
    writer.add(args.out, out.str());
    if (!args.per_query.empty()) {
        std::ostringstream pq;
        pq << "qid";
        for (int k : cutoffs) pq << "\tndcg@" << k;
        pq << "\n";
        for (const auto& g : groups) {
            pq << g.qid;
            auto grades = segrank::ranked_grades(g, model.weights);
            for (int k : cutoffs) {
                std::snprintf(row, sizeof(row), "\t%.6f", segrank::ndcg_at(grades, k));
                pq << row;
            }
            pq << "\n";
        }
        writer.add(args.per_query, pq.str());
    }
    ManifestInfo info{"eval-rank",
                      json{{"features", args.features},
                           {"model", args.model},
                           {"ndcg", args.ndcg},
                           {"per_query", args.per_query},
                           {"out", args.out}},
                      seed};
    add_manifest(writer, info, args.out, args.manifest);
    writer.flush();
}

const char* kFormatFooter = R"(File formats (all UTF-8, LF line endings):
  n-gram stats TSV     ngram<TAB>count          e.g. `hot dog<TAB>100`; optional `__TOTAL__<TAB>900`
  title list           one title per line       e.g. `hot dog`
  annotated corpus     JSON lines               e.g. {"query":"hot dog stand","annotations":[[0,1],[0,1],[1,0]]}
                                                or   {"query":"hot dog stand","gold":[0,1]}
  predictions          JSON lines               e.g. {"query":"hot dog stand","breaks":[0,1]}
  document corpus      JSON lines               e.g. {"id":"d1","url":"...","title":"...","body":"...",
                                                     "meta_keywords":"...","meta_description":"...",
                                                     "anchor":"...","associated_queries":"..."}
  ranking queries TSV  query_id<TAB>query_text  e.g. `q1<TAB>hot dog stand`
  judgments TSV        query_id<TAB>doc_id<TAB>grade   grades 0..4, e.g. `q1<TAB>d1<TAB>3`
  feature matrix       grade qid:<id> <idx>:<val> ...  dense, 1-based indices, e.g. `3 qid:q1 1:0.5 2:0 ...`
  dm weights TSV       ngram<TAB>w1<TAB>...<TAB>w7     seven weights per n-gram

Exit codes: 0 ok, 2 config error, 3 data error, 4 internal invariant violation.)";

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"segrank: re-ranking query segmentation and segmentation-aware "
                 "relevance features"};
    app.require_subcommand(1);
    app.footer(kFormatFooter);
    std::uint64_t seed = 42;
    app.add_option("--seed", seed, "seed recorded in run manifests")->capture_default_str();

    TopkArgs topk_args;
    auto* topk_cmd = app.add_subcommand(
        "topk", "rank the top-k segmentations per query (reads one query per line)");
    add_stats_options(topk_cmd, topk_args.seg);
    topk_cmd->add_option("--queries", topk_args.queries, "query file, '-' for stdin")->capture_default_str();
    topk_cmd->add_option("--out", topk_args.out, "output path, '-' for stdout")->capture_default_str();
    topk_cmd->add_option("--manifest", topk_args.manifest, "manifest path (default: <out>.manifest.json)");

    SegmentArgs segment_args;
    auto* segment_cmd = app.add_subcommand("segment", "emit the re-ranked best segmentation per query");
    add_stats_options(segment_cmd, segment_args.seg);
    segment_cmd->add_option("--model", segment_args.seg.model_path, "re-ranking model file")->required();
    segment_cmd->add_option("--indicator-words", segment_args.seg.indicator_words,
                            "override the 18 single-word indicator features (comma-separated)")->delimiter(',');
    segment_cmd->add_option("--queries", segment_args.queries, "query file, '-' for stdin")->capture_default_str();
    segment_cmd->add_option("--out", segment_args.out, "output path")->capture_default_str();
    segment_cmd->add_option("--manifest", segment_args.manifest, "manifest path");

    FuseArgs fuse_args;
    auto* fuse_cmd = app.add_subcommand("fuse", "build gold break vectors by majority vote");
    fuse_cmd->add_option("--corpus", fuse_args.corpus, "annotated corpus (JSON lines)")->required();
    fuse_cmd->add_option("--out", fuse_args.out, "output path")->capture_default_str();
    fuse_cmd->add_option("--manifest", fuse_args.manifest, "manifest path");

    TrainRerankArgs train_args;
    auto* train_cmd = app.add_subcommand("train-rerank", "train the re-ranking model");
    add_stats_options(train_cmd, train_args.seg);
    train_cmd->add_option("--corpus", train_args.corpus, "annotated corpus (JSON lines)")->required();
    train_cmd->add_option("--c", train_args.c, "regularization/slack trade-off")->capture_default_str();
    train_cmd->add_option("--j", train_args.j, "positive-class cost multiplier")->capture_default_str();
    train_cmd->add_option("--b", train_args.b, "fit a bias term (1) or fix it at zero (0)")->capture_default_str();
    train_cmd->add_flag("--zscore", train_args.zscore, "z-score features before training");
    train_cmd->add_flag("--drop-gold-absent", train_args.drop_gold_absent,
                        "drop queries whose gold is outside the top-k list");
    train_cmd->add_option("--indicator-words", train_args.seg.indicator_words,
                          "override the 18 single-word indicator features (comma-separated)")->delimiter(',');
    train_cmd->add_option("--out", train_args.out, "model output path")->capture_default_str();
    train_cmd->add_option("--manifest", train_args.manifest, "manifest path");

    SweepArgs sweep_args;
    auto* sweep_cmd = app.add_subcommand("sweep", "cross-validated grid search over {c, j, b}");
    add_stats_options(sweep_cmd, sweep_args.seg);
    sweep_cmd->add_option("--corpus", sweep_args.corpus, "annotated corpus (JSON lines)")->required();
    sweep_cmd->add_option("--grid-c", sweep_args.grid_c, "c grid values (comma-separated)")->capture_default_str()->delimiter(',');
    sweep_cmd->add_option("--grid-j", sweep_args.grid_j, "j grid values (comma-separated)")->capture_default_str()->delimiter(',');
    sweep_cmd->add_option("--grid-b", sweep_args.grid_b, "b grid values (0/1, comma-separated)")->capture_default_str()->delimiter(',');
    sweep_cmd->add_option("--folds", sweep_args.folds, "fold count")->capture_default_str()
        ->check(CLI::Range(std::size_t{2}, std::size_t{1000}));
    sweep_cmd->add_flag("--zscore", sweep_args.zscore, "z-score features before training");
    sweep_cmd->add_flag("--drop-gold-absent", sweep_args.drop_gold_absent,
                        "drop queries whose gold is outside the top-k list");
    sweep_cmd->add_option("--indicator-words", sweep_args.seg.indicator_words,
                          "override the 18 single-word indicator features (comma-separated)")->delimiter(',');
    sweep_cmd->add_option("--model-out", sweep_args.model_out,
                          "also train a final model on all data with the best parameters");
    sweep_cmd->add_option("--out", sweep_args.out, "sweep report path (JSON)")->capture_default_str();
    sweep_cmd->add_option("--manifest", sweep_args.manifest, "manifest path");

    EvalSegArgs eval_seg_args;
    auto* eval_seg_cmd = app.add_subcommand("eval-seg", "five segmentation measures against a gold corpus");
    eval_seg_cmd->add_option("--gold", eval_seg_args.gold, "gold corpus (annotated or fused JSON lines)")->required();
    eval_seg_cmd->add_option("--pred", eval_seg_args.pred, "prediction file (JSON lines)");
    eval_seg_cmd->add_option("--segmenter", eval_seg_args.segmenter, "compute predictions: wbn | rerank")
        ->check(CLI::IsMember({"wbn", "rerank"}));
    add_stats_options(eval_seg_cmd, eval_seg_args.seg, false);
    eval_seg_cmd->add_option("--model", eval_seg_args.seg.model_path, "re-ranking model (for --segmenter rerank)");
    eval_seg_cmd->add_option("--indicator-words", eval_seg_args.seg.indicator_words,
                             "override the 18 single-word indicator features (comma-separated)")->delimiter(',');
    eval_seg_cmd->add_option("--name", eval_seg_args.name, "system name in the report");
    eval_seg_cmd->add_option("--averaging", eval_seg_args.averaging, "micro | macro")
        ->capture_default_str()
        ->check(CLI::IsMember({"micro", "macro"}));
    eval_seg_cmd->add_option("--out", eval_seg_args.out, "report path (TSV)")->capture_default_str();
    eval_seg_cmd->add_option("--manifest", eval_seg_args.manifest, "manifest path");

    IndexArgs index_args;
    auto* index_cmd = app.add_subcommand("index", "build collection statistics and key n-gram fields");
    index_cmd->add_option("--corpus", index_args.corpus, "document corpus (JSON lines)")->required();
    index_cmd->add_option("--kn-budget", index_args.kn_budget,
                          "key n-grams per document (0 disables the key field)")->capture_default_str();
    index_cmd->add_option("--max-df-len", index_args.max_df_len,
                          "longest token run indexed for document frequencies")->capture_default_str();
    index_cmd->add_option("--out", index_args.out, "index path (JSON)")->capture_default_str();
    index_cmd->add_option("--manifest", index_args.manifest, "manifest path");

    RankArgs rank_args;
    auto* rank_cmd = app.add_subcommand("rank", "extract relevance features for judged documents");
    rank_cmd->add_option("--index", rank_args.index_path, "index file from `segrank index`")->required();
    rank_cmd->add_option("--queries", rank_args.queries, "ranking queries TSV")->required();
    rank_cmd->add_option("--judgments", rank_args.judgments, "judgments TSV")->required();
    rank_cmd->add_option("--scheme", rank_args.scheme, "bm25 | kn | dm")->capture_default_str()
        ->check(CLI::IsMember({"bm25", "kn", "dm"}));
    rank_cmd->add_option("--segmenter", rank_args.segmenter, "none | wbn | rerank")->capture_default_str()
        ->check(CLI::IsMember({"none", "wbn", "rerank"}));
    rank_cmd->add_option("--rep", rank_args.rep, "wp (both) | w (words) | p (phrases)")->capture_default_str()
        ->check(CLI::IsMember({"wp", "w", "p"}));
    rank_cmd->add_option("--stats", rank_args.seg.stats_specs, "n-gram stats (for --segmenter wbn/rerank)");
    rank_cmd->add_option("--titles", rank_args.seg.titles_path, "title list (for --segmenter wbn/rerank)");
    rank_cmd->add_option("--wbn-source", rank_args.seg.wbn_source, "stats source for segment weights")
        ->capture_default_str();
    rank_cmd->add_option("--mi-source", rank_args.seg.mi_source, "stats source for MI features")
        ->capture_default_str();
    rank_cmd->add_option("--model", rank_args.seg.model_path, "re-ranking model (for --segmenter rerank)");
    rank_cmd->add_option("--indicator-words", rank_args.seg.indicator_words,
                         "override the 18 single-word indicator features (comma-separated)")->delimiter(',');
    rank_cmd->add_option("--k", rank_args.seg.k, "candidate list size")->capture_default_str()
        ->check(CLI::PositiveNumber);
    rank_cmd->add_option("--bm25-k1", rank_args.bm25_k1, "BM25 k1")->capture_default_str();
    rank_cmd->add_option("--bm25-b", rank_args.bm25_b, "BM25 b")->capture_default_str();
    rank_cmd->add_option("--dm-weights", rank_args.dm_weights_path,
                         "dependency weight TSV (default: constant 1)");
    rank_cmd->add_option("--window", rank_args.window, "dependency co-occurrence window")->capture_default_str();
    rank_cmd->add_option("--out", rank_args.out, "feature matrix path")->capture_default_str();
    rank_cmd->add_option("--manifest", rank_args.manifest, "manifest path");

    TrainLtrArgs train_ltr_args;
    auto* train_ltr_cmd = app.add_subcommand("train-ltr", "train the linear feature combiner on NDCG");
    train_ltr_cmd->add_option("--features", train_ltr_args.features, "training feature matrix")->required();
    train_ltr_cmd->add_option("--valid", train_ltr_args.valid, "validation feature matrix (early stopping)");
    train_ltr_cmd->add_option("--ndcg-k", train_ltr_args.ndcg_k, "optimization cutoff")->capture_default_str()
        ->check(CLI::PositiveNumber);
    train_ltr_cmd->add_option("--out", train_ltr_args.out, "combiner output path")->capture_default_str();
    train_ltr_cmd->add_option("--manifest", train_ltr_args.manifest, "manifest path");

    EvalRankArgs eval_rank_args;
    auto* eval_rank_cmd = app.add_subcommand("eval-rank", "mean NDCG of a combiner over a feature matrix");
    eval_rank_cmd->add_option("--features", eval_rank_args.features, "feature matrix with grades")->required();
    eval_rank_cmd->add_option("--model", eval_rank_args.model, "combiner from `segrank train-ltr`")->required();
    eval_rank_cmd->add_option("--ndcg", eval_rank_args.ndcg, "comma-separated cutoffs")->capture_default_str();
    eval_rank_cmd->add_option("--per-query", eval_rank_args.per_query, "optional per-query NDCG table");
    eval_rank_cmd->add_option("--out", eval_rank_args.out, "report path (TSV)")->capture_default_str();
    eval_rank_cmd->add_option("--manifest", eval_rank_args.manifest, "manifest path");

    // global options (--seed) may appear after the subcommand name
    for (auto* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (topk_cmd->parsed()) run_topk(topk_args, seed);
        if (segment_cmd->parsed()) run_segment(segment_args, seed);
        if (fuse_cmd->parsed()) run_fuse(fuse_args, seed);
        if (train_cmd->parsed()) run_train_rerank(train_args, seed);
        if (sweep_cmd->parsed()) run_sweep(sweep_args, seed);
        if (eval_seg_cmd->parsed()) run_eval_seg(eval_seg_args, seed);
        if (index_cmd->parsed()) run_index(index_args, seed);
        if (rank_cmd->parsed()) run_rank(rank_args, seed);
        if (train_ltr_cmd->parsed()) run_train_ltr(train_ltr_args, seed);
        if (eval_rank_cmd->parsed()) run_eval_rank(eval_rank_args, seed);
    } catch (const segrank::ConfigError& e) {
        std::cerr << "segrank: config error: " << e.what() << "\n";
        return 2;
    } catch (const segrank::DataError& e) {
        std::cerr << "segrank: data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "segrank: internal error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
