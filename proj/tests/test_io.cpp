#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "segrank/io.hpp"
#include "test_util.hpp"

using namespace segrank;

TEST_CASE("annotated corpus accepts annotations, gold, or both") {
    auto path = testutil::write_file(
        "corpus_ok.jsonl",
        R"({"query": "hot dog stand", "annotations": [[0,1],[0,1],[1,0]]})"
        "\n"
        R"({"query": "new york", "gold": [0]})"
        "\n"
        R"({"query": "a b c", "annotations": [[1,1]], "gold": [1,0]})"
        "\n");
    auto corpus = load_annotated_corpus(path);
    REQUIRE(corpus.size() == 3);
    CHECK(corpus[0].annotations.size() == 3);
    CHECK_FALSE(corpus[0].gold.has_value());
    CHECK(gold_of(corpus[0]).breaks == std::vector<std::uint8_t>{0, 1});
    CHECK(gold_of(corpus[1]).breaks == std::vector<std::uint8_t>{0});
    // explicit gold wins over fusing
    CHECK(gold_of(corpus[2]).breaks == std::vector<std::uint8_t>{1, 0});
}

TEST_CASE("annotated corpus rejects malformed lines with their number") {
    auto bad_json = testutil::write_file("corpus_badjson.jsonl",
                                         "{\"query\": \"a b\", \"gold\": [0]}\nnot json\n");
    CHECK_THROWS_MATCHES(load_annotated_corpus(bad_json), DataError,
                         Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("line 2")));
    auto bad_len = testutil::write_file("corpus_badlen.jsonl",
                                        R"({"query": "a b c", "gold": [0]})" "\n");
    CHECK_THROWS_AS(load_annotated_corpus(bad_len), DataError);
    auto bad_bit = testutil::write_file("corpus_badbit.jsonl",
                                        R"({"query": "a b", "gold": [2]})" "\n");
    CHECK_THROWS_AS(load_annotated_corpus(bad_bit), DataError);
    auto no_anno = testutil::write_file("corpus_none.jsonl", R"({"query": "a b"})" "\n");
    CHECK_THROWS_AS(load_annotated_corpus(no_anno), DataError);
}

TEST_CASE("prediction files accept break vectors or slash strings") {
    auto path = testutil::write_file(
        "pred.jsonl",
        R"({"query": "hot dog stand", "breaks": [0,1]})"
        "\n"
        R"({"query": "new york", "segmentation": "new york"})"
        "\n");
    auto preds = load_predictions(path);
    REQUIRE(preds.size() == 2);
    CHECK(preds[0].seg.breaks == std::vector<std::uint8_t>{0, 1});
    CHECK(preds[1].seg.breaks == std::vector<std::uint8_t>{0});

    auto mismatch = testutil::write_file(
        "pred_bad.jsonl", R"({"query": "hot dog", "segmentation": "hot / cat"})" "\n");
    CHECK_THROWS_AS(load_predictions(mismatch), DataError);
}

TEST_CASE("document corpus loads lowercased token fields") {
    auto path = testutil::write_file(
        "docs_ok.jsonl",
        R"({"id": "d1", "title": "Hot DOG", "body": "a b", "url": "x y"})" "\n");
    auto docs = load_documents(path);
    REQUIRE(docs.size() == 1);
    CHECK(docs[0].fields[1] == std::vector<std::string>{"hot", "dog"});
    CHECK(docs[0].fields[3].empty());  // absent fields stay empty
    CHECK_FALSE(docs[0].has_key);

    auto dup = testutil::write_file("docs_dup.jsonl",
                                    R"({"id": "d1", "body": "a"})" "\n"
                                    R"({"id": "d1", "body": "b"})" "\n");
    CHECK_THROWS_AS(load_documents(dup), DataError);
    auto no_id = testutil::write_file("docs_noid.jsonl", R"({"body": "a"})" "\n");
    CHECK_THROWS_AS(load_documents(no_id), DataError);
}

TEST_CASE("judgments parse and validate grades") {
    auto path = testutil::write_file("judg.tsv", "q1\td1\t4\nq1\td2\t0\nq2\td1\t2\n");
    auto judgments = load_judgments(path);
    REQUIRE(judgments.size() == 3);
    CHECK(judgments[0].qid == "q1");
    CHECK(judgments[0].doc_id == "d1");
    CHECK(judgments[0].grade == 4);

    CHECK_THROWS_AS(load_judgments(testutil::write_file("judg_bad.tsv", "q1\td1\t7\n")),
                    DataError);
    CHECK_THROWS_AS(load_judgments(testutil::write_file("judg_cols.tsv", "q1 d1 3\n")),
                    DataError);
}

TEST_CASE("ranking queries parse id and text") {
    auto path = testutil::write_file("rq.tsv", "q1\thot dog stand\nq2\tnew york\n");
    auto queries = load_ranking_queries(path);
    REQUIRE(queries.size() == 2);
    CHECK(queries[1].qid == "q2");
    CHECK(queries[1].text == "new york");
    CHECK_THROWS_AS(load_ranking_queries(testutil::write_file("rq_bad.tsv", "no tab\n")),
                    DataError);
}

TEST_CASE("feature matrices round-trip through the text form") {
    std::vector<MatrixRow> rows = {
        {3, "q1", {0.5, 0.0, 1.25e-7}},
        {0, "q1", {1.0, 2.0, 3.0}},
        {4, "q2", {0.0, 0.0, 0.0}},
    };
    std::ostringstream text;
    write_feature_matrix(text, rows);
    CHECK(text.str().substr(0, 22) == "3 qid:q1 1:0.5 2:0 3:1");

    auto path = testutil::write_file("matrix.txt", text.str());
    auto loaded = load_feature_matrix(path);
    REQUIRE(loaded.size() == 3);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(loaded[i].grade == rows[i].grade);
        CHECK(loaded[i].qid == rows[i].qid);
        REQUIRE(loaded[i].values.size() == rows[i].values.size());
        for (std::size_t d = 0; d < rows[i].values.size(); ++d) {
            CHECK(loaded[i].values[d] == Catch::Approx(rows[i].values[d]).epsilon(1e-8));
        }
    }

    auto groups = group_matrix_rows(loaded);
    REQUIRE(groups.size() == 2);
    CHECK(groups[0].qid == "q1");
    CHECK(groups[0].grades == std::vector<int>{3, 0});
    CHECK(groups[1].qid == "q2");

    CHECK_THROWS_AS(load_feature_matrix(testutil::write_file("matrix_bad.txt", "x\n")),
                    DataError);
    CHECK_THROWS_AS(load_feature_matrix(testutil::write_file("matrix_zero.txt",
                                                             "1 qid:q1 0:0.5\n")),
                    DataError);
}

TEST_CASE("index artifacts round-trip documents and statistics") {
    std::vector<Document> docs;
    Document d1;
    d1.id = "d1";
    d1.fields[1] = {"hot", "dog"};
    d1.fields[2] = {"the", "hot", "dog", "stand"};
    Document d2;
    d2.id = "d2";
    d2.fields[2] = {"cat"};
    docs = {d1, d2};
    auto body_stats = build_collection_stats(docs).fields[2];
    for (auto& d : docs) {
        d.fields[kKeyFieldIndex] = extract_key_ngrams(d.fields[2], 3, body_stats);
        d.has_key = true;
    }

    IndexData index;
    index.docs = docs;
    index.stats = build_collection_stats(docs);
    index.kn_budget = 3;
    index.max_df_len = 8;

    auto path = testutil::scratch_dir() / "index.json";
    save_index(index, path.string());
    auto loaded = load_index(path.string());

    CHECK(loaded.kn_budget == 3);
    CHECK(loaded.max_df_len == 8);
    CHECK(loaded.stats.doc_count == 2);
    CHECK(loaded.stats.has_key);
    REQUIRE(loaded.docs.size() == 2);
    for (std::size_t i = 0; i < docs.size(); ++i) {
        CHECK(loaded.docs[i].id == docs[i].id);
        for (std::size_t f = 0; f < 8; ++f) {
            CHECK(loaded.docs[i].fields[f] == docs[i].fields[f]);
        }
    }
    for (std::size_t f = 0; f < 8; ++f) {
        CHECK(loaded.stats.fields[f].df == index.stats.fields[f].df);
        for (int o = 0; o < 3; ++o) {
            CHECK(loaded.stats.fields[f].avg_len[o] == index.stats.fields[f].avg_len[o]);
        }
    }

    CHECK_THROWS_AS(load_index(testutil::write_file("index_bad.json", "{}")), DataError);
    CHECK_THROWS_AS(load_index("/nonexistent/index.json"), DataError);
}
