#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include <json.hpp>

#include "mum/errors.hpp"
#include "mum/io_util.hpp"
#include "mum/pipeline.hpp"
#include "mum/profiles.hpp"
#include "mum/rng.hpp"
#include "support/fixture.hpp"
#include "support/oracles.hpp"

using namespace mum;
using pipeline::PipelineConfig;
using pipeline::UserMetric;

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "mum_pipeline_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    Matrix m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    return m;
}

} // namespace

TEST_CASE("sha256 known vectors") {
    CHECK(sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("The quick brown fox jumps over the lazy dog") ==
          "d7a8fbb307d7809469ca9abcb0082e4f8d5651e46d3cdb762d02d0bf37c9e592");
}

TEST_CASE("fit_euclidean recovers separated groups and tolerates duplicates") {
    SUBCASE("two point-mass groups split exactly") {
        Matrix points(20, 2);
        for (std::size_t i = 0; i < 20; ++i) {
            points(i, 0) = i < 12 ? 0.0 + 0.01 * static_cast<double>(i) : 10.0;
            points(i, 1) = i < 12 ? 0.0 : 5.0;
        }
        const auto r = pipeline::fit_euclidean(points, 2, 0);
        for (std::size_t i = 1; i < 12; ++i) CHECK(r.assignments[i] == r.assignments[0]);
        for (std::size_t i = 13; i < 20; ++i) CHECK(r.assignments[i] == r.assignments[12]);
        CHECK(r.assignments[0] != r.assignments[12]);
    }

    SUBCASE("identical profiles collapse into one cluster with zero distortion") {
        Matrix points(8, 3);
        for (std::size_t i = 0; i < 8; ++i) {
            points(i, 0) = 40.0;
            points(i, 1) = 35.0;
            points(i, 2) = 25.0;
        }
        const auto r = pipeline::fit_euclidean(points, 2, 1);
        CHECK(r.heterogeneity == 0.0);
        for (std::size_t i = 1; i < 8; ++i) CHECK(r.assignments[i] == r.assignments[0]);
    }

    SUBCASE("distortion trace never increases") {
        Rng rng(6);
        Matrix points(60, 4);
        for (std::size_t i = 0; i < points.size(); ++i) points.data()[i] = rng.uniform(0.0, 10.0);
        const auto r = pipeline::fit_euclidean(points, 4, 3, 100, 0.0);
        for (std::size_t i = 1; i < r.het_trace.size(); ++i) {
            CHECK(r.het_trace[i] <= r.het_trace[i - 1] + 1e-9);
        }
    }
}

TEST_CASE("cluster_users picks the best seed and validates sizes") {
    Matrix profiles(6, 2);
    for (std::size_t i = 0; i < 6; ++i) {
        profiles(i, 0) = i < 3 ? 90.0 : 10.0;
        profiles(i, 1) = i < 3 ? 10.0 : 90.0;
    }
    const auto r = pipeline::cluster_users(profiles, 2, {0, 1, 2}, UserMetric::Euclidean);
    CHECK(r.k == 2);
    CHECK(r.assignments[0] == r.assignments[1]);
    CHECK(r.assignments[3] == r.assignments[4]);
    CHECK(r.assignments[0] != r.assignments[3]);
    CHECK(r.heterogeneity == doctest::Approx(0.0));

    CHECK_THROWS_AS(pipeline::cluster_users(profiles, 7, {0}, UserMetric::Euclidean),
                    TooFewUsers);

    // cosine variant works on percentage vectors too
    const auto rc = pipeline::cluster_users(profiles, 2, {0, 1}, UserMetric::Cosine);
    CHECK(rc.assignments[0] != rc.assignments[3]);
}

TEST_CASE("cohort_purity distributions") {
    kmeans::ClusteringResult clustering;
    clustering.k = 5;

    SUBCASE("concentrated cohort with a few outliers") {
        // 39 cohort users spread (36,0,1,1,1) over five clusters
        std::vector<std::string> users;
        std::vector<std::string> cohort;
        for (int i = 0; i < 36; ++i) {
            users.push_back("p" + std::to_string(i));
            clustering.assignments.push_back(0);
        }
        users.push_back("p36");
        clustering.assignments.push_back(2);
        users.push_back("p37");
        clustering.assignments.push_back(3);
        users.push_back("p38");
        clustering.assignments.push_back(4);
        for (int i = 0; i < 39; ++i) cohort.push_back("p" + std::to_string(i));
        // some background users
        for (int i = 0; i < 10; ++i) {
            users.push_back("u" + std::to_string(i));
            clustering.assignments.push_back(i % 5);
        }

        const auto eval = pipeline::cohort_purity(clustering, users, cohort);
        CHECK(eval.cohort_distribution == std::vector<std::size_t>{36, 0, 1, 1, 1});
        CHECK(eval.majority_cluster == 0);
        CHECK(eval.precision == doctest::Approx(36.0 / 39.0).epsilon(1e-12));
        CHECK(eval.outlier_user_ids == std::vector<std::string>{"p36", "p37", "p38"});
        std::size_t total = 0;
        for (const auto c : eval.cohort_distribution) total += c;
        CHECK(total == cohort.size());
    }

    SUBCASE("all cohort in one cluster and an even split") {
        std::vector<std::string> users{"a", "b", "c", "d"};
        clustering.k = 2;
        clustering.assignments = {0, 0, 0, 1};
        CHECK(pipeline::cohort_purity(clustering, users, {"a", "b"}).precision == 1.0);

        clustering.assignments = {0, 0, 1, 1};
        // 20 of 39 in the majority cluster ~ 0.513
        kmeans::ClusteringResult big;
        big.k = 2;
        std::vector<std::string> many;
        std::vector<std::string> cohort;
        for (int i = 0; i < 39; ++i) {
            many.push_back("c" + std::to_string(i));
            big.assignments.push_back(i < 20 ? 0 : 1);
            cohort.push_back("c" + std::to_string(i));
        }
        const auto eval = pipeline::cohort_purity(big, many, cohort);
        CHECK(eval.precision == doctest::Approx(20.0 / 39.0).epsilon(1e-12));
    }

    SUBCASE("unknown cohort user") {
        clustering.k = 1;
        clustering.assignments = {0};
        CHECK_THROWS_AS(pipeline::cohort_purity(clustering, {"a"}, {"ghost"}), UnknownUser);
    }
}

TEST_CASE("config validation points at the failing stage") {
    const auto dir = fresh_dir("config");
    PipelineConfig config;
    config.corpus = dir / "missing_corpus.jsonl";
    config.embeddings = dir / "missing_embeddings.txt";
    config.out_dir = dir / "out";
    config.k = 3;

    CHECK_THROWS_WITH_AS(config.validate(),
                         doctest::Contains("tokenize stage"), ConfigError);

    write_text_file(config.corpus, R"({"id":"a","user_id":"u","text":"hola"})" "\n");
    try {
        config.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        CHECK(what.find("embed stage") != std::string::npos);
        CHECK(what.find("missing_embeddings.txt") != std::string::npos);
    }

    write_text_file(config.embeddings, "1 2\nhola 1 0\n");
    config.k.reset();
    CHECK_THROWS_AS(config.validate(), ConfigError);  // neither k nor k_list
    config.k = 3;
    CHECK_NOTHROW(config.validate());
}

TEST_CASE("pipeline run on the small fixture") {
    const auto dir = fresh_dir("run_small");
    const auto files = fixture::make_cohort_fixture(dir, fixture::CohortSpec::small());
    auto config = PipelineConfig::from_json_file(files.config);

    const auto manifest = pipeline::run(config);

    SUBCASE("manifest lists the eight stage artifacts") {
        CHECK(manifest.size() == 8);
        const std::vector<std::string> expected{"tokens",  "vectors",       "kmeans",
                                                "gmm",     "responsibilities", "profiles",
                                                "user_clusters", "evaluation"};
        for (const auto& stage : expected) {
            REQUIRE(manifest.contains(stage));
            const auto& entry = manifest.at(stage);
            CHECK(fs::exists(config.out_dir / entry.path));
            CHECK(entry.sha256.size() == 64);
            CHECK(sha256_file(config.out_dir / entry.path) == entry.sha256);
        }
        CHECK(manifest.at("tokens").rows == files.tweet_count);
        CHECK(manifest.at("profiles").rows == 38);  // 30 background + 8 cohort
    }

    SUBCASE("every responsibility row sums to one and profiles to one hundred") {
        const auto resp =
            gmm::read_responsibilities_csv(config.out_dir / "responsibilities.csv");
        for (std::size_t i = 0; i < resp.values.rows(); ++i) {
            double sum = 0.0;
            for (std::size_t c = 0; c < resp.values.cols(); ++c) sum += resp.values(i, c);
            CHECK(std::abs(sum - 1.0) <= 1e-9);
        }
        const auto built = profiles::read_profiles_jsonl(config.out_dir / "profiles.jsonl");
        CHECK(built.size() == 38);
        for (const auto& p : built) {
            double sum = 0.0;
            for (const double v : p.values) sum += v;
            CHECK(std::abs(sum - 100.0) <= 1e-6);
        }
    }

    SUBCASE("rerunning with unchanged inputs reuses every artifact") {
        const auto again = pipeline::run(config);
        REQUIRE(again.size() == manifest.size());
        for (const auto& [stage, entry] : manifest) {
            CHECK(again.at(stage).sha256 == entry.sha256);
        }
    }

    SUBCASE("changing an input reruns the dependent stages") {
        // append one tweet to the corpus
        {
            std::ofstream corpus(files.corpus, std::ios::app);
            corpus << R"({"id":"extra","user_id":"u0","text":"t0w0 t0w1 t0w2 t0w3"})" << "\n";
        }
        const auto again = pipeline::run(config);
        CHECK(again.at("tokens").sha256 != manifest.at("tokens").sha256);
        CHECK(again.at("tokens").rows == files.tweet_count + 1);
        CHECK(again.at("vectors").sha256 != manifest.at("vectors").sha256);
    }

    SUBCASE("report bundle is emitted with a well-formed table") {
        const auto table = read_text_file(config.out_dir / "report" / "cluster_table.csv");
        CHECK(table.starts_with("cluster_id,total_size_mum,cohort_mum\n"));
        // 3 user clusters -> 4 lines with header
        CHECK(std::count(table.begin(), table.end(), '\n') == 4);

        const auto top = read_text_file(config.out_dir / "report" / "top_tweets.csv");
        CHECK(top.starts_with("topic,rank,tweet_id,responsibility\n"));

        const auto eval_json =
            nlohmann::json::parse(read_text_file(config.out_dir / "evaluation.json"));
        CHECK(eval_json.contains("mum"));
        CHECK(eval_json.at("cohort_size").get<std::size_t>() == 8);
        std::size_t sizes_total = 0;
        for (const auto& v : eval_json.at("mum").at("cluster_sizes")) {
            sizes_total += v.get<std::size_t>();
        }
        CHECK(sizes_total == 38);
    }
}

TEST_CASE("all-oov users are skipped and reported") {
    const auto dir = fresh_dir("skipped");
    auto spec = fixture::CohortSpec::small();
    spec.tweets_min = 15;
    spec.tweets_max = 25;
    const auto files = fixture::make_cohort_fixture(dir, spec);
    {
        // one user whose only tweet has no in-vocabulary word
        std::ofstream corpus(files.corpus, std::ios::app);
        corpus << R"({"id":"ghost_1","user_id":"ghost","text":"fuera de vocabulario"})" << "\n";
    }
    auto config = PipelineConfig::from_json_file(files.config);
    config.vector_format = "csv";  // exercise the csv vector path end to end
    pipeline::run(config);

    const auto built = profiles::read_profiles_jsonl(config.out_dir / "profiles.jsonl");
    for (const auto& p : built) CHECK(p.user_id != "ghost");
    const auto eval =
        nlohmann::json::parse(read_text_file(config.out_dir / "evaluation.json"));
    const auto skipped = eval.at("skipped_users").get<std::vector<std::string>>();
    CHECK(skipped == std::vector<std::string>{"ghost"});
}

TEST_CASE("pipeline determinism: identical runs produce identical bytes") {
    const auto dir = fresh_dir("determinism");
    const auto files = fixture::make_cohort_fixture(dir, fixture::CohortSpec::small());

    auto config_a = PipelineConfig::from_json_file(files.config);
    config_a.out_dir = dir / "out_a";
    auto config_b = PipelineConfig::from_json_file(files.config);
    config_b.out_dir = dir / "out_b";

    const auto manifest_a = pipeline::run(config_a);
    const auto manifest_b = pipeline::run(config_b);

    REQUIRE(manifest_a.size() == manifest_b.size());
    for (const auto& [stage, entry] : manifest_a) {
        CHECK(manifest_b.at(stage).sha256 == entry.sha256);
        CHECK(read_text_file(config_a.out_dir / entry.path) ==
              read_text_file(config_b.out_dir / manifest_b.at(stage).path));
    }
    // the report bundle matches byte for byte as well
    for (const auto* name : {"cluster_table.csv", "top_tweets.csv"}) {
        CHECK(read_text_file(config_a.out_dir / "report" / name) ==
              read_text_file(config_b.out_dir / "report" / name));
    }
}

TEST_CASE("elbow scan over user counts produces a well-formed svg") {
    kmeans::ElbowScan scan;
    for (std::size_t k = 2; k <= 9; ++k) {
        scan.entries.push_back({k, 1000.0 / static_cast<double>(k * k), 0});
    }
    scan.suggested_k = kmeans::suggest_elbow(scan.entries);

    const auto dir = fresh_dir("svg");
    pipeline::ReportInputs inputs;
    inputs.scan = &scan;
    pipeline::emit_report(dir, inputs);

    const auto svg = read_text_file(dir / "report" / "elbow.svg");
    CHECK(oracles::well_formed_xml(svg));
    CHECK(svg.find("<polyline") != std::string::npos);
    const auto csv = read_text_file(dir / "report" / "elbow.csv");
    CHECK(csv.starts_with("K,heterogeneity,seed\n"));
}

TEST_CASE("report omits cohort columns without a cohort") {
    const auto dir = fresh_dir("no_cohort");
    pipeline::CohortEvaluation eval;
    eval.cluster_sizes = {4, 3};
    eval.cohort_distribution = {0, 0};
    pipeline::ReportInputs inputs;
    inputs.mum_evaluation = &eval;
    inputs.has_cohort = false;
    pipeline::emit_report(dir, inputs);
    const auto table = read_text_file(dir / "report" / "cluster_table.csv");
    CHECK(table.starts_with("cluster_id,total_size_mum\n"));
    CHECK(table.find("cohort") == std::string::npos);
}

TEST_CASE("baseline track artifacts on a labeled fixture") {
    const auto dir = fresh_dir("baseline_track");
    auto spec = fixture::CohortSpec::small();
    spec.tweets_min = 20;
    spec.tweets_max = 40;
    const auto files = fixture::make_cohort_fixture(dir, spec);

    // hashtag ground truth: rewrite the corpus so ~30% of tweets carry a
    // topic hashtag derived from their words
    const auto raw = read_text_file(files.corpus);
    std::string relabeled;
    std::size_t line_no = 0;
    for (const auto& line : split(raw, '\n')) {
        if (line.empty()) continue;
        auto j = nlohmann::json::parse(line);
        const std::string text = j.at("text").get<std::string>();
        const std::string first_word = split(text, ' ').front();
        const std::string topic = first_word.substr(0, first_word.find('w'));
        if (++line_no % 3 == 0) {
            j["text"] = text + " #" + topic;
        }
        relabeled += j.dump();
        relabeled += '\n';
    }
    write_text_file(files.corpus, relabeled);

    // hashtag -> topic map over the fixture's topic names
    nlohmann::json map;
    map["topics"] = nlohmann::json::array();
    map["hashtag_map"] = nlohmann::json::object();
    for (std::size_t t = 0; t < spec.topics; ++t) {
        const std::string name = "topic" + std::to_string(t);
        map["topics"].push_back(name);
        map["hashtag_map"]["t" + std::to_string(t)] = name;
    }
    const auto map_path = dir / "label_map.json";
    write_text_file(map_path, map.dump(2) + "\n");

    auto config = PipelineConfig::from_json_file(files.config);
    config.baseline.enabled = true;
    config.baseline.label_map = map_path;
    config.baseline.train.max_iter = 60;

    const auto manifest = pipeline::run(config);
    for (const auto* stage : {"labels", "baseline_metrics", "baseline_profiles",
                              "baseline_user_clusters", "top_words", "keyword_pr"}) {
        REQUIRE(manifest.contains(stage));
        CHECK(fs::exists(config.out_dir / manifest.at(stage).path));
    }

    const auto metrics =
        nlohmann::json::parse(read_text_file(config.out_dir / "baseline_metrics.json"));
    CHECK(metrics.at("labeled").get<std::size_t>() > 0);
    CHECK(metrics.at("accuracy").get<double>() > 0.5);  // separable vocabulary
    CHECK(metrics.at("micro_precision").get<double>() ==
          doctest::Approx(metrics.at("accuracy").get<double>()));

    const auto bprofiles =
        profiles::read_profiles_jsonl(config.out_dir / "baseline_profiles.jsonl");
    CHECK(bprofiles.size() == 38);
    for (const auto& p : bprofiles) {
        double sum = 0.0;
        for (const double v : p.values) sum += v;
        CHECK(std::abs(sum - 1.0) <= 1e-9);
    }

    const auto eval_json =
        nlohmann::json::parse(read_text_file(config.out_dir / "evaluation.json"));
    CHECK(eval_json.contains("baseline"));

    const auto table = read_text_file(config.out_dir / "report" / "cluster_table.csv");
    CHECK(table.starts_with(
        "cluster_id,total_size_mum,cohort_mum,total_size_baseline,cohort_baseline\n"));
}

TEST_CASE("profile_matrix validates dimensions") {
    std::vector<profiles::UserProfile> list;
    list.push_back(profiles::mum("a", from_rows({{0.5, 0.5}})));
    list.push_back(profiles::mum("b", from_rows({{0.1, 0.9}})));
    const auto m = pipeline::profile_matrix(list);
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 2);
    CHECK(m(0, 0) == doctest::Approx(50.0));

    list.push_back(profiles::mum("c", from_rows({{1.0}})));
    CHECK_THROWS_AS(pipeline::profile_matrix(list), DataError);
}
