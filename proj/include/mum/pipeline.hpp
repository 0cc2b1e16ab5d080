#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mum/baseline.hpp"
#include "mum/gmm.hpp"
#include "mum/kmeans.hpp"
#include "mum/matrix.hpp"
#include "mum/profiles.hpp"

namespace mum::pipeline {

enum class UserMetric { Euclidean, Cosine };

struct BaselineConfig {
    bool enabled = false;
    std::filesystem::path label_map;
    std::filesystem::path stopwords;  // optional word list {"words": [...]}
    std::filesystem::path keywords;   // optional keyword list {"keywords": [...]}
    double test_fraction = 0.2;
    std::uint64_t split_seed = 7;
    baseline::TrainOptions train;
    std::vector<std::size_t> top_words{30, 50, 100, 200};
};

struct PipelineConfig {
    std::filesystem::path corpus;
    std::filesystem::path embeddings;
    std::filesystem::path out_dir = "out";
    std::filesystem::path cohort;  // optional; one user id per line

    std::optional<std::size_t> k;     // fixed topic count
    std::vector<std::size_t> k_list;  // elbow scan when k is unset
    std::vector<std::uint64_t> seed_list{0, 20000, 40000, 60000, 80000};
    std::size_t kmeans_max_iter = 100;
    double kmeans_tol = 1e-4;
    std::size_t em_max_iter = 200;
    double em_tol = 1e-4;

    std::optional<std::size_t> user_k;
    std::vector<std::size_t> user_k_list;
    UserMetric user_metric = UserMetric::Euclidean;

    std::string vector_format = "binary";  // or "csv"
    double top_tweet_threshold = 0.90;

    BaselineConfig baseline;

    static PipelineConfig from_json_file(const std::filesystem::path& path);
    // files exist, out_dir writable, K choice present; ConfigError otherwise
    void validate() const;
};

struct ArtifactEntry {
    std::string path;  // relative to out_dir
    std::string sha256;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::map<std::string, std::string> inputs;  // input name -> content hash
};

// manifest JSON: {stage: {path, sha256, rows, cols, inputs}}
using Manifest = std::map<std::string, ArtifactEntry>;

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

// Executes corpus -> embedding -> kmeans (scan or fixed K) -> gmm ->
// profiles -> user clustering -> evaluation, persisting every stage and
// skipping stages whose recorded inputs are unchanged.
Manifest run(const PipelineConfig& config);

// The comparison track alone (tokenize + hashtag labels + tf-idf classifier
// + averaged-probability profiles + their clustering + keyword probe).
Manifest run_baseline(const PipelineConfig& config);

// Lloyd K-means with K-means++ seeding under squared Euclidean distance.
// When fewer distinct points than K exist the surplus centroids duplicate
// and stay empty, so coincident inputs land in one cluster.
kmeans::ClusteringResult fit_euclidean(const Matrix& points, std::size_t k, std::uint64_t seed,
                                       std::size_t max_iter = 100, double tol = 1e-4);

// Best-of-seeds clustering of profile vectors; metric per config.
kmeans::ClusteringResult cluster_users(const Matrix& profile_matrix, std::size_t k_users,
                                       const std::vector<std::uint64_t>& seeds, UserMetric metric,
                                       std::size_t max_iter = 100, double tol = 1e-4);

struct CohortEvaluation {
    std::vector<std::size_t> cluster_sizes;
    std::vector<std::size_t> cohort_distribution;
    std::size_t majority_cluster = 0;
    double precision = 0.0;  // majority fraction of the cohort
    std::vector<std::string> outlier_user_ids;
};

CohortEvaluation cohort_purity(const kmeans::ClusteringResult& clustering,
                               const std::vector<std::string>& user_ids,
                               const std::vector<std::string>& cohort_ids);

std::vector<std::string> read_cohort_file(const std::filesystem::path& path);

Matrix profile_matrix(const std::vector<profiles::UserProfile>& profiles);

nlohmann::json cohort_evaluation_to_json(const CohortEvaluation& evaluation);

struct ReportInputs {
    const kmeans::ElbowScan* scan = nullptr;  // topic-count scan, when one ran
    const gmm::ResponsibilityMatrix* responsibilities = nullptr;
    double top_tweet_threshold = 0.90;
    const CohortEvaluation* mum_evaluation = nullptr;
    const CohortEvaluation* baseline_evaluation = nullptr;
    bool has_cohort = false;
};

// Elbow curve CSV + SVG, per-topic top tweets, cluster-size table, and the
// side-by-side table when the comparison track ran. Files land in
// <out_dir>/report.
void emit_report(const std::filesystem::path& out_dir, const ReportInputs& inputs);

} // namespace mum::pipeline
