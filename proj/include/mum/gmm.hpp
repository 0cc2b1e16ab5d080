#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mum/kmeans.hpp"
#include "mum/matrix.hpp"

namespace mum::gmm {

// keeps constant dimensions from producing singular components
inline constexpr double kVarianceFloor = 1e-8;

struct GmmModel {
    std::size_t k = 0;
    std::size_t d = 0;
    std::vector<double> weights;  // sums to 1
    Matrix means;                 // k x d
    Matrix variances;             // k x d, diagonal covariance
    std::vector<double> log_likelihood_trace;
};

struct ResponsibilityMatrix {
    std::vector<std::string> ids;  // row -> tweet id
    Matrix values;                 // N x K, rows sum to 1
};

// Means are the clusters' arithmetic means (pre-normalization), weights the
// cluster proportions, variances the within-cluster per-dimension MLE,
// floored. An empty cluster gets weight 1/N, the point farthest from its
// assigned centroid as mean, and the global per-dimension variance.
GmmModel init_from_kmeans(const Matrix& points, const kmeans::ClusteringResult& clustering);

struct EStepResult {
    Matrix responsibilities;
    double log_likelihood = 0.0;
};

// Posterior responsibilities, computed in log space with a row-wise
// log-sum-exp shift.
EStepResult e_step(const Matrix& points, const GmmModel& model);

// Weighted ML re-estimation. A component whose effective count falls below
// 1e-10 is re-seeded as in init_from_kmeans's empty-cluster rule.
GmmModel m_step(const Matrix& points, const Matrix& responsibilities);

struct FitResult {
    GmmModel model;
    Matrix responsibilities;  // consistent with the returned model
};

FitResult fit_em(const Matrix& points, GmmModel init, std::size_t max_iter = 200,
                 double tol = 1e-4);

// ids with responsibility >= threshold for the topic, descending.
std::vector<std::string> top_tweets_per_topic(const ResponsibilityMatrix& responsibilities,
                                              std::size_t topic, double threshold);

nlohmann::json to_json(const GmmModel& model);
GmmModel model_from_json(const nlohmann::json& j);

// CSV header `tweet_id,r0,...,r{K-1}`, 12 significant digits
void write_responsibilities_csv(const std::filesystem::path& path,
                                const ResponsibilityMatrix& responsibilities);
ResponsibilityMatrix read_responsibilities_csv(const std::filesystem::path& path);

} // namespace mum::gmm
