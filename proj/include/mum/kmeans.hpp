#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "mum/matrix.hpp"

namespace mum::kmeans {

struct ClusteringResult {
    std::size_t k = 0;
    Matrix centroids;                       // k x d, unit rows for nonempty clusters
    std::vector<std::size_t> assignments;   // point -> cluster
    std::vector<double> distortions;        // per-cluster sum of squared cosine distances
    double heterogeneity = 0.0;             // sum of distortions
    std::uint64_t seed = 0;
    std::vector<double> het_trace;          // heterogeneity after each Lloyd iteration
    std::size_t iterations = 0;
    bool converged = false;
};

struct ScanEntry {
    std::size_t k;
    double heterogeneity;  // best over seeds
    std::uint64_t seed;    // winning seed
};

struct ElbowScan {
    std::vector<ScanEntry> entries;
    std::size_t suggested_k = 0;
    std::vector<std::size_t> violations;  // K values whose best het rose vs the previous K
};

// 1 - dot(a,b)/(|a||b|), in [0,2]. Throws ZeroVector on a zero-norm input.
double cosine_distance(std::span<const double> a, std::span<const double> b);

// K-means++ seeding under squared cosine distance; rows of the result are
// (normalized) input points. Deterministic for a fixed seed.
Matrix seed_plus_plus(const Matrix& points, std::size_t k, std::uint64_t seed);

// Lloyd iterations with cosine assignment and mean-then-renormalize centroid
// updates. An update that would raise a cluster's distortion keeps the old
// centroid, so the per-iteration heterogeneity trace is non-increasing.
ClusteringResult fit(const Matrix& points, std::size_t k, std::uint64_t seed,
                     std::size_t max_iter = 100, double tol = 1e-4);

// Sum over points of squared cosine distance to the assigned centroid.
// A zero-norm centroid is degenerate: each of its points contributes the
// maximum 2^2.
double heterogeneity(const Matrix& points, const ClusteringResult& result);

ElbowScan scan_k(const Matrix& points, const std::vector<std::size_t>& k_list,
                 const std::vector<std::uint64_t>& seeds, std::size_t max_iter = 100,
                 double tol = 1e-4);

// Maximum-curvature elbow: argmax over interior entries of the discrete
// second difference, ties toward smaller K. Fewer than 3 entries fall back
// to the first K.
std::size_t suggest_elbow(const std::vector<ScanEntry>& entries);

void write_scan_csv(const std::filesystem::path& path, const ElbowScan& scan);

nlohmann::json to_json(const ClusteringResult& result);

} // namespace mum::kmeans
