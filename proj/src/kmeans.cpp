#include "mum/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mum/errors.hpp"
#include "mum/io_util.hpp"
#include "mum/rng.hpp"

namespace mum::kmeans {

namespace {

std::vector<double> row_norms(const Matrix& points) {
    std::vector<double> norms(points.rows());
    for (std::size_t i = 0; i < points.rows(); ++i) {
        norms[i] = norm(points.row(i));
        if (norms[i] == 0.0) throw ZeroVector("point " + std::to_string(i));
    }
    return norms;
}

// centroid rows are unit vectors, so the distance needs only the point norm
double cos_dist_unit(std::span<const double> point, double point_norm,
                     std::span<const double> unit_centroid) {
    return 1.0 - dot(point, unit_centroid) / point_norm;
}

} // namespace

double cosine_distance(std::span<const double> a, std::span<const double> b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) throw ZeroVector("cosine distance operand");
    return 1.0 - dot(a, b) / (na * nb);
}

Matrix seed_plus_plus(const Matrix& points, std::size_t k, std::uint64_t seed) {
    const std::size_t n = points.rows();
    if (k == 0) throw DataError("K must be at least 1");
    if (k > n) throw TooFewPoints(std::to_string(n) + " points for K=" + std::to_string(k));
    const std::vector<double> norms = row_norms(points);

    Rng rng(seed);
    Matrix centroids(k, points.cols());
    auto set_centroid = [&](std::size_t c, std::size_t point_index) {
        const auto src = points.row(point_index);
        const auto dst = centroids.row(c);
        for (std::size_t j = 0; j < src.size(); ++j) dst[j] = src[j] / norms[point_index];
    };

    set_centroid(0, rng.below(n));

    std::vector<double> weight(n, std::numeric_limits<double>::infinity());
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double d = cos_dist_unit(points.row(i), norms[i], centroids.row(c - 1));
            weight[i] = std::min(weight[i], d * d);
            total += weight[i];
        }
        if (!(total > 0.0)) {
            throw TooFewPoints("fewer than K=" + std::to_string(k) +
                               " directionally distinct points");
        }
        set_centroid(c, rng.weighted(weight));
    }
    return centroids;
}

ClusteringResult fit(const Matrix& points, std::size_t k, std::uint64_t seed,
                     std::size_t max_iter, double tol) {
    if (max_iter == 0) throw DataError("max_iter must be at least 1");
    const std::size_t n = points.rows();
    const std::size_t d = points.cols();
    const std::vector<double> norms = row_norms(points);

    ClusteringResult result;
    result.k = k;
    result.seed = seed;
    result.centroids = seed_plus_plus(points, k, seed);
    result.assignments.assign(n, k);

    std::vector<std::size_t> assign(n, k);
    std::vector<std::size_t> counts(k);
    std::vector<double> dist_to_assigned(n);
    std::vector<double> distortions(k);
    double prev_het = std::numeric_limits<double>::infinity();

    const auto assign_all = [&] {
        std::fill(counts.begin(), counts.end(), 0);
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            std::size_t best_k = 0;
            for (std::size_t c = 0; c < k; ++c) {
                const double dd = cos_dist_unit(points.row(i), norms[i], result.centroids.row(c));
                if (dd < best) {
                    best = dd;
                    best_k = c;
                }
            }
            if (assign[i] != best_k) {
                assign[i] = best_k;
                changed = true;
            }
            dist_to_assigned[i] = best;
            ++counts[best_k];
        }
        return changed;
    };

    for (std::size_t iter = 1; iter <= max_iter; ++iter) {
        bool changed = assign_all();

        // empty clusters restart at the point currently farthest from its centroid
        bool repaired = false;
        std::vector<bool> taken(n, false);
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t far = n;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (!taken[i] && dist_to_assigned[i] > far_d) {
                    far_d = dist_to_assigned[i];
                    far = i;
                }
            }
            if (far == n) break;
            taken[far] = true;
            const auto src = points.row(far);
            const auto dst = result.centroids.row(c);
            for (std::size_t j = 0; j < d; ++j) dst[j] = src[j] / norms[far];
            repaired = true;
        }
        if (repaired) {
            assign_all();
            changed = true;
        }

        // mean-then-renormalize update, guarded: the squared-cosine objective
        // has no closed-form minimizer, so reject a candidate that would
        // raise the cluster's distortion
        Matrix means(k, d);
        for (std::size_t i = 0; i < n; ++i) {
            const auto src = points.row(i);
            const auto dst = means.row(assign[i]);
            for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
        }
        std::vector<bool> has_candidate(k, false);
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            const double mean_norm = norm(means.row(c));
            if (mean_norm == 0.0) continue;  // antipodal members, direction undefined
            const auto mean = means.row(c);
            for (std::size_t j = 0; j < d; ++j) mean[j] /= mean_norm;
            has_candidate[c] = true;
        }
        std::vector<double> old_distortion(k, 0.0), new_distortion(k, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = assign[i];
            const double dd_old = cos_dist_unit(points.row(i), norms[i], result.centroids.row(c));
            old_distortion[c] += dd_old * dd_old;
            if (has_candidate[c]) {
                const double dd_new = cos_dist_unit(points.row(i), norms[i], means.row(c));
                new_distortion[c] += dd_new * dd_new;
            }
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (has_candidate[c] && new_distortion[c] <= old_distortion[c]) {
                std::copy(means.row(c).begin(), means.row(c).end(),
                          result.centroids.row(c).begin());
                distortions[c] = new_distortion[c];
            } else {
                distortions[c] = old_distortion[c];
            }
        }

        double het = 0.0;
        for (const double v : distortions) het += v;
        result.het_trace.push_back(het);
        result.iterations = iter;

        if (!changed) {
            result.converged = true;
            break;
        }
        if (std::isfinite(prev_het) && prev_het - het < tol * prev_het) {
            result.converged = true;
            break;
        }
        prev_het = het;
    }

    result.assignments = assign;
    result.distortions = distortions;
    result.heterogeneity = result.het_trace.empty() ? 0.0 : result.het_trace.back();
    return result;
}

double heterogeneity(const Matrix& points, const ClusteringResult& result) {
    if (result.assignments.size() != points.rows()) {
        throw DataError("assignments do not cover the points");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < points.rows(); ++i) {
        const auto centroid = result.centroids.row(result.assignments[i]);
        if (norm(centroid) == 0.0) {
            total += 4.0;  // degenerate centroid, capped at 2^2 per point
            continue;
        }
        const double dd = cosine_distance(points.row(i), centroid);
        total += dd * dd;
    }
    return total;
}

ElbowScan scan_k(const Matrix& points, const std::vector<std::size_t>& k_list,
                 const std::vector<std::uint64_t>& seeds, std::size_t max_iter, double tol) {
    if (k_list.empty()) throw DataError("empty K list");
    if (!std::is_sorted(k_list.begin(), k_list.end()) ||
        std::adjacent_find(k_list.begin(), k_list.end()) != k_list.end()) {
        throw DataError("K list must be strictly increasing");
    }
    if (seeds.empty()) throw DataError("empty seed list");

    ElbowScan scan;
    for (const std::size_t k : k_list) {
        double best = std::numeric_limits<double>::infinity();
        std::uint64_t best_seed = seeds.front();
        for (const std::uint64_t seed : seeds) {
            const ClusteringResult r = fit(points, k, seed, max_iter, tol);
            if (r.heterogeneity < best) {
                best = r.heterogeneity;
                best_seed = seed;
            }
        }
        if (!scan.entries.empty() && best > scan.entries.back().heterogeneity + 1e-12) {
            scan.violations.push_back(k);
        }
        scan.entries.push_back({k, best, best_seed});
    }
    scan.suggested_k = suggest_elbow(scan.entries);
    return scan;
}

std::size_t suggest_elbow(const std::vector<ScanEntry>& entries) {
    if (entries.empty()) throw DataError("empty scan");
    if (entries.size() < 3) return entries.front().k;
    std::size_t best_i = 1;
    double best_curvature = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i + 1 < entries.size(); ++i) {
        const double curvature = entries[i - 1].heterogeneity - 2.0 * entries[i].heterogeneity +
                                 entries[i + 1].heterogeneity;
        if (curvature > best_curvature) {
            best_curvature = curvature;
            best_i = i;
        }
    }
    return entries[best_i].k;
}

void write_scan_csv(const std::filesystem::path& path, const ElbowScan& scan) {
    std::string out = "K,heterogeneity,seed\n";
    for (const auto& e : scan.entries) {
        out += std::to_string(e.k);
        out += ',';
        out += format_double(e.heterogeneity);
        out += ',';
        out += std::to_string(e.seed);
        out += '\n';
    }
    write_text_file(path, out);
}

nlohmann::json to_json(const ClusteringResult& result) {
    nlohmann::json j;
    j["K"] = result.k;
    j["seed"] = result.seed;
    auto centroids = nlohmann::json::array();
    for (std::size_t c = 0; c < result.centroids.rows(); ++c) {
        auto row = nlohmann::json::array();
        for (const double v : result.centroids.row(c)) row.push_back(v);
        centroids.push_back(std::move(row));
    }
    j["centroids"] = std::move(centroids);
    j["distortions"] = result.distortions;
    j["heterogeneity"] = result.heterogeneity;
    return j;
}

} // namespace mum::kmeans
