#include "mum/gmm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>

#include "mum/errors.hpp"
#include "mum/io_util.hpp"

namespace mum::gmm {

namespace {

// compensated (Kahan) accumulator; keeps the log-likelihood trace stable
// enough for tight monotonicity checks
struct KahanSum {
    double sum = 0.0;
    double carry = 0.0;
    void add(double v) {
        const double y = v - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
};

std::vector<double> global_variance(const Matrix& points) {
    const std::size_t n = points.rows();
    const std::size_t d = points.cols();
    std::vector<double> mean(d, 0.0), var(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = points.row(i);
        for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
    }
    for (std::size_t j = 0; j < d; ++j) mean[j] /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = points.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = row[j] - mean[j];
            var[j] += diff * diff;
        }
    }
    for (std::size_t j = 0; j < d; ++j) {
        var[j] = std::max(var[j] / static_cast<double>(n), kVarianceFloor);
    }
    return var;
}

void renormalize_weights(std::vector<double>& weights) {
    double total = 0.0;
    for (const double w : weights) total += w;
    if (!(total > 0.0)) throw NumericError("mixture weights sum to zero");
    for (double& w : weights) w /= total;
}

void check_model(const GmmModel& model) {
    if (model.k == 0 || model.weights.size() != model.k || model.means.rows() != model.k ||
        model.variances.rows() != model.k || model.means.cols() != model.d ||
        model.variances.cols() != model.d) {
        throw DataError("inconsistent mixture model shape");
    }
}

} // namespace

GmmModel init_from_kmeans(const Matrix& points, const kmeans::ClusteringResult& clustering) {
    const std::size_t n = points.rows();
    const std::size_t d = points.cols();
    const std::size_t k = clustering.k;
    if (clustering.assignments.size() != n) {
        throw DataError("clustering does not cover the points");
    }

    GmmModel model;
    model.k = k;
    model.d = d;
    model.weights.assign(k, 0.0);
    model.means = Matrix(k, d);
    model.variances = Matrix(k, d);

    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = clustering.assignments[i];
        ++counts[c];
        const auto row = points.row(i);
        const auto mean = model.means.row(c);
        for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) continue;
        const auto mean = model.means.row(c);
        for (std::size_t j = 0; j < d; ++j) mean[j] /= static_cast<double>(counts[c]);
        model.weights[c] = static_cast<double>(counts[c]) / static_cast<double>(n);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = clustering.assignments[i];
        const auto row = points.row(i);
        const auto mean = model.means.row(c);
        const auto var = model.variances.row(c);
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = row[j] - mean[j];
            var[j] += diff * diff;
        }
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) continue;
        const auto var = model.variances.row(c);
        for (std::size_t j = 0; j < d; ++j) {
            var[j] = std::max(var[j] / static_cast<double>(counts[c]), kVarianceFloor);
        }
    }

    // empty clusters: weight 1/N, mean at the farthest unclaimed point,
    // global per-dimension variance
    std::vector<std::size_t> empties;
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] == 0) empties.push_back(c);
    }
    if (!empties.empty()) {
        const std::vector<double> gvar = global_variance(points);
        std::vector<double> dist(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto centroid = clustering.centroids.row(clustering.assignments[i]);
            dist[i] = kmeans::cosine_distance(points.row(i), centroid);
        }
        std::vector<bool> taken(n, false);
        for (const std::size_t c : empties) {
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (!taken[i] && dist[i] > far_d) {
                    far_d = dist[i];
                    far = i;
                }
            }
            taken[far] = true;
            std::copy(points.row(far).begin(), points.row(far).end(),
                      model.means.row(c).begin());
            std::copy(gvar.begin(), gvar.end(), model.variances.row(c).begin());
            model.weights[c] = 1.0 / static_cast<double>(n);
        }
        renormalize_weights(model.weights);
    }
    return model;
}

EStepResult e_step(const Matrix& points, const GmmModel& model) {
    check_model(model);
    const std::size_t n = points.rows();
    const std::size_t d = model.d;
    const std::size_t k = model.k;
    if (points.cols() != d) throw DataError("points dimension does not match the model");

    // per component: log(pi) - 0.5 * sum_j log(2 pi sigma^2_j), and 0.5/sigma^2_j
    std::vector<double> log_base(k);
    Matrix half_inv_var(k, d);
    for (std::size_t c = 0; c < k; ++c) {
        double acc = 0.0;
        const auto var = model.variances.row(c);
        const auto hiv = half_inv_var.row(c);
        for (std::size_t j = 0; j < d; ++j) {
            acc += std::log(2.0 * std::numbers::pi * var[j]);
            hiv[j] = 0.5 / var[j];
        }
        log_base[c] =
            (model.weights[c] > 0.0 ? std::log(model.weights[c])
                                    : -std::numeric_limits<double>::infinity()) -
            0.5 * acc;
    }

    EStepResult result;
    result.responsibilities = Matrix(n, k);
    KahanSum total;
    std::vector<double> scores(k);
    for (std::size_t i = 0; i < n; ++i) {
        const auto x = points.row(i);
        double max_score = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            const auto mean = model.means.row(c);
            const auto hiv = half_inv_var.row(c);
            double q = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = x[j] - mean[j];
                q += diff * diff * hiv[j];
            }
            scores[c] = log_base[c] - q;
            max_score = std::max(max_score, scores[c]);
        }
        double sum_exp = 0.0;
        for (std::size_t c = 0; c < k; ++c) sum_exp += std::exp(scores[c] - max_score);
        const double lse = max_score + std::log(sum_exp);
        if (!std::isfinite(lse)) throw NonFiniteLikelihood(i);
        const auto out = result.responsibilities.row(i);
        for (std::size_t c = 0; c < k; ++c) out[c] = std::exp(scores[c] - lse);
        total.add(lse);
    }
    result.log_likelihood = total.sum;
    return result;
}

GmmModel m_step(const Matrix& points, const Matrix& responsibilities) {
    const std::size_t n = points.rows();
    const std::size_t d = points.cols();
    const std::size_t k = responsibilities.cols();
    if (responsibilities.rows() != n) throw DataError("responsibilities do not cover the points");
    if (n == 0 || k == 0) throw DataError("empty input to m_step");

    GmmModel model;
    model.k = k;
    model.d = d;
    model.weights.assign(k, 0.0);
    model.means = Matrix(k, d);
    model.variances = Matrix(k, d);

    std::vector<double> effective(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = responsibilities.row(i);
        const auto x = points.row(i);
        for (std::size_t c = 0; c < k; ++c) {
            effective[c] += r[c];
            const auto mean = model.means.row(c);
            const double w = r[c];
            for (std::size_t j = 0; j < d; ++j) mean[j] += w * x[j];
        }
    }
    std::vector<std::size_t> degenerate;
    for (std::size_t c = 0; c < k; ++c) {
        if (effective[c] < 1e-10) {
            degenerate.push_back(c);
            continue;
        }
        const auto mean = model.means.row(c);
        for (std::size_t j = 0; j < d; ++j) mean[j] /= effective[c];
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = responsibilities.row(i);
        const auto x = points.row(i);
        for (std::size_t c = 0; c < k; ++c) {
            const auto mean = model.means.row(c);
            const auto var = model.variances.row(c);
            const double w = r[c];
            if (w == 0.0) continue;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = x[j] - mean[j];
                var[j] += w * diff * diff;
            }
        }
    }
    for (std::size_t c = 0; c < k; ++c) {
        if (effective[c] < 1e-10) continue;
        const auto var = model.variances.row(c);
        for (std::size_t j = 0; j < d; ++j) {
            var[j] = std::max(var[j] / effective[c], kVarianceFloor);
        }
        model.weights[c] = effective[c] / static_cast<double>(n);
    }

    if (!degenerate.empty()) {
        // re-seed dead components at points far from their strongest live
        // component, mirroring the k-means empty-cluster rule
        const std::vector<double> gvar = global_variance(points);
        std::vector<double> dist(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto r = responsibilities.row(i);
            std::size_t best = k;
            double best_r = -1.0;
            for (std::size_t c = 0; c < k; ++c) {
                if (effective[c] < 1e-10) continue;
                if (r[c] > best_r) {
                    best_r = r[c];
                    best = c;
                }
            }
            if (best < k) dist[i] = squared_distance(points.row(i), model.means.row(best));
        }
        std::vector<bool> taken(n, false);
        for (const std::size_t c : degenerate) {
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (!taken[i] && dist[i] > far_d) {
                    far_d = dist[i];
                    far = i;
                }
            }
            taken[far] = true;
            std::copy(points.row(far).begin(), points.row(far).end(),
                      model.means.row(c).begin());
            std::copy(gvar.begin(), gvar.end(), model.variances.row(c).begin());
            model.weights[c] = 1.0 / static_cast<double>(n);
        }
    }
    renormalize_weights(model.weights);
    return model;
}

FitResult fit_em(const Matrix& points, GmmModel init, std::size_t max_iter, double tol) {
    check_model(init);
    GmmModel model = std::move(init);
    model.log_likelihood_trace.clear();

    EStepResult e = e_step(points, model);
    model.log_likelihood_trace.push_back(e.log_likelihood);
    double previous = e.log_likelihood;

    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        GmmModel next = m_step(points, e.responsibilities);
        next.log_likelihood_trace = std::move(model.log_likelihood_trace);
        model = std::move(next);

        e = e_step(points, model);
        model.log_likelihood_trace.push_back(e.log_likelihood);

        const double improvement = e.log_likelihood - previous;
        const double denom = std::max(std::abs(previous), 1e-12);
        previous = e.log_likelihood;
        if (improvement < tol * denom) break;
    }
    return {std::move(model), std::move(e.responsibilities)};
}

std::vector<std::string> top_tweets_per_topic(const ResponsibilityMatrix& responsibilities,
                                              std::size_t topic, double threshold) {
    if (!(threshold > 0.0) || threshold > 1.0) {
        throw DataError("threshold must be in (0, 1]");
    }
    if (topic >= responsibilities.values.cols()) throw DataError("topic index out of range");
    if (responsibilities.ids.size() != responsibilities.values.rows()) {
        throw DataError("responsibility ids do not cover the rows");
    }
    std::vector<std::size_t> selected;
    for (std::size_t i = 0; i < responsibilities.values.rows(); ++i) {
        if (responsibilities.values(i, topic) >= threshold) selected.push_back(i);
    }
    std::stable_sort(selected.begin(), selected.end(), [&](std::size_t a, std::size_t b) {
        return responsibilities.values(a, topic) > responsibilities.values(b, topic);
    });
    std::vector<std::string> ids;
    ids.reserve(selected.size());
    for (const std::size_t i : selected) ids.push_back(responsibilities.ids[i]);
    return ids;
}

nlohmann::json to_json(const GmmModel& model) {
    nlohmann::json j;
    j["K"] = model.k;
    j["d"] = model.d;
    j["weights"] = model.weights;
    auto rows_of = [](const Matrix& m) {
        auto arr = nlohmann::json::array();
        for (std::size_t r = 0; r < m.rows(); ++r) {
            auto row = nlohmann::json::array();
            for (const double v : m.row(r)) row.push_back(v);
            arr.push_back(std::move(row));
        }
        return arr;
    };
    j["means"] = rows_of(model.means);
    j["variances"] = rows_of(model.variances);
    j["loglik_trace"] = model.log_likelihood_trace;
    j["variance_estimator"] = "mle";  // init variances normalized by cluster size
    return j;
}

GmmModel model_from_json(const nlohmann::json& j) {
    GmmModel model;
    model.k = j.at("K").get<std::size_t>();
    model.d = j.at("d").get<std::size_t>();
    model.weights = j.at("weights").get<std::vector<double>>();
    auto read_matrix = [&](const nlohmann::json& arr) {
        Matrix m(arr.size(), model.d);
        for (std::size_t r = 0; r < arr.size(); ++r) {
            const auto row = arr[r].get<std::vector<double>>();
            if (row.size() != model.d) throw DataError("model matrix row length mismatch");
            std::copy(row.begin(), row.end(), m.row(r).begin());
        }
        return m;
    };
    model.means = read_matrix(j.at("means"));
    model.variances = read_matrix(j.at("variances"));
    model.log_likelihood_trace = j.at("loglik_trace").get<std::vector<double>>();
    check_model(model);
    return model;
}

void write_responsibilities_csv(const std::filesystem::path& path,
                                const ResponsibilityMatrix& responsibilities) {
    if (responsibilities.ids.size() != responsibilities.values.rows()) {
        throw DataError("responsibility ids do not cover the rows");
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open file for writing: " + path.string());
    out << "tweet_id";
    for (std::size_t c = 0; c < responsibilities.values.cols(); ++c) out << ",r" << c;
    out << '\n';
    for (std::size_t i = 0; i < responsibilities.values.rows(); ++i) {
        out << csv_safe(responsibilities.ids[i]);
        for (const double v : responsibilities.values.row(i)) {
            out << ',' << format_double(v, 12);
        }
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + path.string());
}

ResponsibilityMatrix read_responsibilities_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open responsibilities file: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty responsibilities file: " + path.string());
    const auto header = split(line, ',');
    if (header.size() < 2 || header[0] != "tweet_id") {
        throw DataError("bad responsibilities header: " + line);
    }
    const std::size_t k = header.size() - 1;

    ResponsibilityMatrix out;
    std::vector<double> flat;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != k + 1) {
            throw DataError("responsibilities row " + std::to_string(line_no) +
                            " has the wrong field count");
        }
        out.ids.push_back(fields[0]);
        for (std::size_t c = 0; c < k; ++c) flat.push_back(parse_double(fields[1 + c]));
    }
    out.values = Matrix(out.ids.size(), k);
    std::copy(flat.begin(), flat.end(), out.values.data());
    return out;
}

} // namespace mum::gmm
