// Acceptance suite: one line per criterion, nonzero exit when any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mum/baseline.hpp"
#include "mum/gmm.hpp"
#include "mum/io_util.hpp"
#include "mum/kmeans.hpp"
#include "mum/pipeline.hpp"
#include "mum/profiles.hpp"
#include "mum/rng.hpp"
#include "support/datagen.hpp"
#include "support/fixture.hpp"
#include "support/oracles.hpp"

using namespace mum;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int criterion, const char* name, bool ok, const std::string& detail) {
    std::printf("[%s] criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", criterion, name,
                detail.c_str());
    if (!ok) ++failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::size_t peak_rss_mb() {
    std::ifstream f("/proc/self/status");
    std::string line;
    while (std::getline(f, line)) {
        if (line.rfind("VmHWM:", 0) == 0) return std::stoul(line.substr(6)) / 1024;
    }
    return 0;
}

bool rows_sum_to_one(const Matrix& resp, double tolerance) {
    for (std::size_t i = 0; i < resp.rows(); ++i) {
        double sum = 0.0;
        for (std::size_t c = 0; c < resp.cols(); ++c) {
            const double r = resp(i, c);
            if (!(r >= 0.0 && r <= 1.0)) return false;
            sum += r;
        }
        if (std::abs(sum - 1.0) > tolerance) return false;
    }
    return true;
}

fs::path work_dir() {
    const auto dir = fs::temp_directory_path() / "mum_acceptance";
    fs::create_directories(dir);
    return dir;
}

// --- 1: EM monotonicity over 50 k-means-initialized runs -------------------
void criterion_1_and_2() {
    const auto t0 = std::chrono::steady_clock::now();
    bool monotone = true;
    bool normalized = true;
    double worst_drop = 0.0;
    std::size_t runs_checked = 0, profile_users = 0;

    for (std::uint64_t trial = 0; trial < 50 && monotone; ++trial) {
        const auto data = datagen::gaussian_mixture(8, 20, 2000, 6.0, 4000 + trial);
        const auto clustering = kmeans::fit(data.points, 8, trial, 40, 1e-5);
        const auto init = gmm::init_from_kmeans(data.points, clustering);
        const auto fit = gmm::fit_em(data.points, init, 60, 1e-7);

        const auto& trace = fit.model.log_likelihood_trace;
        for (std::size_t i = 1; i < trace.size(); ++i) {
            const double drop = trace[i - 1] - trace[i];
            worst_drop = std::max(worst_drop, drop);
            if (drop > 1e-9) monotone = false;
        }

        // criterion 2 material: responsibility rows and the profiles built
        // from them stay normalized
        if (!rows_sum_to_one(fit.responsibilities, 1e-9)) normalized = false;
        std::vector<std::string> users;
        for (std::size_t i = 0; i < fit.responsibilities.rows(); ++i) {
            users.push_back("user" + std::to_string(i % 37));
        }
        const auto built =
            profiles::build_profiles(fit.responsibilities, users, profiles::ProfileKind::Mum);
        for (const auto& p : built) {
            double sum = 0.0;
            for (const double v : p.values) sum += v;
            if (std::abs(sum - 100.0) > 1e-6) normalized = false;
        }
        profile_users += built.size();
        ++runs_checked;
    }
    const double elapsed = seconds_since(t0);
    report(1, "EM log-likelihood monotone over 50 runs", monotone && elapsed < 60.0,
           "worst drop " + format_double(worst_drop, 3) + ", " +
               format_double(elapsed, 3) + "s");
    report(2, "responsibility rows sum to 1, MUM vectors to 100", normalized,
           std::to_string(runs_checked) + " runs, " + std::to_string(profile_users) +
               " profiles");
}

// --- 3: parameter recovery on separated diagonal Gaussians -----------------
void criterion_3() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto data = datagen::gaussian_mixture(3, 10, 3000, 10.0, 99);
    const auto clustering = kmeans::fit(data.points, 3, 0);
    const auto init = gmm::init_from_kmeans(data.points, clustering);
    const auto fit = gmm::fit_em(data.points, init, 100, 1e-8);

    // worst per-coordinate deviation, best matching of components to truth
    double worst_mean_error = 1e9;
    std::vector<std::size_t> perm{0, 1, 2};
    std::sort(perm.begin(), perm.end());
    do {
        double worst = 0.0;
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t j = 0; j < 10; ++j) {
                worst = std::max(worst, std::abs(fit.model.means(c, j) -
                                                 data.truth.means(perm[c], j)));
            }
        }
        worst_mean_error = std::min(worst_mean_error, worst);
    } while (std::next_permutation(perm.begin(), perm.end()));

    std::vector<std::size_t> predicted(data.points.rows());
    for (std::size_t i = 0; i < data.points.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < 3; ++c) {
            if (fit.responsibilities(i, c) > fit.responsibilities(i, best)) best = c;
        }
        predicted[i] = best;
    }
    const double accuracy = oracles::permuted_accuracy(predicted, data.labels, 3);
    const double elapsed = seconds_since(t0);
    report(3, "3-component parameter recovery",
           worst_mean_error < 0.1 && accuracy >= 0.99 && elapsed < 10.0,
           "mean err " + format_double(worst_mean_error, 3) + ", accuracy " +
               format_double(accuracy, 4) + ", " + format_double(elapsed, 3) + "s");
}

// --- 4: elbow recovery on generated blobs ----------------------------------
void criterion_4() {
    const std::vector<std::uint64_t> seeds{0, 20000, 40000, 60000, 80000};
    const std::vector<std::size_t> k_list{2, 3, 4, 5, 6, 7, 8};
    int hits = 0;
    std::string detail;
    for (std::uint64_t trial = 0; trial < 10; ++trial) {
        const std::size_t k_true = 3 + trial % 4;
        const auto data =
            datagen::clustered_directions(k_true, 80, 12, 0.3, 0.06, 7000 + trial);
        const auto scan = kmeans::scan_k(data.points, k_list, seeds, 60, 1e-6);
        if (scan.suggested_k == k_true) ++hits;
        detail += std::to_string(k_true) + "->" + std::to_string(scan.suggested_k) + " ";
    }
    report(4, "elbow scan recovers the planted K on >= 8/10", hits >= 8,
           std::to_string(hits) + "/10: " + detail);
}

// --- 5: cohort-purity protocol on the synthetic corpus ---------------------
void criterion_5() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto dir = work_dir() / "cohort";
    fs::remove_all(dir);
    const auto files = fixture::make_cohort_fixture(dir, fixture::CohortSpec{});
    auto config = pipeline::PipelineConfig::from_json_file(files.config);
    pipeline::run(config);

    const auto eval =
        nlohmann::json::parse(read_text_file(config.out_dir / "evaluation.json"));
    const double precision = eval.at("mum").at("precision").get<double>();

    // the artifacts honor the normalization contracts too
    const auto resp = gmm::read_responsibilities_csv(config.out_dir / "responsibilities.csv");
    const bool resp_ok = rows_sum_to_one(resp.values, 1e-9);
    const auto built = profiles::read_profiles_jsonl(config.out_dir / "profiles.jsonl");
    bool profiles_ok = built.size() == 399;
    for (const auto& p : built) {
        double sum = 0.0;
        for (const double v : p.values) sum += v;
        if (std::abs(sum - 100.0) > 1e-6) profiles_ok = false;
    }

    const double elapsed = seconds_since(t0);
    report(5, "cohort purity >= 0.90 through the full pipeline",
           precision >= 0.90 && resp_ok && profiles_ok && elapsed < 300.0,
           "precision " + format_double(precision, 4) + " over " +
               std::to_string(files.tweet_count) + " tweets, " +
               format_double(elapsed, 3) + "s");
}

// --- 6: hard-assignment oracle ---------------------------------------------
void criterion_6() {
    Rng rng(31);
    bool mum_exact = true;
    const std::size_t n = 240, k = 6;
    Matrix hard(n, k, 0.0);
    std::vector<std::size_t> counts(k, 0);
    std::vector<std::string> users;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = rng.below(k);
        hard(i, c) = 1.0;
        ++counts[c];
        users.push_back("only_user");
    }
    const auto built = profiles::build_profiles(hard, users, profiles::ProfileKind::Mum);
    for (std::size_t c = 0; c < k; ++c) {
        const double expected =
            100.0 * (static_cast<double>(counts[c]) / static_cast<double>(n));
        if (built.front().values[c] != expected) mum_exact = false;
    }

    // one M-step over one-hot responsibilities reproduces the per-cluster
    // sample statistics
    const auto data = datagen::gaussian_mixture(4, 6, 500, 5.0, 17);
    const auto clustering = kmeans::fit(data.points, 4, 0);
    const auto init = gmm::init_from_kmeans(data.points, clustering);
    Matrix onehot(data.points.rows(), 4, 0.0);
    for (std::size_t i = 0; i < data.points.rows(); ++i) {
        onehot(i, clustering.assignments[i]) = 1.0;
    }
    const auto stepped = gmm::m_step(data.points, onehot);
    double worst_rel = 0.0;
    auto rel = [](double a, double b) {
        return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-30});
    };
    for (std::size_t c = 0; c < 4; ++c) {
        worst_rel = std::max(worst_rel, rel(stepped.weights[c], init.weights[c]));
        for (std::size_t j = 0; j < 6; ++j) {
            worst_rel = std::max(worst_rel, rel(stepped.means(c, j), init.means(c, j)));
            worst_rel = std::max(worst_rel, rel(stepped.variances(c, j), init.variances(c, j)));
        }
    }
    report(6, "hard-assignment oracle (MUM shares, M-step statistics)",
           mum_exact && worst_rel <= 1e-12,
           "MUM exact, M-step worst rel " + format_double(worst_rel, 3));
}

// --- 7: tf-idf and metric oracles ------------------------------------------
void criterion_7() {
    bool ok = true;
    std::string detail;

    // three-document fixture vs hand-computed weights
    const std::vector<std::vector<std::string>> docs{
        {"a", "b", "b"}, {"a", "c"}, {"a", "b", "d"}};
    const auto model = baseline::tfidf_fit(docs);
    const auto v = baseline::tfidf_transform(model, {"b", "b", "b", "c", "zzz"});
    // df: a=3, b=2, c=1, d=1; N=3
    const double expected_b = 3.0 * std::log(3.0 / 2.0);
    const double expected_c = std::log(3.0);
    double got_b = 0.0, got_c = 0.0;
    for (const auto& [col, weight] : v) {
        if (model.terms[col] == "b") got_b = weight;
        if (model.terms[col] == "c") got_c = weight;
        if (model.terms[col] == "zzz") ok = false;
    }
    if (std::abs(got_b - expected_b) > 1e-12 || std::abs(got_c - expected_c) > 1e-12) ok = false;
    // a term present in every document vanishes
    const auto va = baseline::tfidf_transform(model, {"a"});
    if (va.size() != 1 || va[0].second != 0.0) ok = false;

    // confusion arithmetic on the fixed 2- and 3-class fixtures
    {
        const auto m = baseline::evaluate_multiclass({0, 1, 1, 1}, {0, 0, 1, 1});
        if (m.micro_precision != 0.75) ok = false;
        if (std::abs(m.macro_precision - 5.0 / 6.0) > 1e-15) ok = false;
        if (m.macro_recall != 0.75) ok = false;
    }
    {
        const auto m = baseline::evaluate_multiclass({0, 0, 1, 1, 1, 0, 2}, {0, 0, 0, 1, 1, 2, 2});
        if (std::abs(m.accuracy - 5.0 / 7.0) > 1e-15) ok = false;
        if (std::abs(m.macro_precision - 7.0 / 9.0) > 1e-15) ok = false;
        if (std::abs(m.macro_recall - 13.0 / 18.0) > 1e-15) ok = false;
        if (m.micro_precision != m.micro_recall || m.micro_precision != m.accuracy) ok = false;
    }

    // keyword probe: 8 of 16 keywords among 30 top words
    std::vector<std::string> keywords, top;
    for (int i = 0; i < 16; ++i) keywords.push_back("kw" + std::to_string(i));
    for (int i = 0; i < 8; ++i) top.push_back("kw" + std::to_string(i));
    for (int i = 0; i < 22; ++i) top.push_back("filler" + std::to_string(i));
    const auto [precision, recall] = baseline::keyword_pr(top, keywords);
    if (precision != 8.0 / 30.0 || recall != 8.0 / 16.0) ok = false;

    report(7, "tf-idf, confusion and keyword oracles", ok,
           "tfidf b " + format_double(got_b, 12) + ", pr " + format_double(precision, 6) + "/" +
               format_double(recall, 6));
}

// --- 8: classifier gradient vs central finite differences ------------------
void criterion_8() {
    const std::size_t classes = 5, features = 6, n = 40;
    Rng rng(23);
    std::vector<baseline::SparseVector> xs;
    std::vector<std::size_t> ys;
    for (std::size_t i = 0; i < n; ++i) {
        baseline::SparseVector x;
        for (std::size_t j = 0; j < features; ++j) {
            if (rng.uniform() < 0.6) x.emplace_back(j, rng.uniform(-2.0, 2.0));
        }
        xs.push_back(std::move(x));
        ys.push_back(rng.below(classes));
    }
    const double l2 = 0.02;
    baseline::ClassifierModel model;
    model.classes = classes;
    model.features = features;
    model.weights = Matrix(classes, features);
    model.bias.assign(classes, 0.0);
    for (std::size_t idx = 0; idx < model.weights.size(); ++idx) {
        model.weights.data()[idx] = rng.uniform(-0.5, 0.5);
    }
    for (double& b : model.bias) b = rng.uniform(-0.5, 0.5);

    Matrix grad_w;
    std::vector<double> grad_b;
    baseline::softmax_gradient(model, xs, ys, l2, grad_w, grad_b);

    std::vector<double> theta;
    for (std::size_t idx = 0; idx < model.weights.size(); ++idx) {
        theta.push_back(model.weights.data()[idx]);
    }
    theta.insert(theta.end(), model.bias.begin(), model.bias.end());
    const auto loss_at = [&](const std::vector<double>& params) {
        baseline::ClassifierModel m = model;
        for (std::size_t idx = 0; idx < m.weights.size(); ++idx) {
            m.weights.data()[idx] = params[idx];
        }
        for (std::size_t c = 0; c < classes; ++c) m.bias[c] = params[m.weights.size() + c];
        return baseline::softmax_loss(m, xs, ys, l2);
    };
    const auto fd = oracles::finite_difference_gradient(loss_at, theta, 1e-5);

    double worst = 0.0;
    for (std::size_t idx = 0; idx < model.weights.size(); ++idx) {
        worst = std::max(worst, std::abs(fd[idx] - grad_w.data()[idx]));
    }
    for (std::size_t c = 0; c < classes; ++c) {
        worst = std::max(worst, std::abs(fd[model.weights.size() + c] - grad_b[c]));
    }
    report(8, "analytic gradient matches finite differences", worst < 1e-6,
           "max component diff " + format_double(worst, 3));
}

// --- 9: determinism of the pipeline ----------------------------------------
void criterion_9() {
    const auto dir = work_dir() / "determinism";
    fs::remove_all(dir);
    auto spec = fixture::CohortSpec::small();
    spec.seed = 1234;
    const auto files = fixture::make_cohort_fixture(dir, spec);

    auto config_a = pipeline::PipelineConfig::from_json_file(files.config);
    config_a.out_dir = dir / "out_a";
    auto config_b = pipeline::PipelineConfig::from_json_file(files.config);
    config_b.out_dir = dir / "out_b";

    const auto manifest_a = pipeline::run(config_a);
    const auto manifest_b = pipeline::run(config_b);

    bool identical = manifest_a.size() == manifest_b.size();
    std::size_t compared = 0;
    for (const auto& [stage, entry] : manifest_a) {
        if (!manifest_b.contains(stage)) {
            identical = false;
            break;
        }
        if (read_text_file(config_a.out_dir / entry.path) !=
            read_text_file(config_b.out_dir / manifest_b.at(stage).path)) {
            identical = false;
        }
        ++compared;
    }
    report(9, "identical seeds give byte-identical artifacts", identical,
           std::to_string(compared) + " artifacts compared");
}

// --- 10: scale smoke test ---------------------------------------------------
void criterion_10() {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n = 300000, d = 300, k = 22;
    Rng rng(99);
    const Matrix dirs = datagen::orthonormal_directions(k, d, rng);
    Matrix points(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = rng.below(k);
        const auto dst = points.row(i);
        const auto mean = dirs.row(c);
        for (std::size_t j = 0; j < d; ++j) dst[j] = 8.0 * mean[j] + rng.normal();
    }

    const auto clustering = kmeans::fit(points, k, 0, 5, 1e-3);
    auto model = gmm::init_from_kmeans(points, clustering);
    auto e = gmm::e_step(points, model);
    bool finite = std::isfinite(e.log_likelihood);
    for (std::size_t iter = 0; iter < 20; ++iter) {  // 20 full EM iterations
        model = gmm::m_step(points, e.responsibilities);
        e = gmm::e_step(points, model);
        if (!std::isfinite(e.log_likelihood)) finite = false;
    }

    const double elapsed = seconds_since(t0);
    const std::size_t rss = peak_rss_mb();
    report(10, "300k x 300-dim, K=22, 20 EM iterations", finite && elapsed < 600.0 && rss < 4096,
           format_double(elapsed, 4) + "s, peak rss " + std::to_string(rss) + "MB");
}

} // namespace

int main() {
    criterion_1_and_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    if (failures == 0) {
        std::printf("all criteria passed\n");
        return 0;
    }
    std::printf("%d criteria failed\n", failures);
    return 1;
}
