#include "mum/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <set>

#include "mum/corpus.hpp"
#include "mum/embedding.hpp"
#include "mum/errors.hpp"
#include "mum/io_util.hpp"
#include "mum/rng.hpp"

namespace mum::pipeline {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

json require(const json& j, const char* key, const fs::path& source) {
    if (!j.contains(key)) {
        throw ConfigError("config " + source.string() + " is missing \"" + key + "\"");
    }
    return j.at(key);
}

} // namespace

PipelineConfig PipelineConfig::from_json_file(const std::filesystem::path& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    PipelineConfig c;
    const fs::path base = path.parent_path();
    auto resolve = [&](const std::string& p) -> fs::path {
        const fs::path fp(p);
        return fp.is_absolute() ? fp : base / fp;
    };
    try {
        c.corpus = resolve(require(j, "corpus", path).get<std::string>());
        c.embeddings = resolve(require(j, "embeddings", path).get<std::string>());
        if (j.contains("out_dir")) c.out_dir = resolve(j["out_dir"].get<std::string>());
        if (j.contains("cohort")) c.cohort = resolve(j["cohort"].get<std::string>());

        const json topics = require(j, "topics", path);
        if (topics.contains("k")) c.k = topics["k"].get<std::size_t>();
        if (topics.contains("k_list")) c.k_list = topics["k_list"].get<std::vector<std::size_t>>();

        if (j.contains("seed_list")) {
            c.seed_list = j["seed_list"].get<std::vector<std::uint64_t>>();
        }
        if (j.contains("kmeans")) {
            const json& km = j["kmeans"];
            if (km.contains("max_iter")) c.kmeans_max_iter = km["max_iter"].get<std::size_t>();
            if (km.contains("tol")) c.kmeans_tol = km["tol"].get<double>();
        }
        if (j.contains("em")) {
            const json& em = j["em"];
            if (em.contains("max_iter")) c.em_max_iter = em["max_iter"].get<std::size_t>();
            if (em.contains("tol")) c.em_tol = em["tol"].get<double>();
        }
        if (j.contains("users")) {
            const json& u = j["users"];
            if (u.contains("k")) c.user_k = u["k"].get<std::size_t>();
            if (u.contains("k_list")) c.user_k_list = u["k_list"].get<std::vector<std::size_t>>();
            if (u.contains("metric")) {
                const std::string m = u["metric"].get<std::string>();
                if (m == "euclidean") {
                    c.user_metric = UserMetric::Euclidean;
                } else if (m == "cosine") {
                    c.user_metric = UserMetric::Cosine;
                } else {
                    throw ConfigError("users.metric must be \"euclidean\" or \"cosine\", got " + m);
                }
            }
        }
        if (j.contains("vector_format")) {
            c.vector_format = j["vector_format"].get<std::string>();
        }
        if (j.contains("top_tweet_threshold")) {
            c.top_tweet_threshold = j["top_tweet_threshold"].get<double>();
        }
        if (j.contains("baseline")) {
            const json& b = j["baseline"];
            if (b.contains("enabled")) c.baseline.enabled = b["enabled"].get<bool>();
            if (b.contains("label_map")) {
                c.baseline.label_map = resolve(b["label_map"].get<std::string>());
            }
            if (b.contains("stopwords")) {
                c.baseline.stopwords = resolve(b["stopwords"].get<std::string>());
            }
            if (b.contains("keywords")) {
                c.baseline.keywords = resolve(b["keywords"].get<std::string>());
            }
            if (b.contains("test_fraction")) {
                c.baseline.test_fraction = b["test_fraction"].get<double>();
            }
            if (b.contains("split_seed")) {
                c.baseline.split_seed = b["split_seed"].get<std::uint64_t>();
            }
            if (b.contains("train")) {
                const json& t = b["train"];
                if (t.contains("learning_rate")) {
                    c.baseline.train.learning_rate = t["learning_rate"].get<double>();
                }
                if (t.contains("l2")) c.baseline.train.l2 = t["l2"].get<double>();
                if (t.contains("max_iter")) {
                    c.baseline.train.max_iter = t["max_iter"].get<std::size_t>();
                }
                if (t.contains("tol")) c.baseline.train.tol = t["tol"].get<double>();
            }
            if (b.contains("top_words")) {
                c.baseline.top_words = b["top_words"].get<std::vector<std::size_t>>();
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError("config " + path.string() + ": " + e.what());
    }
    return c;
}

void PipelineConfig::validate() const {
    auto must_exist = [](const fs::path& p, const std::string& stage, const std::string& what) {
        if (p.empty()) throw ConfigError(stage + " stage: no " + what + " configured");
        if (!fs::exists(p)) {
            throw ConfigError(stage + " stage: " + what + " not found: " + p.string());
        }
    };
    must_exist(corpus, "tokenize", "corpus file");
    must_exist(embeddings, "embed", "embeddings file");
    if (!cohort.empty()) must_exist(cohort, "evaluate", "cohort file");
    if (!k.has_value() && k_list.empty()) {
        throw ConfigError("topics need either a fixed \"k\" or a \"k_list\" to scan");
    }
    if (seed_list.empty()) throw ConfigError("seed_list must not be empty");
    if (vector_format != "binary" && vector_format != "csv") {
        throw ConfigError("vector_format must be \"binary\" or \"csv\", got " + vector_format);
    }
    if (!(top_tweet_threshold > 0.0) || top_tweet_threshold > 1.0) {
        throw ConfigError("top_tweet_threshold must be in (0, 1]");
    }
    if (baseline.enabled) {
        must_exist(baseline.label_map, "baseline", "label map");
        if (!baseline.stopwords.empty()) {
            must_exist(baseline.stopwords, "baseline", "stopword list");
        }
        if (!baseline.keywords.empty()) {
            must_exist(baseline.keywords, "baseline", "keyword list");
        }
    }
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + out_dir.string());
    const fs::path probe = out_dir / ".write_probe";
    {
        std::ofstream f(probe);
        if (!f) throw ConfigError("output directory not writable: " + out_dir.string());
    }
    fs::remove(probe, ec);
}

Manifest read_manifest(const std::filesystem::path& path) {
    Manifest manifest;
    if (!fs::exists(path)) return manifest;
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::exception&) {
        return manifest;  // unreadable manifest just disables caching
    }
    for (const auto& [stage, entry] : j.items()) {
        ArtifactEntry a;
        a.path = entry.value("path", "");
        a.sha256 = entry.value("sha256", "");
        a.rows = entry.value("rows", std::size_t{0});
        a.cols = entry.value("cols", std::size_t{0});
        if (entry.contains("inputs")) {
            for (const auto& [name, hash] : entry["inputs"].items()) {
                a.inputs[name] = hash.get<std::string>();
            }
        }
        manifest[stage] = std::move(a);
    }
    return manifest;
}

void write_manifest(const std::filesystem::path& path, const Manifest& manifest) {
    json j = json::object();
    for (const auto& [stage, a] : manifest) {
        json e;
        e["path"] = a.path;
        e["sha256"] = a.sha256;
        e["rows"] = a.rows;
        e["cols"] = a.cols;
        e["inputs"] = a.inputs;
        j[stage] = std::move(e);
    }
    write_text_file(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Euclidean K-means for user profiles

namespace {

Matrix seed_euclidean(const Matrix& points, std::size_t k, Rng& rng) {
    const std::size_t n = points.rows();
    Matrix centroids(k, points.cols());
    std::size_t first = rng.below(n);
    std::copy(points.row(first).begin(), points.row(first).end(), centroids.row(0).begin());

    std::vector<double> weight(n, std::numeric_limits<double>::infinity());
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            weight[i] = std::min(weight[i], squared_distance(points.row(i), centroids.row(c - 1)));
            total += weight[i];
        }
        std::size_t pick;
        if (total > 0.0) {
            pick = rng.weighted(weight);
        } else {
            pick = first;  // all remaining points coincide with chosen centroids
        }
        std::copy(points.row(pick).begin(), points.row(pick).end(), centroids.row(c).begin());
    }
    return centroids;
}

} // namespace

kmeans::ClusteringResult fit_euclidean(const Matrix& points, std::size_t k, std::uint64_t seed,
                                       std::size_t max_iter, double tol) {
    if (max_iter == 0) throw DataError("max_iter must be at least 1");
    const std::size_t n = points.rows();
    const std::size_t d = points.cols();
    if (k == 0) throw DataError("K must be at least 1");
    if (k > n) throw TooFewPoints(std::to_string(n) + " points for K=" + std::to_string(k));

    Rng rng(seed);
    kmeans::ClusteringResult result;
    result.k = k;
    result.seed = seed;
    result.centroids = seed_euclidean(points, k, rng);

    std::vector<std::size_t> assign(n, k);
    std::vector<std::size_t> counts(k);
    std::vector<double> dist_to_assigned(n);
    double prev_distortion = std::numeric_limits<double>::infinity();

    const auto assign_all = [&] {
        std::fill(counts.begin(), counts.end(), 0);
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            std::size_t best_k = 0;
            for (std::size_t c = 0; c < k; ++c) {
                const double dd = squared_distance(points.row(i), result.centroids.row(c));
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

        // an empty cluster restarts at the farthest point unless every point
        // already sits on a centroid (coincident inputs)
        bool repaired = false;
        std::vector<bool> taken(n, false);
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t far = n;
            double far_d = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (!taken[i] && dist_to_assigned[i] > far_d) {
                    far_d = dist_to_assigned[i];
                    far = i;
                }
            }
            if (far == n) continue;
            taken[far] = true;
            std::copy(points.row(far).begin(), points.row(far).end(),
                      result.centroids.row(c).begin());
            repaired = true;
        }
        if (repaired) {
            assign_all();
            changed = true;
        }

        Matrix means(k, d);
        for (std::size_t i = 0; i < n; ++i) {
            const auto src = points.row(i);
            const auto dst = means.row(assign[i]);
            for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;  // keep the old centroid
            const auto mean = means.row(c);
            for (std::size_t j = 0; j < d; ++j) mean[j] /= static_cast<double>(counts[c]);
            std::copy(mean.begin(), mean.end(), result.centroids.row(c).begin());
        }

        result.distortions.assign(k, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            result.distortions[assign[i]] +=
                squared_distance(points.row(i), result.centroids.row(assign[i]));
        }
        double distortion = 0.0;
        for (const double v : result.distortions) distortion += v;
        result.het_trace.push_back(distortion);
        result.iterations = iter;

        if (!changed) {
            result.converged = true;
            break;
        }
        if (std::isfinite(prev_distortion) && prev_distortion - distortion < tol * prev_distortion) {
            result.converged = true;
            break;
        }
        prev_distortion = distortion;
    }

    result.assignments = assign;
    result.heterogeneity = result.het_trace.empty() ? 0.0 : result.het_trace.back();
    return result;
}

kmeans::ClusteringResult cluster_users(const Matrix& profile_matrix, std::size_t k_users,
                                       const std::vector<std::uint64_t>& seeds, UserMetric metric,
                                       std::size_t max_iter, double tol) {
    if (profile_matrix.rows() < k_users) {
        throw TooFewUsers(profile_matrix.rows(), k_users);
    }
    if (seeds.empty()) throw DataError("empty seed list");
    kmeans::ClusteringResult best;
    bool have = false;
    for (const std::uint64_t seed : seeds) {
        kmeans::ClusteringResult r =
            metric == UserMetric::Euclidean
                ? fit_euclidean(profile_matrix, k_users, seed, max_iter, tol)
                : kmeans::fit(profile_matrix, k_users, seed, max_iter, tol);
        if (!have || r.heterogeneity < best.heterogeneity) {
            best = std::move(r);
            have = true;
        }
    }
    return best;
}

CohortEvaluation cohort_purity(const kmeans::ClusteringResult& clustering,
                               const std::vector<std::string>& user_ids,
                               const std::vector<std::string>& cohort_ids) {
    if (user_ids.size() != clustering.assignments.size()) {
        throw DataError("user ids do not cover the clustering");
    }
    std::map<std::string, std::size_t> cluster_of;
    for (std::size_t i = 0; i < user_ids.size(); ++i) {
        cluster_of[user_ids[i]] = clustering.assignments[i];
    }

    CohortEvaluation eval;
    eval.cluster_sizes.assign(clustering.k, 0);
    for (const std::size_t c : clustering.assignments) ++eval.cluster_sizes[c];
    eval.cohort_distribution.assign(clustering.k, 0);
    for (const auto& id : cohort_ids) {
        const auto it = cluster_of.find(id);
        if (it == cluster_of.end()) throw UnknownUser(id);
        ++eval.cohort_distribution[it->second];
    }
    eval.majority_cluster = 0;
    for (std::size_t c = 1; c < clustering.k; ++c) {
        if (eval.cohort_distribution[c] > eval.cohort_distribution[eval.majority_cluster]) {
            eval.majority_cluster = c;
        }
    }
    if (!cohort_ids.empty()) {
        eval.precision = static_cast<double>(eval.cohort_distribution[eval.majority_cluster]) /
                         static_cast<double>(cohort_ids.size());
        for (const auto& id : cohort_ids) {
            if (cluster_of.at(id) != eval.majority_cluster) eval.outlier_user_ids.push_back(id);
        }
    }
    return eval;
}

std::vector<std::string> read_cohort_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open cohort file: " + path.string());
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) ids.push_back(line);
    }
    return ids;
}

Matrix profile_matrix(const std::vector<profiles::UserProfile>& profiles) {
    if (profiles.empty()) return {};
    Matrix m(profiles.size(), profiles.front().values.size());
    for (std::size_t i = 0; i < profiles.size(); ++i) {
        if (profiles[i].values.size() != m.cols()) {
            throw DataError("profiles disagree on dimension K");
        }
        std::copy(profiles[i].values.begin(), profiles[i].values.end(), m.row(i).begin());
    }
    return m;
}

nlohmann::json cohort_evaluation_to_json(const CohortEvaluation& evaluation) {
    json j;
    j["cluster_sizes"] = evaluation.cluster_sizes;
    j["cohort_distribution"] = evaluation.cohort_distribution;
    j["majority_cluster"] = evaluation.majority_cluster;
    j["precision"] = evaluation.precision;
    j["outliers"] = evaluation.outlier_user_ids;
    return j;
}

// ---------------------------------------------------------------------------
// staged run

namespace {

struct StageRunner {
    const fs::path out_dir;
    Manifest previous;
    Manifest current;

    // true when the stage's recorded inputs match and its artifact is intact
    bool cached(const std::string& stage, const std::map<std::string, std::string>& inputs) {
        const auto it = previous.find(stage);
        if (it == previous.end()) return false;
        if (it->second.inputs != inputs) return false;
        const fs::path artifact = out_dir / it->second.path;
        if (!fs::exists(artifact)) return false;
        if (sha256_file(artifact) != it->second.sha256) return false;
        current[stage] = it->second;
        std::cout << "[" << stage << "] cached: " << it->second.path << "\n";
        return true;
    }

    void record(const std::string& stage, const std::string& relative_path, std::size_t rows,
                std::size_t cols, const std::map<std::string, std::string>& inputs) {
        ArtifactEntry e;
        e.path = relative_path;
        e.sha256 = sha256_file(out_dir / relative_path);
        e.rows = rows;
        e.cols = cols;
        e.inputs = inputs;
        current[stage] = std::move(e);
        std::cout << "[" << stage << "] " << relative_path << " (" << rows << " x " << cols
                  << ")\n";
    }

    const ArtifactEntry& entry(const std::string& stage) const { return current.at(stage); }
};

std::string params_hash(const std::string& text) { return sha256_hex(text); }

std::string seeds_string(const std::vector<std::uint64_t>& seeds) {
    std::string s;
    for (const auto v : seeds) {
        s += std::to_string(v);
        s += ',';
    }
    return s;
}

std::string klist_string(const std::vector<std::size_t>& ks) {
    std::string s;
    for (const auto v : ks) {
        s += std::to_string(v);
        s += ',';
    }
    return s;
}

kmeans::ElbowScan read_scan_csv_for_report(const fs::path& path) {
    kmeans::ElbowScan scan;
    std::ifstream in(path);
    if (!in) throw DataError("cannot open scan file: " + path.string());
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != 3) throw DataError("bad scan row: " + line);
        scan.entries.push_back({static_cast<std::size_t>(parse_int(fields[0])),
                                parse_double(fields[1]),
                                static_cast<std::uint64_t>(parse_int(fields[2]))});
    }
    scan.suggested_k = kmeans::suggest_elbow(scan.entries);
    return scan;
}

// The 16 politics keywords (Spanish), used when no keyword file is given.
std::vector<std::string> default_politics_keywords() {
    return {"ecuador",   "gobierno", "país",     "ecuatorianos", "presidente", "pueblo",
            "empleo",    "trabajo",  "ciudad",   "producción",   "leyes",      "impuestos",
            "asamblea",  "salud",    "justicia", "ciudadanos"};
}

std::size_t choose_user_k(const PipelineConfig& config, const Matrix& matrix) {
    if (config.user_k.has_value()) return *config.user_k;
    std::vector<std::size_t> k_list = config.user_k_list;
    if (k_list.empty()) {
        for (std::size_t k = 2; k <= std::min<std::size_t>(10, matrix.rows()); ++k) {
            k_list.push_back(k);
        }
    }
    std::vector<kmeans::ScanEntry> entries;
    for (const std::size_t k : k_list) {
        const auto r = cluster_users(matrix, k, config.seed_list, config.user_metric);
        entries.push_back({k, r.heterogeneity, r.seed});
    }
    return kmeans::suggest_elbow(entries);
}

void write_user_clusters_json(const fs::path& path, const kmeans::ClusteringResult& clustering,
                              const std::vector<profiles::UserProfile>& built,
                              UserMetric metric) {
    json j = kmeans::to_json(clustering);
    j["metric"] = metric == UserMetric::Euclidean ? "euclidean" : "cosine";
    json assignments = json::object();
    for (std::size_t i = 0; i < built.size(); ++i) {
        assignments[built[i].user_id] = clustering.assignments[i];
    }
    j["assignments"] = std::move(assignments);
    write_text_file(path, j.dump(2) + "\n");
}

void stage_tokens(const PipelineConfig& config, StageRunner& stages) {
    const std::map<std::string, std::string> inputs{{"corpus", sha256_file(config.corpus)}};
    if (stages.cached("tokens", inputs)) return;
    const auto raw = corpus::read_corpus_jsonl(config.corpus);
    std::vector<corpus::TokenizedTweet> tokens;
    tokens.reserve(raw.size());
    for (const auto& tweet : raw) tokens.push_back(corpus::tokenize_tweet(tweet));
    corpus::write_tokens_jsonl(stages.out_dir / "tokens.jsonl", tokens);
    stages.record("tokens", "tokens.jsonl", tokens.size(), 1, inputs);
}

// tf-idf + probabilistic classifier comparison track: hashtag ground truth,
// split/train/metrics, per-user averaged class probabilities, their
// clustering, and the cohort keyword probe.
void run_baseline_track(const PipelineConfig& config, StageRunner& stages) {
    const fs::path out = stages.out_dir;
    const BaselineConfig& bl = config.baseline;

    std::string params = "test_fraction=" + format_double(bl.test_fraction) +
                         ";split_seed=" + std::to_string(bl.split_seed) +
                         ";lr=" + format_double(bl.train.learning_rate) +
                         ";l2=" + format_double(bl.train.l2) +
                         ";iters=" + std::to_string(bl.train.max_iter) +
                         ";tol=" + format_double(bl.train.tol) +
                         ";top=" + klist_string(bl.top_words) +
                         ";user_metric=" +
                         (config.user_metric == UserMetric::Euclidean ? "euclidean" : "cosine") +
                         ";seeds=" + seeds_string(config.seed_list);
    if (config.user_k.has_value()) params += ";user_k=" + std::to_string(*config.user_k);

    std::map<std::string, std::string> inputs{{"tokens", stages.entry("tokens").sha256},
                                              {"label_map", sha256_file(bl.label_map)},
                                              {"params", params_hash(params)}};
    if (!bl.stopwords.empty()) inputs["stopwords"] = sha256_file(bl.stopwords);
    if (!bl.keywords.empty()) inputs["keywords"] = sha256_file(bl.keywords);
    if (!config.cohort.empty()) inputs["cohort"] = sha256_file(config.cohort);

    const bool probe = !config.cohort.empty();
    bool all_cached = stages.cached("labels", inputs) &&
                      stages.cached("baseline_metrics", inputs) &&
                      stages.cached("baseline_profiles", inputs) &&
                      stages.cached("baseline_user_clusters", inputs);
    if (all_cached && probe) {
        all_cached = stages.cached("top_words", inputs) && stages.cached("keyword_pr", inputs);
    }
    if (all_cached) return;

    const auto tokens = corpus::read_tokens_jsonl(out / "tokens.jsonl");
    const auto label_map = corpus::TopicLabelMap::from_json_file(bl.label_map);
    auto [labels, label_report] = corpus::label_by_hashtag(tokens, label_map);
    corpus::write_labels_csv(out / "labels.csv", labels);
    stages.record("labels", "labels.csv", labels.size(), 2, inputs);

    const std::unordered_set<std::string> stopwords =
        bl.stopwords.empty() ? std::unordered_set<std::string>{}
                             : baseline::read_word_list_json(bl.stopwords, "words");

    std::vector<std::vector<std::string>> documents;
    documents.reserve(tokens.size());
    std::unordered_map<std::string, std::size_t> row_of;
    for (const auto& t : tokens) {
        row_of[t.id] = documents.size();
        documents.push_back(t.tokens);
    }
    const auto tfidf = baseline::tfidf_fit(documents, stopwords);

    std::vector<baseline::SparseVector> labeled_features;
    std::vector<std::size_t> labeled_classes;
    labeled_features.reserve(labels.size());
    for (const auto& l : labels) {
        labeled_features.push_back(baseline::tfidf_transform(tfidf, documents[row_of.at(l.tweet_id)]));
        labeled_classes.push_back(l.topic_index);
    }
    if (labels.empty()) {
        throw DataError("baseline: no tweet carries a mapped hashtag, nothing to train on");
    }
    const auto split_ix =
        baseline::stratified_split(labeled_classes, bl.test_fraction, bl.split_seed);
    if (split_ix.test.empty()) {
        throw DataError("baseline: test split is empty; the labeled corpus is too small "
                        "for test_fraction " +
                        format_double(bl.test_fraction));
    }
    std::vector<baseline::SparseVector> train_x, test_x;
    std::vector<std::size_t> train_y, test_y;
    for (const auto i : split_ix.train) {
        train_x.push_back(labeled_features[i]);
        train_y.push_back(labeled_classes[i]);
    }
    for (const auto i : split_ix.test) {
        test_x.push_back(labeled_features[i]);
        test_y.push_back(labeled_classes[i]);
    }
    const auto model =
        baseline::classifier_train(train_x, train_y, label_map.topics.size(), bl.train);
    std::vector<std::size_t> predictions;
    predictions.reserve(test_x.size());
    for (const auto& x : test_x) predictions.push_back(baseline::classify(model, x).label);
    const auto metrics = baseline::evaluate_multiclass(predictions, test_y);

    {
        json j;
        j["labeled"] = label_report.labeled;
        j["ambiguous"] = label_report.ambiguous;
        j["unmatched"] = label_report.unmatched;
        j["train_size"] = train_x.size();
        j["test_size"] = test_x.size();
        j["accuracy"] = metrics.accuracy;
        j["micro_precision"] = metrics.micro_precision;
        j["micro_recall"] = metrics.micro_recall;
        j["macro_precision"] = metrics.macro_precision;
        j["macro_recall"] = metrics.macro_recall;
        write_text_file(out / "baseline_metrics.json", j.dump(2) + "\n");
        stages.record("baseline_metrics", "baseline_metrics.json", 1, 1, inputs);
    }

    // class probabilities for every tweet, averaged per user
    Matrix probability_rows(tokens.size(), label_map.topics.size());
    std::vector<std::string> row_users;
    row_users.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto probs =
            model.predict_proba(baseline::tfidf_transform(tfidf, documents[i]));
        std::copy(probs.begin(), probs.end(), probability_rows.row(i).begin());
        row_users.push_back(tokens[i].user_id);
    }
    const auto bprofiles =
        profiles::build_profiles(probability_rows, row_users, profiles::ProfileKind::BaselineM);
    profiles::write_profiles_jsonl(out / "baseline_profiles.jsonl", bprofiles);
    stages.record("baseline_profiles", "baseline_profiles.jsonl", bprofiles.size(),
                  label_map.topics.size(), inputs);

    const Matrix bmatrix = profile_matrix(bprofiles);
    const std::size_t k_users = choose_user_k(config, bmatrix);
    const auto bclustering =
        cluster_users(bmatrix, k_users, config.seed_list, config.user_metric);
    write_user_clusters_json(out / "baseline_user_clusters.json", bclustering, bprofiles,
                             config.user_metric);
    stages.record("baseline_user_clusters", "baseline_user_clusters.json", bprofiles.size(), 1,
                  inputs);

    if (probe) {
        // each cohort user's timeline as one document, most relevant words,
        // and their overlap with the politics keyword list
        const auto cohort_ids = read_cohort_file(config.cohort);
        std::map<std::string, std::vector<std::string>> timeline;
        for (const auto& t : tokens) {
            if (std::find(cohort_ids.begin(), cohort_ids.end(), t.user_id) != cohort_ids.end()) {
                auto& doc = timeline[t.user_id];
                doc.insert(doc.end(), t.tokens.begin(), t.tokens.end());
            }
        }
        std::vector<std::vector<std::string>> cohort_docs;
        std::vector<std::string> cohort_order;
        for (const auto& [user_id, doc] : timeline) {
            cohort_order.push_back(user_id);
            cohort_docs.push_back(doc);
        }
        const auto user_tfidf = baseline::tfidf_fit(cohort_docs, stopwords);

        const std::vector<std::string> keywords = bl.keywords.empty()
                                                      ? default_politics_keywords()
                                                      : baseline::read_keywords_json(bl.keywords);
        const std::size_t max_top =
            *std::max_element(bl.top_words.begin(), bl.top_words.end());

        std::string top_csv = "user_id,rank,term,weight\n";
        json pr_json = json::object();
        for (const std::size_t n : bl.top_words) {
            pr_json[std::to_string(n)] = {{"precision", json::array()},
                                          {"recall", json::array()},
                                          {"user_ids", json::array()}};
        }
        for (std::size_t u = 0; u < cohort_order.size(); ++u) {
            const auto ranked = baseline::top_terms(user_tfidf, cohort_docs[u], max_top);
            for (std::size_t r = 0; r < ranked.size(); ++r) {
                top_csv += csv_safe(cohort_order[u]);
                top_csv += ',' + std::to_string(r + 1) + ',' + csv_safe(ranked[r].first) + ',' +
                           format_double(ranked[r].second) + '\n';
            }
            for (const std::size_t n : bl.top_words) {
                std::vector<std::string> top_n;
                for (std::size_t r = 0; r < std::min(n, ranked.size()); ++r) {
                    top_n.push_back(ranked[r].first);
                }
                if (top_n.empty()) continue;
                const auto [precision, recall] = baseline::keyword_pr(top_n, keywords);
                auto& bucket = pr_json[std::to_string(n)];
                bucket["precision"].push_back(precision);
                bucket["recall"].push_back(recall);
                bucket["user_ids"].push_back(cohort_order[u]);
            }
        }
        for (const std::size_t n : bl.top_words) {
            auto& bucket = pr_json[std::to_string(n)];
            double p = 0.0, r = 0.0;
            const std::size_t count = bucket["precision"].size();
            for (const auto& v : bucket["precision"]) p += v.get<double>();
            for (const auto& v : bucket["recall"]) r += v.get<double>();
            bucket["avg_precision"] = count ? p / static_cast<double>(count) : 0.0;
            bucket["avg_recall"] = count ? r / static_cast<double>(count) : 0.0;
        }
        write_text_file(out / "top_words.csv", top_csv);
        stages.record("top_words", "top_words.csv", cohort_order.size(), 4, inputs);
        write_text_file(out / "keyword_pr.json", pr_json.dump(2) + "\n");
        stages.record("keyword_pr", "keyword_pr.json", bl.top_words.size(), 1, inputs);
    }
}

} // namespace

Manifest run(const PipelineConfig& config) {
    config.validate();
    const fs::path out = config.out_dir;
    fs::create_directories(out / "report");

    StageRunner stages{out, read_manifest(out / "manifest.json"), {}};

    // --- tokens ---------------------------------------------------------
    const std::string tokens_rel = "tokens.jsonl";
    stage_tokens(config, stages);

    // --- vectors ----------------------------------------------------------
    const bool binary_vectors = config.vector_format == "binary";
    const std::string vectors_rel = binary_vectors ? "vectors.bin" : "vectors.csv";
    {
        const std::map<std::string, std::string> inputs{
            {"tokens", stages.entry("tokens").sha256},
            {"embeddings", sha256_file(config.embeddings)},
            {"params", params_hash("format=" + config.vector_format)}};
        if (!stages.cached("vectors", inputs)) {
            const auto tokens = corpus::read_tokens_jsonl(out / tokens_rel);
            const auto table = embedding::EmbeddingTable::load(config.embeddings);
            const auto set = embedding::compose_all(tokens, table);
            if (set.values.rows() == 0) {
                throw DataError("embed stage: every tweet is out of vocabulary");
            }
            if (binary_vectors) {
                embedding::write_vectors_binary(out / vectors_rel, set);
            } else {
                embedding::write_vectors_csv(out / vectors_rel, set);
            }
            stages.record("vectors", vectors_rel, set.values.rows(), set.values.cols(), inputs);
        }
    }
    auto load_vectors = [&] {
        return binary_vectors ? embedding::read_vectors_binary(out / vectors_rel)
                              : embedding::read_vectors_csv(out / vectors_rel);
    };

    // --- kmeans (elbow scan or fixed K) -----------------------------------
    const std::string kmeans_rel = "kmeans.json";
    {
        std::string params = "seeds=" + seeds_string(config.seed_list) +
                             ";max_iter=" + std::to_string(config.kmeans_max_iter) +
                             ";tol=" + format_double(config.kmeans_tol);
        params += config.k.has_value() ? ";k=" + std::to_string(*config.k)
                                       : ";k_list=" + klist_string(config.k_list);
        const std::map<std::string, std::string> inputs{
            {"vectors", stages.entry("vectors").sha256}, {"params", params_hash(params)}};
        const bool kmeans_cached = stages.cached("kmeans", inputs);
        const bool elbow_cached =
            !config.k.has_value() ? stages.cached("elbow", inputs) : true;
        if (!kmeans_cached || !elbow_cached) {
            const auto set = load_vectors();
            std::size_t chosen_k = 0;
            std::uint64_t chosen_seed = 0;
            if (config.k.has_value()) {
                chosen_k = *config.k;
                double best = std::numeric_limits<double>::infinity();
                for (const auto seed : config.seed_list) {
                    const auto r = kmeans::fit(set.values, chosen_k, seed, config.kmeans_max_iter,
                                               config.kmeans_tol);
                    if (r.heterogeneity < best) {
                        best = r.heterogeneity;
                        chosen_seed = seed;
                    }
                }
            } else {
                const auto scan = kmeans::scan_k(set.values, config.k_list, config.seed_list,
                                                 config.kmeans_max_iter, config.kmeans_tol);
                kmeans::write_scan_csv(out / "elbow.csv", scan);
                stages.record("elbow", "elbow.csv", scan.entries.size(), 3, inputs);
                chosen_k = scan.suggested_k;
                for (const auto& e : scan.entries) {
                    if (e.k == chosen_k) chosen_seed = e.seed;
                }
            }
            const auto result = kmeans::fit(set.values, chosen_k, chosen_seed,
                                            config.kmeans_max_iter, config.kmeans_tol);
            write_text_file(out / kmeans_rel, kmeans::to_json(result).dump(2) + "\n");
            stages.record("kmeans", kmeans_rel, result.k, set.values.cols(), inputs);
        }
    }

    // --- gmm + responsibilities -------------------------------------------
    const std::string gmm_rel = "gmm.json";
    const std::string resp_rel = "responsibilities.csv";
    {
        const std::string params = ";em_max_iter=" + std::to_string(config.em_max_iter) +
                                   ";em_tol=" + format_double(config.em_tol) +
                                   ";kmeans_max_iter=" + std::to_string(config.kmeans_max_iter) +
                                   ";kmeans_tol=" + format_double(config.kmeans_tol);
        const std::map<std::string, std::string> inputs{
            {"vectors", stages.entry("vectors").sha256},
            {"kmeans", stages.entry("kmeans").sha256},
            {"params", params_hash(params)}};
        if (!stages.cached("gmm", inputs) || !stages.cached("responsibilities", inputs)) {
            const auto set = load_vectors();
            const json km = json::parse(read_text_file(out / kmeans_rel));
            const std::size_t k = km.at("K").get<std::size_t>();
            const std::uint64_t seed = km.at("seed").get<std::uint64_t>();
            const auto clustering =
                kmeans::fit(set.values, k, seed, config.kmeans_max_iter, config.kmeans_tol);
            const auto init = gmm::init_from_kmeans(set.values, clustering);
            auto fit = gmm::fit_em(set.values, init, config.em_max_iter, config.em_tol);
            write_text_file(out / gmm_rel, gmm::to_json(fit.model).dump(2) + "\n");
            stages.record("gmm", gmm_rel, fit.model.k, fit.model.d, inputs);
            gmm::ResponsibilityMatrix resp{set.ids, std::move(fit.responsibilities)};
            gmm::write_responsibilities_csv(out / resp_rel, resp);
            stages.record("responsibilities", resp_rel, resp.values.rows(), resp.values.cols(),
                          inputs);
        }
    }

    // --- profiles -----------------------------------------------------------
    const std::string profiles_rel = "profiles.jsonl";
    {
        const std::map<std::string, std::string> inputs{
            {"responsibilities", stages.entry("responsibilities").sha256},
            {"vectors", stages.entry("vectors").sha256}};
        if (!stages.cached("profiles", inputs)) {
            const auto set = load_vectors();
            const auto resp = gmm::read_responsibilities_csv(out / resp_rel);
            if (resp.ids != set.ids) {
                throw DataError("profiles stage: responsibility rows and vectors disagree");
            }
            const auto built =
                profiles::build_profiles(resp.values, set.user_ids, profiles::ProfileKind::Mum);
            profiles::write_profiles_jsonl(out / profiles_rel, built);
            stages.record("profiles", profiles_rel, built.size(),
                          built.empty() ? 0 : built.front().values.size(), inputs);
        }
    }

    // --- user clustering ----------------------------------------------------
    const std::string user_clusters_rel = "user_clusters.json";
    {
        std::string params = "metric=" +
                             std::string(config.user_metric == UserMetric::Euclidean ? "euclidean"
                                                                                     : "cosine") +
                             ";seeds=" + seeds_string(config.seed_list);
        params += config.user_k.has_value() ? ";k=" + std::to_string(*config.user_k)
                                            : ";k_list=" + klist_string(config.user_k_list);
        const std::map<std::string, std::string> inputs{
            {"profiles", stages.entry("profiles").sha256}, {"params", params_hash(params)}};
        if (!stages.cached("user_clusters", inputs)) {
            const auto built = profiles::read_profiles_jsonl(out / profiles_rel);
            const Matrix matrix = profile_matrix(built);
            const std::size_t k_users = choose_user_k(config, matrix);
            const auto clustering =
                cluster_users(matrix, k_users, config.seed_list, config.user_metric);
            write_user_clusters_json(out / user_clusters_rel, clustering, built,
                                     config.user_metric);
            stages.record("user_clusters", user_clusters_rel, built.size(), 1, inputs);
        }
    }

    // --- baseline track -----------------------------------------------------
    if (config.baseline.enabled) {
        run_baseline_track(config, stages);
    }

    // --- evaluation -----------------------------------------------------------
    const std::string evaluation_rel = "evaluation.json";
    {
        std::map<std::string, std::string> inputs{
            {"user_clusters", stages.entry("user_clusters").sha256},
            {"tokens", stages.entry("tokens").sha256},
            {"profiles", stages.entry("profiles").sha256}};
        if (!config.cohort.empty()) inputs["cohort"] = sha256_file(config.cohort);
        if (config.baseline.enabled) {
            inputs["baseline_user_clusters"] = stages.entry("baseline_user_clusters").sha256;
        }
        if (!stages.cached("evaluation", inputs)) {
            const std::vector<std::string> cohort_ids =
                config.cohort.empty() ? std::vector<std::string>{}
                                      : read_cohort_file(config.cohort);

            const auto built = profiles::read_profiles_jsonl(out / profiles_rel);
            std::vector<std::string> user_order;
            for (const auto& p : built) user_order.push_back(p.user_id);
            const json uc = json::parse(read_text_file(out / user_clusters_rel));
            kmeans::ClusteringResult clustering;
            clustering.k = uc.at("K").get<std::size_t>();
            for (const auto& id : user_order) {
                clustering.assignments.push_back(uc.at("assignments").at(id).get<std::size_t>());
            }
            const CohortEvaluation mum_eval = cohort_purity(clustering, user_order, cohort_ids);

            // users whose every tweet was excluded before modeling
            const auto tokens = corpus::read_tokens_jsonl(out / tokens_rel);
            std::set<std::string> profiled(user_order.begin(), user_order.end());
            std::set<std::string> skipped;
            for (const auto& t : tokens) {
                if (!profiled.contains(t.user_id)) skipped.insert(t.user_id);
            }

            json j;
            j["mum"] = cohort_evaluation_to_json(mum_eval);
            j["skipped_users"] = skipped;
            j["cohort_size"] = cohort_ids.size();

            std::optional<CohortEvaluation> baseline_eval;
            if (config.baseline.enabled) {
                const auto bprofiles =
                    profiles::read_profiles_jsonl(out / "baseline_profiles.jsonl");
                std::vector<std::string> border;
                for (const auto& p : bprofiles) border.push_back(p.user_id);
                const json buc = json::parse(read_text_file(out / "baseline_user_clusters.json"));
                kmeans::ClusteringResult bclustering;
                bclustering.k = buc.at("K").get<std::size_t>();
                for (const auto& id : border) {
                    bclustering.assignments.push_back(
                        buc.at("assignments").at(id).get<std::size_t>());
                }
                baseline_eval = cohort_purity(bclustering, border, cohort_ids);
                j["baseline"] = cohort_evaluation_to_json(*baseline_eval);
            }
            write_text_file(out / evaluation_rel, j.dump(2) + "\n");
            stages.record("evaluation", evaluation_rel, clustering.k, 1, inputs);

            // report bundle (derived views, rewritten with the evaluation)
            ReportInputs report;
            const auto resp = gmm::read_responsibilities_csv(out / resp_rel);
            report.responsibilities = &resp;
            report.top_tweet_threshold = config.top_tweet_threshold;
            report.mum_evaluation = &mum_eval;
            report.baseline_evaluation = baseline_eval ? &*baseline_eval : nullptr;
            report.has_cohort = !cohort_ids.empty();
            kmeans::ElbowScan scan;
            if (!config.k.has_value()) {
                // re-read the scan for the report curve
                scan = read_scan_csv_for_report(out / "elbow.csv");
                report.scan = &scan;
            }
            emit_report(out, report);
        }
    }

    write_manifest(out / "manifest.json", stages.current);
    return stages.current;
}

Manifest run_baseline(const PipelineConfig& config) {
    PipelineConfig cfg = config;
    cfg.baseline.enabled = true;
    auto must_exist = [](const fs::path& p, const std::string& what) {
        if (p.empty()) throw ConfigError("baseline: no " + what + " configured");
        if (!fs::exists(p)) throw ConfigError("baseline: " + what + " not found: " + p.string());
    };
    must_exist(cfg.corpus, "corpus file");
    must_exist(cfg.baseline.label_map, "label map");
    if (!cfg.baseline.stopwords.empty()) must_exist(cfg.baseline.stopwords, "stopword list");
    if (!cfg.baseline.keywords.empty()) must_exist(cfg.baseline.keywords, "keyword list");
    if (!cfg.cohort.empty()) must_exist(cfg.cohort, "cohort file");
    fs::create_directories(cfg.out_dir);

    StageRunner stages{cfg.out_dir, read_manifest(cfg.out_dir / "manifest.json"), {}};
    stage_tokens(cfg, stages);
    run_baseline_track(cfg, stages);

    Manifest merged = stages.previous;
    for (const auto& [stage, entry] : stages.current) merged[stage] = entry;
    write_manifest(cfg.out_dir / "manifest.json", merged);
    return stages.current;
}

} // namespace mum::pipeline
