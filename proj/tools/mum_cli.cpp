#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mum/baseline.hpp"
#include "mum/corpus.hpp"
#include "mum/embedding.hpp"
#include "mum/errors.hpp"
#include "mum/gmm.hpp"
#include "mum/io_util.hpp"
#include "mum/kmeans.hpp"
#include "mum/pipeline.hpp"
#include "mum/profiles.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
};

mum::pipeline::PipelineConfig load_config(const GlobalOpts& g, bool required) {
    mum::pipeline::PipelineConfig config;
    if (!g.config_path.empty()) {
        config = mum::pipeline::PipelineConfig::from_json_file(g.config_path);
    } else if (required) {
        throw mum::ConfigError("this command needs --config <path>");
    }
    if (g.seed.has_value()) config.seed_list = {*g.seed};
    if (!g.out.empty()) config.out_dir = g.out;
    return config;
}

mum::embedding::VectorSet load_vectors_any(const std::string& path) {
    if (path.ends_with(".bin")) return mum::embedding::read_vectors_binary(path);
    return mum::embedding::read_vectors_csv(path);
}

std::vector<std::size_t> parse_k_list(const std::string& csv) {
    std::vector<std::size_t> out;
    for (const auto& f : mum::split(csv, ',')) {
        if (!f.empty()) out.push_back(static_cast<std::size_t>(mum::parse_int(f)));
    }
    return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
    std::vector<std::uint64_t> out;
    for (const auto& f : mum::split(csv, ',')) {
        if (!f.empty()) out.push_back(static_cast<std::uint64_t>(mum::parse_int(f)));
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-topic user modeling over short-text corpora"};
    app.require_subcommand(1);

    GlobalOpts global;
    app.add_option("--config", global.config_path, "Pipeline config JSON");
    std::uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "Override the seed list with one seed");
    app.add_option("--out", global.out, "Override the output directory");

    // tokenize
    auto* cmd_tokenize = app.add_subcommand("tokenize", "Normalize a JSONL corpus into tokens");
    std::string tok_corpus, tok_out = "tokens.jsonl";
    cmd_tokenize->add_option("--corpus", tok_corpus, "Corpus JSONL (defaults to config)");
    cmd_tokenize->add_option("--output", tok_out, "Output tokens JSONL");

    // embed
    auto* cmd_embed = app.add_subcommand("embed", "Compose tweet vectors from a word table");
    std::string emb_tokens = "tokens.jsonl", emb_table, emb_out = "vectors.bin",
                emb_format = "binary";
    cmd_embed->add_option("--tokens", emb_tokens, "Tokenized corpus JSONL");
    cmd_embed->add_option("--embeddings", emb_table, "Word vector table (defaults to config)");
    cmd_embed->add_option("--output", emb_out, "Output vectors file");
    cmd_embed->add_option("--format", emb_format, "binary or csv");

    // scan-k
    auto* cmd_scan = app.add_subcommand("scan-k", "Heterogeneity scan over candidate K");
    std::string scan_vectors = "vectors.bin", scan_klist, scan_seeds, scan_out = ".";
    cmd_scan->add_option("--vectors", scan_vectors, "Tweet vectors (.bin or .csv)");
    cmd_scan->add_option("--k-list", scan_klist, "Comma-separated K values");
    cmd_scan->add_option("--seeds", scan_seeds, "Comma-separated seeds");
    cmd_scan->add_option("--output", scan_out, "Directory for elbow.csv / elbow.svg");

    // fit-gmm
    auto* cmd_gmm = app.add_subcommand("fit-gmm", "K-means++ init then EM soft assignment");
    std::string gmm_vectors = "vectors.bin", gmm_seeds, gmm_out = ".";
    std::size_t gmm_k = 0;
    cmd_gmm->add_option("--vectors", gmm_vectors, "Tweet vectors (.bin or .csv)");
    cmd_gmm->add_option("--k", gmm_k, "Number of topics");
    cmd_gmm->add_option("--seeds", gmm_seeds, "Comma-separated seeds");
    cmd_gmm->add_option("--output", gmm_out,
                        "Directory for kmeans.json / gmm.json / responsibilities.csv");

    // profile
    auto* cmd_profile = app.add_subcommand("profile", "Aggregate responsibilities per user");
    std::string prof_vectors = "vectors.bin", prof_resp = "responsibilities.csv",
                prof_out = "profiles.jsonl";
    cmd_profile->add_option("--vectors", prof_vectors, "Tweet vectors (for user ids)");
    cmd_profile->add_option("--responsibilities", prof_resp, "Responsibility CSV");
    cmd_profile->add_option("--output", prof_out, "Output profiles JSONL");

    // baseline
    auto* cmd_baseline =
        app.add_subcommand("baseline", "tf-idf + classifier comparison track (config-driven)");

    // cluster-users
    auto* cmd_cluster = app.add_subcommand("cluster-users", "K-means++ over user profiles");
    std::string cl_profiles = "profiles.jsonl", cl_metric = "euclidean", cl_seeds,
                cl_out = "user_clusters.json";
    std::size_t cl_k = 0;
    cmd_cluster->add_option("--profiles", cl_profiles, "Profiles JSONL");
    cmd_cluster->add_option("--k-users", cl_k, "Number of user clusters");
    cmd_cluster->add_option("--user-metric", cl_metric, "euclidean or cosine");
    cmd_cluster->add_option("--seeds", cl_seeds, "Comma-separated seeds");
    cmd_cluster->add_option("--output", cl_out, "Output clustering JSON");

    // evaluate
    auto* cmd_eval = app.add_subcommand("evaluate", "Cohort purity of a user clustering");
    std::string ev_clusters = "user_clusters.json", ev_cohort, ev_out = "evaluation.json";
    cmd_eval->add_option("--user-clusters", ev_clusters, "Clustering JSON");
    cmd_eval->add_option("--cohort", ev_cohort, "Cohort file, one user id per line");
    cmd_eval->add_option("--output", ev_out, "Output evaluation JSON");

    // run
    auto* cmd_run = app.add_subcommand("run", "Full pipeline from a config file");

    // let --config/--seed/--out appear after the subcommand too
    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);
    if (seed_opt->count() > 0) global.seed = seed_value;

    try {
        if (cmd_tokenize->parsed()) {
            fs::path corpus = tok_corpus;
            if (corpus.empty()) corpus = load_config(global, true).corpus;
            if (corpus.empty()) throw mum::ConfigError("tokenize: no corpus given");
            const auto raw = mum::corpus::read_corpus_jsonl(corpus);
            std::vector<mum::corpus::TokenizedTweet> tokens;
            tokens.reserve(raw.size());
            for (const auto& t : raw) tokens.push_back(mum::corpus::tokenize_tweet(t));
            mum::corpus::write_tokens_jsonl(tok_out, tokens);
            std::cout << tokens.size() << " tweets -> " << tok_out << "\n";
        } else if (cmd_embed->parsed()) {
            fs::path table_path = emb_table;
            if (table_path.empty()) table_path = load_config(global, true).embeddings;
            if (table_path.empty()) throw mum::ConfigError("embed: no embeddings given");
            const auto tokens = mum::corpus::read_tokens_jsonl(emb_tokens);
            const auto table = mum::embedding::EmbeddingTable::load(table_path);
            const auto set = mum::embedding::compose_all(tokens, table);
            if (emb_format == "binary") {
                mum::embedding::write_vectors_binary(emb_out, set);
            } else if (emb_format == "csv") {
                mum::embedding::write_vectors_csv(emb_out, set);
            } else {
                throw mum::ConfigError("embed: --format must be binary or csv");
            }
            std::cout << set.values.rows() << " vectors (" << set.excluded_ids.size()
                      << " excluded as out-of-vocabulary) -> " << emb_out << "\n";
        } else if (cmd_scan->parsed()) {
            const auto config = load_config(global, false);
            const auto set = load_vectors_any(scan_vectors);
            std::vector<std::size_t> k_list =
                scan_klist.empty() ? config.k_list : parse_k_list(scan_klist);
            if (k_list.empty()) throw mum::ConfigError("scan-k: no K list given");
            const auto seeds =
                scan_seeds.empty() ? config.seed_list : parse_seed_list(scan_seeds);
            const auto scan = mum::kmeans::scan_k(set.values, k_list, seeds,
                                                  config.kmeans_max_iter, config.kmeans_tol);
            fs::create_directories(scan_out);
            mum::kmeans::write_scan_csv(fs::path(scan_out) / "elbow.csv", scan);
            mum::pipeline::ReportInputs report;
            report.scan = &scan;
            mum::pipeline::emit_report(scan_out, report);
            std::cout << "suggested K = " << scan.suggested_k << "\n";
            for (const auto k : scan.violations) {
                std::cout << "warning: heterogeneity rose at K=" << k
                          << " (seed list may be too small)\n";
            }
        } else if (cmd_gmm->parsed()) {
            const auto config = load_config(global, false);
            if (gmm_k == 0) {
                if (!config.k.has_value()) throw mum::ConfigError("fit-gmm: --k required");
                gmm_k = *config.k;
            }
            const auto seeds = gmm_seeds.empty() ? config.seed_list : parse_seed_list(gmm_seeds);
            const auto set = load_vectors_any(gmm_vectors);
            mum::kmeans::ClusteringResult best;
            bool have = false;
            for (const auto seed : seeds) {
                auto r = mum::kmeans::fit(set.values, gmm_k, seed, config.kmeans_max_iter,
                                          config.kmeans_tol);
                if (!have || r.heterogeneity < best.heterogeneity) {
                    best = std::move(r);
                    have = true;
                }
            }
            fs::create_directories(gmm_out);
            mum::write_text_file(fs::path(gmm_out) / "kmeans.json",
                                 mum::kmeans::to_json(best).dump(2) + "\n");
            const auto init = mum::gmm::init_from_kmeans(set.values, best);
            auto fit = mum::gmm::fit_em(set.values, init, config.em_max_iter, config.em_tol);
            mum::write_text_file(fs::path(gmm_out) / "gmm.json",
                                 mum::gmm::to_json(fit.model).dump(2) + "\n");
            mum::gmm::ResponsibilityMatrix resp{set.ids, std::move(fit.responsibilities)};
            mum::gmm::write_responsibilities_csv(fs::path(gmm_out) / "responsibilities.csv", resp);
            std::cout << "K=" << gmm_k << " seed=" << best.seed << " em_iterations="
                      << (fit.model.log_likelihood_trace.size() - 1) << " loglik="
                      << mum::format_double(fit.model.log_likelihood_trace.back()) << "\n";
        } else if (cmd_profile->parsed()) {
            const auto set = load_vectors_any(prof_vectors);
            const auto resp = mum::gmm::read_responsibilities_csv(prof_resp);
            if (resp.ids != set.ids) {
                throw mum::DataError("profile: responsibilities and vectors disagree on rows");
            }
            const auto built = mum::profiles::build_profiles(resp.values, set.user_ids,
                                                             mum::profiles::ProfileKind::Mum);
            mum::profiles::write_profiles_jsonl(prof_out, built);
            std::cout << built.size() << " profiles -> " << prof_out << "\n";
        } else if (cmd_baseline->parsed()) {
            const auto config = load_config(global, true);
            mum::pipeline::run_baseline(config);
        } else if (cmd_cluster->parsed()) {
            const auto config = load_config(global, false);
            if (cl_k == 0) {
                if (!config.user_k.has_value()) {
                    throw mum::ConfigError("cluster-users: --k-users required");
                }
                cl_k = *config.user_k;
            }
            const auto seeds = cl_seeds.empty() ? config.seed_list : parse_seed_list(cl_seeds);
            mum::pipeline::UserMetric metric;
            if (cl_metric == "euclidean") {
                metric = mum::pipeline::UserMetric::Euclidean;
            } else if (cl_metric == "cosine") {
                metric = mum::pipeline::UserMetric::Cosine;
            } else {
                throw mum::ConfigError("cluster-users: --user-metric must be euclidean or cosine");
            }
            const auto built = mum::profiles::read_profiles_jsonl(cl_profiles);
            const auto matrix = mum::pipeline::profile_matrix(built);
            const auto clustering = mum::pipeline::cluster_users(matrix, cl_k, seeds, metric);
            json j = mum::kmeans::to_json(clustering);
            j["metric"] = cl_metric;
            json assignments = json::object();
            for (std::size_t i = 0; i < built.size(); ++i) {
                assignments[built[i].user_id] = clustering.assignments[i];
            }
            j["assignments"] = std::move(assignments);
            mum::write_text_file(cl_out, j.dump(2) + "\n");
            std::cout << "K=" << cl_k << " seed=" << clustering.seed
                      << " distortion=" << mum::format_double(clustering.heterogeneity) << " -> "
                      << cl_out << "\n";
        } else if (cmd_eval->parsed()) {
            const json uc = json::parse(mum::read_text_file(ev_clusters));
            mum::kmeans::ClusteringResult clustering;
            clustering.k = uc.at("K").get<std::size_t>();
            std::vector<std::string> user_ids;
            for (const auto& [user, cluster] : uc.at("assignments").items()) {
                user_ids.push_back(user);
                clustering.assignments.push_back(cluster.get<std::size_t>());
            }
            std::vector<std::string> cohort;
            if (!ev_cohort.empty()) cohort = mum::pipeline::read_cohort_file(ev_cohort);
            const auto eval = mum::pipeline::cohort_purity(clustering, user_ids, cohort);
            json j;
            j["mum"] = mum::pipeline::cohort_evaluation_to_json(eval);
            j["cohort_size"] = cohort.size();
            mum::write_text_file(ev_out, j.dump(2) + "\n");
            std::cout << "precision=" << mum::format_double(eval.precision) << " majority_cluster="
                      << eval.majority_cluster << " -> " << ev_out << "\n";
        } else if (cmd_run->parsed()) {
            const auto config = load_config(global, true);
            const auto manifest = mum::pipeline::run(config);
            std::cout << manifest.size() << " artifacts in " << config.out_dir.string() << "\n";
        }
    } catch (const mum::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const mum::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const mum::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
