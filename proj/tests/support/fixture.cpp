#include "fixture.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "mum/embedding.hpp"
#include "mum/io_util.hpp"
#include "mum/matrix.hpp"
#include "mum/rng.hpp"
#include "datagen.hpp"

namespace fixture {

namespace {

using json = nlohmann::json;

std::string word_name(std::size_t topic, std::size_t index) {
    return "t" + std::to_string(topic) + "w" + std::to_string(index);
}

// Dirichlet(1) over k topics
std::vector<double> flat_dirichlet(std::size_t k, mum::Rng& rng) {
    std::vector<double> mix(k);
    double total = 0.0;
    for (double& v : mix) {
        v = rng.exponential();
        total += v;
    }
    for (double& v : mix) v /= total;
    return mix;
}

} // namespace

CohortFiles make_cohort_fixture(const std::filesystem::path& dir, const CohortSpec& spec) {
    if (spec.topics > spec.dim) {
        throw std::invalid_argument("fixture needs dim >= topics for orthogonal directions");
    }
    std::filesystem::create_directories(dir);
    mum::Rng rng(spec.seed);

    // word table: words_per_topic noisy copies of each topic direction
    const mum::Matrix directions = datagen::orthonormal_directions(spec.topics, spec.dim, rng);
    mum::embedding::EmbeddingTable table(spec.dim);
    std::vector<double> vec(spec.dim);
    for (std::size_t t = 0; t < spec.topics; ++t) {
        const auto dir_row = directions.row(t);
        for (std::size_t w = 0; w < spec.words_per_topic; ++w) {
            for (std::size_t j = 0; j < spec.dim; ++j) {
                vec[j] = dir_row[j] + spec.word_noise * rng.normal();
            }
            table.insert(word_name(t, w), vec);
        }
    }

    CohortFiles files;
    files.corpus = dir / "corpus.jsonl";
    files.embeddings = dir / "embeddings.txt";
    files.cohort = dir / "cohort.txt";
    files.config = dir / "config.json";
    table.save(files.embeddings);

    // users: cohort p### concentrated on topic 0, background u### Dirichlet(1)
    struct User {
        std::string id;
        std::vector<double> mix;
    };
    std::vector<User> users;
    for (std::size_t u = 0; u < spec.cohort_users; ++u) {
        User user;
        user.id = "p" + std::to_string(u);
        const double mass = rng.uniform(spec.cohort_mass_min, spec.cohort_mass_max);
        user.mix = flat_dirichlet(spec.topics - 1, rng);
        user.mix.insert(user.mix.begin(), 0.0);
        for (std::size_t t = 1; t < spec.topics; ++t) user.mix[t] *= 1.0 - mass;
        user.mix[0] = mass;
        files.cohort_ids.push_back(user.id);
        users.push_back(std::move(user));
    }
    for (std::size_t u = 0; u < spec.background_users; ++u) {
        users.push_back({"u" + std::to_string(u), flat_dirichlet(spec.topics, rng)});
    }

    {
        std::ofstream corpus(files.corpus, std::ios::binary | std::ios::trunc);
        for (const auto& user : users) {
            const std::size_t tweets =
                spec.tweets_min + rng.below(spec.tweets_max - spec.tweets_min + 1);
            for (std::size_t t = 0; t < tweets; ++t) {
                const std::size_t topic = rng.weighted(user.mix);
                const std::size_t words =
                    spec.words_min + rng.below(spec.words_max - spec.words_min + 1);
                std::string text;
                for (std::size_t w = 0; w < words; ++w) {
                    if (w) text += ' ';
                    text += word_name(topic, rng.below(spec.words_per_topic));
                }
                json j;
                j["id"] = user.id + "_" + std::to_string(t);
                j["user_id"] = user.id;
                j["text"] = text;
                corpus << j.dump() << '\n';
                ++files.tweet_count;
            }
        }
    }

    {
        std::string cohort;
        for (const auto& id : files.cohort_ids) {
            cohort += id;
            cohort += '\n';
        }
        mum::write_text_file(files.cohort, cohort);
    }

    {
        json config;
        config["corpus"] = "corpus.jsonl";
        config["embeddings"] = "embeddings.txt";
        config["cohort"] = "cohort.txt";
        config["out_dir"] = "out";
        config["topics"] = {{"k", spec.topics}};
        config["seed_list"] = {0, 20000, 40000, 60000, 80000};
        config["kmeans"] = {{"max_iter", spec.kmeans_max_iter}, {"tol", 1e-4}};
        config["em"] = {{"max_iter", spec.em_max_iter}, {"tol", 1e-4}};
        config["users"] = {{"k", spec.user_clusters}, {"metric", "euclidean"}};
        config["vector_format"] = "binary";
        config["top_tweet_threshold"] = 0.9;
        mum::write_text_file(files.config, config.dump(2) + "\n");
    }
    return files;
}

} // namespace fixture
