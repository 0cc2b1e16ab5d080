#pragma once

// Synthetic cohort corpus: background users with Dirichlet(1) topic mixes
// plus a cohort concentrated on one topic, word vectors arranged so summed
// tweet vectors cluster by topic. Written to disk in the pipeline's input
// formats together with a ready-to-run config.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fixture {

struct CohortSpec {
    std::size_t topics = 22;
    std::size_t dim = 32;
    std::size_t background_users = 360;
    std::size_t cohort_users = 39;
    std::size_t tweets_min = 300;
    std::size_t tweets_max = 700;
    std::size_t words_per_topic = 30;
    std::size_t words_min = 4;
    std::size_t words_max = 9;
    double cohort_mass_min = 0.72;  // cohort concentration on topic 0
    double cohort_mass_max = 0.85;
    double word_noise = 0.05;
    std::size_t user_clusters = 5;
    std::size_t em_max_iter = 30;
    std::size_t kmeans_max_iter = 50;
    std::uint64_t seed = 1;

    static CohortSpec small() {
        CohortSpec s;
        s.topics = 6;
        s.dim = 12;
        s.background_users = 30;
        s.cohort_users = 8;
        s.tweets_min = 30;
        s.tweets_max = 60;
        s.words_per_topic = 12;
        s.user_clusters = 3;
        return s;
    }
};

struct CohortFiles {
    std::filesystem::path corpus;
    std::filesystem::path embeddings;
    std::filesystem::path cohort;
    std::filesystem::path config;
    std::vector<std::string> cohort_ids;
    std::size_t tweet_count = 0;
};

CohortFiles make_cohort_fixture(const std::filesystem::path& dir, const CohortSpec& spec);

} // namespace fixture
