#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mum::corpus {

struct RawTweet {
    std::string id;
    std::string user_id;
    std::string text;
    std::optional<std::vector<std::string>> hashtags;  // bare, no '#'
};

struct TokenizedTweet {
    std::string id;
    std::string user_id;
    std::vector<std::string> tokens;    // normalized; hashtags keep '#'
    std::vector<std::string> hashtags;  // tokens beginning with '#'
};

struct TopicLabelMap {
    std::vector<std::string> topics;                              // ordered topic names
    std::unordered_map<std::string, std::size_t> hashtag_to_topic;  // hashtag (no '#') -> index

    static TopicLabelMap from_json_file(const std::filesystem::path& path);
};

struct LabeledTweet {
    std::string tweet_id;
    std::size_t topic_index;
};

struct LabelReport {
    std::size_t labeled = 0;
    std::size_t ambiguous = 0;  // hashtags mapped to >= 2 distinct topics
    std::size_t unmatched = 0;  // no mapped hashtag
};

// Lowercases (ASCII + Latin-1), composes combining accents (NFC for the
// Latin letters this corpus uses) and leaves everything else alone.
std::string normalize_text(std::string_view text);

// Whitespace split, then: URLs and @mentions dropped, a leading run of "rt"
// dropped, edge punctuation stripped, hashtags kept with '#', empty tokens
// dropped. Idempotent over space-joined output.
std::vector<std::string> tokenize(std::string_view text);

TokenizedTweet tokenize_tweet(const RawTweet& raw);

// '#' stripped, deduplicated, first-seen order.
std::vector<std::string> extract_hashtags(const TokenizedTweet& tweet);

std::pair<std::vector<LabeledTweet>, LabelReport> label_by_hashtag(
    const std::vector<TokenizedTweet>& tweets, const TopicLabelMap& map);

// user_id -> tweet ids in input order
std::map<std::string, std::vector<std::string>> group_by_user(
    const std::vector<TokenizedTweet>& tweets);

// JSONL: one object per line {"id","user_id","text","hashtags"?}
std::vector<RawTweet> read_corpus_jsonl(const std::filesystem::path& path);
void write_tokens_jsonl(const std::filesystem::path& path,
                        const std::vector<TokenizedTweet>& tweets);
std::vector<TokenizedTweet> read_tokens_jsonl(const std::filesystem::path& path);

// CSV `tweet_id,topic_index` with a header row
void write_labels_csv(const std::filesystem::path& path, const std::vector<LabeledTweet>& labels);
std::vector<LabeledTweet> read_labels_csv(const std::filesystem::path& path);

} // namespace mum::corpus
