#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mum/corpus.hpp"
#include "mum/matrix.hpp"

namespace mum::embedding {

// Word -> vector table in the plain text interchange format:
// first line "<vocab_count> <dimension>", then "word v1 ... v_d" per line.
class EmbeddingTable {
public:
    explicit EmbeddingTable(std::size_t dimension);

    static EmbeddingTable load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    std::size_t dimension() const { return dimension_; }
    std::size_t size() const { return words_.size(); }

    // empty span when the word is unknown
    std::span<const double> find(std::string_view word) const;
    bool contains(std::string_view word) const;

    void insert(const std::string& word, std::span<const double> vector);

private:
    std::size_t dimension_;
    std::vector<std::string> words_;  // insertion order, for deterministic save
    std::vector<double> values_;      // row-major
    std::unordered_map<std::string, std::size_t> index_;
};

struct TweetVector {
    std::string id;
    std::string user_id;
    std::vector<double> values;
    std::size_t in_vocab_count = 0;

    bool excluded() const { return in_vocab_count == 0; }
};

// Sum of the table vectors of in-vocabulary tokens. Hashtags are looked up
// with '#' first, then as the bare word. OOV tokens are skipped.
TweetVector compose(const corpus::TokenizedTweet& tweet, const EmbeddingTable& table);

// Kept (non-excluded) tweet vectors as one matrix with parallel id columns.
struct VectorSet {
    std::vector<std::string> ids;
    std::vector<std::string> user_ids;
    std::vector<std::size_t> in_vocab_counts;
    Matrix values;  // N x d
    std::vector<std::string> excluded_ids;
};

VectorSet compose_all(const std::vector<corpus::TokenizedTweet>& tweets,
                      const EmbeddingTable& table);

// Both formats round-trip bit-exactly. The binary layout is row-major
// little-endian doubles plus a JSON sidecar at <path>.idx.json.
void write_vectors_csv(const std::filesystem::path& path, const VectorSet& set);
VectorSet read_vectors_csv(const std::filesystem::path& path);
void write_vectors_binary(const std::filesystem::path& path, const VectorSet& set);
VectorSet read_vectors_binary(const std::filesystem::path& path);

} // namespace mum::embedding
