#pragma once

#include <stdexcept>
#include <string>

namespace mum {

// Error category decides the CLI exit code: ConfigError 2, DataError 3,
// NumericError 4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct DataError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

// embedding
struct MalformedHeader : DataError {
    explicit MalformedHeader(const std::string& detail)
        : DataError("malformed embedding header: " + detail) {}
};

struct DimensionMismatch : DataError {
    explicit DimensionMismatch(std::size_t line)
        : DataError("embedding row at line " + std::to_string(line) +
                    " does not match the declared dimension"),
          line(line) {}
    std::size_t line;
};

struct DuplicateWord : DataError {
    explicit DuplicateWord(const std::string& word)
        : DataError("duplicate word in embedding table: " + word), word(word) {}
    std::string word;
};

// kmeans
struct ZeroVector : NumericError {
    explicit ZeroVector(const std::string& detail)
        : NumericError("zero-norm vector: " + detail) {}
};

struct TooFewPoints : DataError {
    explicit TooFewPoints(const std::string& detail)
        : DataError("too few points: " + detail) {}
};

// gmm
struct NonFiniteLikelihood : NumericError {
    explicit NonFiniteLikelihood(std::size_t row)
        : NumericError("non-finite likelihood at row " + std::to_string(row)) {}
};

// profiles
struct NoTweets : DataError {
    explicit NoTweets(const std::string& user_id)
        : DataError("no tweet rows for user: " + user_id) {}
};

// baseline
struct EmptyCorpus : DataError {
    EmptyCorpus() : DataError("tf-idf fit requires at least one document") {}
};

struct SingleClass : DataError {
    SingleClass() : DataError("classifier training requires at least two classes") {}
};

struct LengthMismatch : DataError {
    LengthMismatch(std::size_t a, std::size_t b)
        : DataError("length mismatch: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

// pipeline
struct TooFewUsers : DataError {
    TooFewUsers(std::size_t have, std::size_t need)
        : DataError("too few users to cluster: have " + std::to_string(have) +
                    ", need " + std::to_string(need)) {}
};

struct UnknownUser : DataError {
    explicit UnknownUser(const std::string& user_id)
        : DataError("cohort user not present in clustering: " + user_id),
          user_id(user_id) {}
    std::string user_id;
};

} // namespace mum
