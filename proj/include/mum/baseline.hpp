#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mum/matrix.hpp"

namespace mum::baseline {

// (feature index, value), strictly increasing indices
using SparseVector = std::vector<std::pair<std::size_t, double>>;

struct TfIdfModel {
    std::vector<std::string> terms;                            // column -> term
    std::unordered_map<std::string, std::size_t> vocabulary;   // term -> column
    std::vector<std::size_t> document_frequency;               // per column
    std::size_t document_count = 0;
};

// Vocabulary and document frequencies over the corpus, stopwords removed.
TfIdfModel tfidf_fit(const std::vector<std::vector<std::string>>& documents,
                     const std::unordered_set<std::string>& stopwords = {});

// tf(term) * ln(N_docs / df(term)), raw counts, unknown terms skipped.
SparseVector tfidf_transform(const TfIdfModel& model, const std::vector<std::string>& document);

// Highest-weighted terms of one document, descending weight; ties by
// column order.
std::vector<std::pair<std::string, double>> top_terms(const TfIdfModel& model,
                                                      const std::vector<std::string>& document,
                                                      std::size_t count);

// Multinomial logistic regression: the pluggable probability classifier
// behind the comparison track.
struct ClassifierModel {
    std::size_t classes = 0;
    std::size_t features = 0;
    Matrix weights;  // classes x features
    std::vector<double> bias;
    std::vector<double> loss_trace;

    std::vector<double> predict_proba(const SparseVector& x) const;
};

struct TrainOptions {
    double learning_rate = 1.0;  // initial step; backtracking halves it per rejection
    double l2 = 1e-4;
    std::size_t max_iter = 200;
    double tol = 1e-7;  // relative loss improvement
};

ClassifierModel classifier_train(const std::vector<SparseVector>& features,
                                 const std::vector<std::size_t>& labels, std::size_t n_classes,
                                 const TrainOptions& options = {});

struct Prediction {
    std::size_t label = 0;  // argmax, ties toward the lower class index
    std::vector<double> probabilities;
};

Prediction classify(const ClassifierModel& model, const SparseVector& x);

// Mean cross-entropy plus 0.5*l2*|W|^2 (bias unpenalized), and its gradient.
// Exposed so the analytic gradient can be checked independently.
double softmax_loss(const ClassifierModel& model, const std::vector<SparseVector>& features,
                    const std::vector<std::size_t>& labels, double l2);
void softmax_gradient(const ClassifierModel& model, const std::vector<SparseVector>& features,
                      const std::vector<std::size_t>& labels, double l2, Matrix& grad_weights,
                      std::vector<double>& grad_bias);

struct MulticlassMetrics {
    double accuracy = 0.0;
    double micro_precision = 0.0;
    double micro_recall = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
};

// Micro pools TP/FP/FN globally; macro is the unweighted per-class mean.
// Classes absent from the truth contribute precision 0 when predicted and
// are otherwise excluded from the macro means.
MulticlassMetrics evaluate_multiclass(const std::vector<std::size_t>& predictions,
                                      const std::vector<std::size_t>& truth);

// Overlap counted after tokenize-style normalization of both lists.
// precision = |overlap| / |top_words|, recall = |overlap| / |keywords|.
std::pair<double, double> keyword_pr(const std::vector<std::string>& top_words,
                                     const std::vector<std::string>& keywords);

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

// Per-class shuffle and cut; every class keeps at least one training
// example. Deterministic for a fixed seed.
SplitIndices stratified_split(const std::vector<std::size_t>& labels, double test_fraction,
                              std::uint64_t seed);

std::unordered_set<std::string> read_word_list_json(const std::filesystem::path& path,
                                                    const std::string& key);
std::vector<std::string> read_keywords_json(const std::filesystem::path& path);

} // namespace mum::baseline
