#include "mum/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "mum/corpus.hpp"
#include "mum/errors.hpp"
#include "mum/io_util.hpp"
#include "mum/rng.hpp"

namespace mum::baseline {

TfIdfModel tfidf_fit(const std::vector<std::vector<std::string>>& documents,
                     const std::unordered_set<std::string>& stopwords) {
    if (documents.empty()) throw EmptyCorpus();
    TfIdfModel model;
    model.document_count = documents.size();
    for (const auto& doc : documents) {
        std::unordered_set<std::size_t> seen;
        for (const auto& term : doc) {
            if (stopwords.contains(term)) continue;
            auto it = model.vocabulary.find(term);
            if (it == model.vocabulary.end()) {
                it = model.vocabulary.emplace(term, model.terms.size()).first;
                model.terms.push_back(term);
                model.document_frequency.push_back(0);
            }
            if (seen.insert(it->second).second) ++model.document_frequency[it->second];
        }
    }
    return model;
}

SparseVector tfidf_transform(const TfIdfModel& model, const std::vector<std::string>& document) {
    std::unordered_map<std::size_t, std::size_t> counts;
    for (const auto& term : document) {
        const auto it = model.vocabulary.find(term);
        if (it != model.vocabulary.end()) ++counts[it->second];
    }
    SparseVector out;
    out.reserve(counts.size());
    const double n_docs = static_cast<double>(model.document_count);
    for (const auto& [column, count] : counts) {
        const double idf = std::log(n_docs / static_cast<double>(model.document_frequency[column]));
        out.emplace_back(column, static_cast<double>(count) * idf);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::pair<std::string, double>> top_terms(const TfIdfModel& model,
                                                      const std::vector<std::string>& document,
                                                      std::size_t count) {
    SparseVector v = tfidf_transform(model, document);
    std::stable_sort(v.begin(), v.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::pair<std::string, double>> out;
    for (const auto& [column, weight] : v) {
        if (out.size() == count) break;
        out.emplace_back(model.terms[column], weight);
    }
    return out;
}

namespace {

void softmax_scores(const ClassifierModel& model, const SparseVector& x,
                    std::vector<double>& probs) {
    probs.assign(model.classes, 0.0);
    for (std::size_t c = 0; c < model.classes; ++c) {
        double s = model.bias[c];
        const auto w = model.weights.row(c);
        for (const auto& [j, v] : x) s += w[j] * v;
        probs[c] = s;
    }
    const double m = *std::max_element(probs.begin(), probs.end());
    double total = 0.0;
    for (double& p : probs) {
        p = std::exp(p - m);
        total += p;
    }
    for (double& p : probs) p /= total;
}

} // namespace

std::vector<double> ClassifierModel::predict_proba(const SparseVector& x) const {
    std::vector<double> probs;
    softmax_scores(*this, x, probs);
    return probs;
}

double softmax_loss(const ClassifierModel& model, const std::vector<SparseVector>& features,
                    const std::vector<std::size_t>& labels, double l2) {
    const double n = static_cast<double>(features.size());
    double loss = 0.0;
    std::vector<double> probs;
    for (std::size_t i = 0; i < features.size(); ++i) {
        softmax_scores(model, features[i], probs);
        loss -= std::log(std::max(probs[labels[i]], 1e-300));
    }
    loss /= n;
    double penalty = 0.0;
    for (std::size_t idx = 0; idx < model.weights.size(); ++idx) {
        penalty += model.weights.data()[idx] * model.weights.data()[idx];
    }
    return loss + 0.5 * l2 * penalty;
}

void softmax_gradient(const ClassifierModel& model, const std::vector<SparseVector>& features,
                      const std::vector<std::size_t>& labels, double l2, Matrix& grad_weights,
                      std::vector<double>& grad_bias) {
    const double inv_n = 1.0 / static_cast<double>(features.size());
    grad_weights = Matrix(model.classes, model.features);
    grad_bias.assign(model.classes, 0.0);
    std::vector<double> probs;
    for (std::size_t i = 0; i < features.size(); ++i) {
        softmax_scores(model, features[i], probs);
        probs[labels[i]] -= 1.0;
        for (std::size_t c = 0; c < model.classes; ++c) {
            const double coeff = probs[c] * inv_n;
            grad_bias[c] += coeff;
            const auto g = grad_weights.row(c);
            for (const auto& [j, v] : features[i]) g[j] += coeff * v;
        }
    }
    for (std::size_t c = 0; c < model.classes; ++c) {
        const auto g = grad_weights.row(c);
        const auto w = model.weights.row(c);
        for (std::size_t j = 0; j < model.features; ++j) g[j] += l2 * w[j];
    }
}

ClassifierModel classifier_train(const std::vector<SparseVector>& features,
                                 const std::vector<std::size_t>& labels, std::size_t n_classes,
                                 const TrainOptions& options) {
    if (features.size() != labels.size()) throw LengthMismatch(features.size(), labels.size());
    if (features.empty()) throw DataError("empty training set");
    std::unordered_set<std::size_t> distinct(labels.begin(), labels.end());
    if (distinct.size() < 2) throw SingleClass();
    std::size_t max_feature = 0;
    for (const auto& x : features) {
        for (const auto& [j, v] : x) max_feature = std::max(max_feature, j + 1);
    }
    for (const std::size_t y : labels) {
        if (y >= n_classes) throw DataError("label out of range: " + std::to_string(y));
    }

    ClassifierModel model;
    model.classes = n_classes;
    model.features = max_feature;
    model.weights = Matrix(n_classes, max_feature);
    model.bias.assign(n_classes, 0.0);

    double loss = softmax_loss(model, features, labels, options.l2);
    model.loss_trace.push_back(loss);

    Matrix grad_w;
    std::vector<double> grad_b;
    double step = options.learning_rate;
    for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
        softmax_gradient(model, features, labels, options.l2, grad_w, grad_b);

        // backtracking: shrink the step until the loss does not increase
        bool accepted = false;
        while (step >= 1e-12) {
            ClassifierModel candidate = model;
            candidate.loss_trace.clear();
            for (std::size_t idx = 0; idx < candidate.weights.size(); ++idx) {
                candidate.weights.data()[idx] -= step * grad_w.data()[idx];
            }
            for (std::size_t c = 0; c < n_classes; ++c) candidate.bias[c] -= step * grad_b[c];
            const double candidate_loss = softmax_loss(candidate, features, labels, options.l2);
            if (candidate_loss <= loss) {
                candidate.loss_trace = std::move(model.loss_trace);
                model = std::move(candidate);
                accepted = true;
                const double improvement = loss - candidate_loss;
                loss = candidate_loss;
                model.loss_trace.push_back(loss);
                if (improvement < options.tol * std::max(std::abs(loss), 1.0)) {
                    return model;
                }
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // step collapsed; at a (numerical) stationary point
    }
    return model;
}

Prediction classify(const ClassifierModel& model, const SparseVector& x) {
    Prediction p;
    p.probabilities = model.predict_proba(x);
    p.label = 0;
    for (std::size_t c = 1; c < p.probabilities.size(); ++c) {
        if (p.probabilities[c] > p.probabilities[p.label]) p.label = c;
    }
    return p;
}

MulticlassMetrics evaluate_multiclass(const std::vector<std::size_t>& predictions,
                                      const std::vector<std::size_t>& truth) {
    if (predictions.size() != truth.size()) {
        throw LengthMismatch(predictions.size(), truth.size());
    }
    if (predictions.empty()) throw DataError("nothing to evaluate");

    std::size_t n_classes = 0;
    for (const std::size_t c : predictions) n_classes = std::max(n_classes, c + 1);
    for (const std::size_t c : truth) n_classes = std::max(n_classes, c + 1);

    std::vector<std::size_t> tp(n_classes, 0), fp(n_classes, 0), fn(n_classes, 0);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        if (predictions[i] == truth[i]) {
            ++tp[truth[i]];
            ++correct;
        } else {
            ++fp[predictions[i]];
            ++fn[truth[i]];
        }
    }

    MulticlassMetrics m;
    m.accuracy = static_cast<double>(correct) / static_cast<double>(predictions.size());
    std::size_t tp_total = 0, fp_total = 0, fn_total = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        tp_total += tp[c];
        fp_total += fp[c];
        fn_total += fn[c];
    }
    m.micro_precision = static_cast<double>(tp_total) / static_cast<double>(tp_total + fp_total);
    m.micro_recall = static_cast<double>(tp_total) / static_cast<double>(tp_total + fn_total);

    double precision_sum = 0.0, recall_sum = 0.0;
    std::size_t precision_classes = 0, recall_classes = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        const bool in_truth = tp[c] + fn[c] > 0;
        const bool predicted = tp[c] + fp[c] > 0;
        if (in_truth || predicted) {
            // a class in the truth that was never predicted scores 0
            precision_sum += predicted
                                 ? static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fp[c])
                                 : 0.0;
            ++precision_classes;
        }
        if (in_truth) {
            recall_sum += static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fn[c]);
            ++recall_classes;
        }
    }
    m.macro_precision = precision_classes ? precision_sum / precision_classes : 0.0;
    m.macro_recall = recall_classes ? recall_sum / recall_classes : 0.0;
    return m;
}

std::pair<double, double> keyword_pr(const std::vector<std::string>& top_words,
                                     const std::vector<std::string>& keywords) {
    if (top_words.empty()) throw DataError("empty top-words list");
    if (keywords.empty()) throw DataError("empty keyword list");
    auto normalize = [](const std::string& word) -> std::string {
        const auto tokens = corpus::tokenize(word);
        return tokens.empty() ? std::string() : tokens.front();
    };
    std::unordered_set<std::string> present;
    for (const auto& w : top_words) {
        const std::string n = normalize(w);
        if (!n.empty()) present.insert(n);
    }
    std::unordered_set<std::string> matched;
    for (const auto& k : keywords) {
        const std::string n = normalize(k);
        if (!n.empty() && present.contains(n)) matched.insert(n);
    }
    const double overlap = static_cast<double>(matched.size());
    return {overlap / static_cast<double>(top_words.size()),
            overlap / static_cast<double>(keywords.size())};
}

SplitIndices stratified_split(const std::vector<std::size_t>& labels, double test_fraction,
                              std::uint64_t seed) {
    if (!(test_fraction >= 0.0) || test_fraction >= 1.0) {
        throw DataError("test fraction must be in [0, 1)");
    }
    std::map<std::size_t, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

    Rng rng(seed);
    SplitIndices split;
    for (auto& [label, indices] : by_class) {
        for (std::size_t i = indices.size(); i > 1; --i) {
            std::swap(indices[i - 1], indices[rng.below(i)]);
        }
        std::size_t n_test = static_cast<std::size_t>(
            std::llround(static_cast<double>(indices.size()) * test_fraction));
        if (n_test >= indices.size()) n_test = indices.size() - 1;  // keep one for training
        for (std::size_t i = 0; i < indices.size(); ++i) {
            (i < n_test ? split.test : split.train).push_back(indices[i]);
        }
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

std::unordered_set<std::string> read_word_list_json(const std::filesystem::path& path,
                                                    const std::string& key) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad word list " + path.string() + ": " + e.what());
    }
    std::unordered_set<std::string> out;
    for (const auto& w : j.at(key)) out.insert(corpus::normalize_text(w.get<std::string>()));
    return out;
}

std::vector<std::string> read_keywords_json(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad keyword list " + path.string() + ": " + e.what());
    }
    std::vector<std::string> out;
    for (const auto& w : j.at("keywords")) out.push_back(w.get<std::string>());
    return out;
}

} // namespace mum::baseline
