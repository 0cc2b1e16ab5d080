#include "mum/embedding.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "mum/errors.hpp"
#include "mum/io_util.hpp"

namespace mum::embedding {

namespace {
using json = nlohmann::json;
} // namespace

EmbeddingTable::EmbeddingTable(std::size_t dimension) : dimension_(dimension) {
    if (dimension == 0) throw DataError("embedding dimension must be positive");
}

void EmbeddingTable::insert(const std::string& word, std::span<const double> vector) {
    if (vector.size() != dimension_) {
        throw DataError("vector for '" + word + "' has length " +
                        std::to_string(vector.size()) + ", table dimension is " +
                        std::to_string(dimension_));
    }
    if (index_.contains(word)) throw DuplicateWord(word);
    index_[word] = words_.size();
    words_.push_back(word);
    values_.insert(values_.end(), vector.begin(), vector.end());
}

std::span<const double> EmbeddingTable::find(std::string_view word) const {
    const auto it = index_.find(std::string(word));
    if (it == index_.end()) return {};
    return {values_.data() + it->second * dimension_, dimension_};
}

bool EmbeddingTable::contains(std::string_view word) const {
    return index_.contains(std::string(word));
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open embedding file: " + path.string());

    std::string line;
    if (!std::getline(in, line)) throw MalformedHeader("empty file: " + path.string());
    const auto header = split(line, ' ');
    if (header.size() != 2) {
        throw MalformedHeader("expected '<vocab_count> <dimension>', got '" + line + "'");
    }
    long long vocab_count = 0, dimension = 0;
    try {
        vocab_count = parse_int(header[0]);
        dimension = parse_int(header[1]);
    } catch (const DataError&) {
        throw MalformedHeader("non-numeric header '" + line + "'");
    }
    if (vocab_count <= 0 || dimension <= 0) {
        throw MalformedHeader("non-positive counts in '" + line + "'");
    }

    EmbeddingTable table(static_cast<std::size_t>(dimension));
    table.words_.reserve(static_cast<std::size_t>(vocab_count));
    table.values_.reserve(static_cast<std::size_t>(vocab_count * dimension));

    std::vector<double> row(static_cast<std::size_t>(dimension));
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::size_t pos = line.find(' ');
        if (pos == std::string::npos) throw DimensionMismatch(line_no);
        const std::string word = line.substr(0, pos);
        std::size_t count = 0;
        while (pos < line.size()) {
            const std::size_t next = line.find(' ', pos + 1);
            const std::size_t end = next == std::string::npos ? line.size() : next;
            const std::string_view field(line.data() + pos + 1, end - pos - 1);
            if (!field.empty()) {
                if (count >= row.size()) throw DimensionMismatch(line_no);
                const double v = parse_double(field);
                if (!std::isfinite(v)) {
                    throw DataError("non-finite vector value at line " +
                                    std::to_string(line_no) + " of " + path.string());
                }
                row[count++] = v;
            }
            pos = end;
        }
        if (count != row.size()) throw DimensionMismatch(line_no);
        table.insert(word, row);
    }
    if (table.size() != static_cast<std::size_t>(vocab_count)) {
        throw MalformedHeader("header declares " + std::to_string(vocab_count) +
                              " words, file has " + std::to_string(table.size()));
    }
    return table;
}

void EmbeddingTable::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open file for writing: " + path.string());
    out << words_.size() << ' ' << dimension_ << '\n';
    for (std::size_t i = 0; i < words_.size(); ++i) {
        out << words_[i];
        for (std::size_t j = 0; j < dimension_; ++j) {
            out << ' ' << format_double(values_[i * dimension_ + j]);
        }
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + path.string());
}

TweetVector compose(const corpus::TokenizedTweet& tweet, const EmbeddingTable& table) {
    TweetVector v;
    v.id = tweet.id;
    v.user_id = tweet.user_id;
    v.values.assign(table.dimension(), 0.0);
    for (const auto& token : tweet.tokens) {
        std::span<const double> w = table.find(token);
        if (w.empty() && !token.empty() && token.front() == '#') {
            w = table.find(std::string_view(token).substr(1));
        }
        if (w.empty()) continue;
        for (std::size_t j = 0; j < w.size(); ++j) v.values[j] += w[j];
        ++v.in_vocab_count;
    }
    return v;
}

VectorSet compose_all(const std::vector<corpus::TokenizedTweet>& tweets,
                      const EmbeddingTable& table) {
    VectorSet set;
    std::vector<TweetVector> kept;
    kept.reserve(tweets.size());
    for (const auto& tweet : tweets) {
        TweetVector v = compose(tweet, table);
        if (v.excluded()) {
            set.excluded_ids.push_back(v.id);
        } else {
            kept.push_back(std::move(v));
        }
    }
    set.values = Matrix(kept.size(), table.dimension());
    for (std::size_t i = 0; i < kept.size(); ++i) {
        set.ids.push_back(std::move(kept[i].id));
        set.user_ids.push_back(std::move(kept[i].user_id));
        set.in_vocab_counts.push_back(kept[i].in_vocab_count);
        std::copy(kept[i].values.begin(), kept[i].values.end(), set.values.row(i).begin());
    }
    return set;
}

void write_vectors_csv(const std::filesystem::path& path, const VectorSet& set) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open file for writing: " + path.string());
    out << "tweet_id,user_id";
    for (std::size_t j = 0; j < set.values.cols(); ++j) out << ",v" << (j + 1);
    out << '\n';
    for (std::size_t i = 0; i < set.values.rows(); ++i) {
        out << csv_safe(set.ids[i]) << ',' << csv_safe(set.user_ids[i]);
        for (const double v : set.values.row(i)) out << ',' << format_double(v);
        out << '\n';
    }
    if (!out) throw DataError("write failed: " + path.string());
}

VectorSet read_vectors_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open vectors file: " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError("empty vectors file: " + path.string());
    const auto header = split(line, ',');
    if (header.size() < 2) throw DataError("bad vectors header: " + line);
    const std::size_t d = header.size() - 2;

    VectorSet set;
    std::vector<double> flat;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != d + 2) {
            throw DataError("vectors row " + std::to_string(line_no) + " has " +
                            std::to_string(fields.size()) + " fields, expected " +
                            std::to_string(d + 2));
        }
        set.ids.push_back(fields[0]);
        set.user_ids.push_back(fields[1]);
        // only in-vocabulary tweets reach this file; the exact counts live in
        // the binary format's sidecar
        set.in_vocab_counts.push_back(1);
        for (std::size_t j = 0; j < d; ++j) flat.push_back(parse_double(fields[2 + j]));
    }
    set.values = Matrix(set.ids.size(), d);
    std::copy(flat.begin(), flat.end(), set.values.data());
    return set;
}

void write_vectors_binary(const std::filesystem::path& path, const VectorSet& set) {
    static_assert(std::endian::native == std::endian::little,
                  "binary vector format is little-endian");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open file for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(set.values.data()),
              static_cast<std::streamsize>(set.values.size() * sizeof(double)));
    if (!out) throw DataError("write failed: " + path.string());

    json sidecar;
    sidecar["rows"] = set.values.rows();
    sidecar["cols"] = set.values.cols();
    sidecar["ids"] = set.ids;
    sidecar["user_ids"] = set.user_ids;
    sidecar["in_vocab_counts"] = set.in_vocab_counts;
    sidecar["excluded_ids"] = set.excluded_ids;
    write_text_file(path.string() + ".idx.json", sidecar.dump(2) + "\n");
}

VectorSet read_vectors_binary(const std::filesystem::path& path) {
    json sidecar;
    try {
        sidecar = json::parse(read_text_file(path.string() + ".idx.json"));
    } catch (const json::exception& e) {
        throw DataError("bad vectors sidecar for " + path.string() + ": " + e.what());
    }
    VectorSet set;
    const auto rows = sidecar.at("rows").get<std::size_t>();
    const auto cols = sidecar.at("cols").get<std::size_t>();
    set.ids = sidecar.at("ids").get<std::vector<std::string>>();
    set.user_ids = sidecar.at("user_ids").get<std::vector<std::string>>();
    set.in_vocab_counts = sidecar.at("in_vocab_counts").get<std::vector<std::size_t>>();
    set.excluded_ids = sidecar.at("excluded_ids").get<std::vector<std::string>>();
    if (set.ids.size() != rows || set.user_ids.size() != rows ||
        set.in_vocab_counts.size() != rows) {
        throw DataError("vectors sidecar is inconsistent: " + path.string());
    }

    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open vectors file: " + path.string());
    set.values = Matrix(rows, cols);
    in.read(reinterpret_cast<char*>(set.values.data()),
            static_cast<std::streamsize>(set.values.size() * sizeof(double)));
    if (static_cast<std::size_t>(in.gcount()) != set.values.size() * sizeof(double)) {
        throw DataError("vectors file truncated: " + path.string());
    }
    return set;
}

} // namespace mum::embedding
