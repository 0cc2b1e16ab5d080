#include "mum/profiles.hpp"

#include <cmath>
#include <fstream>
#include <map>

#include <json.hpp>

#include "mum/errors.hpp"
#include "mum/io_util.hpp"

namespace mum::profiles {

namespace {

using json = nlohmann::json;

std::vector<double> column_sums(const Matrix& rows) {
    std::vector<double> sums(rows.cols(), 0.0);
    for (std::size_t i = 0; i < rows.rows(); ++i) {
        const auto row = rows.row(i);
        for (std::size_t j = 0; j < rows.cols(); ++j) sums[j] += row[j];
    }
    return sums;
}

} // namespace

UserProfile mum(const std::string& user_id, const Matrix& user_rows) {
    if (user_rows.rows() == 0) throw NoTweets(user_id);
    std::vector<double> sums = column_sums(user_rows);
    double total = 0.0;
    for (const double s : sums) total += s;
    const double expected = static_cast<double>(user_rows.rows());
    if (std::abs(total - expected) >= 1e-6) {
        throw NumericError("responsibility rows for user " + user_id +
                           " sum to " + format_double(total) + ", expected " +
                           format_double(expected));
    }
    UserProfile profile;
    profile.user_id = user_id;
    profile.kind = ProfileKind::Mum;
    profile.tweet_count = user_rows.rows();
    profile.values.reserve(sums.size());
    for (const double s : sums) profile.values.push_back(s / total * 100.0);
    return profile;
}

UserProfile baseline_m(const std::string& user_id, const Matrix& probability_rows) {
    if (probability_rows.rows() == 0) throw NoTweets(user_id);
    std::vector<double> sums = column_sums(probability_rows);
    UserProfile profile;
    profile.user_id = user_id;
    profile.kind = ProfileKind::BaselineM;
    profile.tweet_count = probability_rows.rows();
    profile.values.reserve(sums.size());
    for (const double s : sums) {
        profile.values.push_back(s / static_cast<double>(probability_rows.rows()));
    }
    return profile;
}

std::vector<UserProfile> build_profiles(const Matrix& rows,
                                        const std::vector<std::string>& row_user_ids,
                                        ProfileKind kind) {
    if (row_user_ids.size() != rows.rows()) {
        throw DataError("user id column does not cover the rows");
    }
    std::map<std::string, std::vector<std::size_t>> by_user;
    for (std::size_t i = 0; i < row_user_ids.size(); ++i) {
        by_user[row_user_ids[i]].push_back(i);
    }
    std::vector<UserProfile> profiles;
    profiles.reserve(by_user.size());
    for (const auto& [user_id, indices] : by_user) {
        Matrix sub(indices.size(), rows.cols());
        for (std::size_t i = 0; i < indices.size(); ++i) {
            const auto src = rows.row(indices[i]);
            std::copy(src.begin(), src.end(), sub.row(i).begin());
        }
        profiles.push_back(kind == ProfileKind::Mum ? mum(user_id, sub)
                                                    : baseline_m(user_id, sub));
    }
    return profiles;
}

void write_profiles_jsonl(const std::filesystem::path& path,
                          const std::vector<UserProfile>& profiles) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open file for writing: " + path.string());
    for (const auto& p : profiles) {
        json j;
        j["user_id"] = p.user_id;
        j["kind"] = p.kind == ProfileKind::Mum ? "mum" : "baseline_m";
        j["values"] = p.values;
        j["tweet_count"] = p.tweet_count;
        out << j.dump() << '\n';
    }
    if (!out) throw DataError("write failed: " + path.string());
}

std::vector<UserProfile> read_profiles_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open profiles file: " + path.string());
    std::vector<UserProfile> profiles;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError("bad profiles line " + std::to_string(line_no) + ": " + e.what());
        }
        UserProfile p;
        p.user_id = j.at("user_id").get<std::string>();
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "mum") {
            p.kind = ProfileKind::Mum;
        } else if (kind == "baseline_m") {
            p.kind = ProfileKind::BaselineM;
        } else {
            throw DataError("unknown profile kind: " + kind);
        }
        p.values = j.at("values").get<std::vector<double>>();
        p.tweet_count = j.at("tweet_count").get<std::size_t>();
        profiles.push_back(std::move(p));
    }
    return profiles;
}

} // namespace mum::profiles
