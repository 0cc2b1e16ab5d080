#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mum/gmm.hpp"
#include "mum/matrix.hpp"

namespace mum::profiles {

enum class ProfileKind { Mum, BaselineM };

struct UserProfile {
    std::string user_id;
    ProfileKind kind = ProfileKind::Mum;
    std::vector<double> values;       // Mum: sums to 100; BaselineM: sums to 1
    std::size_t tweet_count = 0;
};

// Topic percentages from the user's responsibility rows: column sums scaled
// by 100 over their total. The total must equal the row count (each row is a
// distribution); a drift beyond 1e-6 signals an upstream normalization bug.
UserProfile mum(const std::string& user_id, const Matrix& user_rows);

// Column-wise mean of the user's class-probability rows.
UserProfile baseline_m(const std::string& user_id, const Matrix& probability_rows);

// One profile per user appearing in row_user_ids (which runs parallel to the
// responsibility rows). Users keyed in ascending order.
std::vector<UserProfile> build_profiles(const Matrix& rows,
                                        const std::vector<std::string>& row_user_ids,
                                        ProfileKind kind);

// JSONL: {"user_id","kind","values","tweet_count"}
void write_profiles_jsonl(const std::filesystem::path& path,
                          const std::vector<UserProfile>& profiles);
std::vector<UserProfile> read_profiles_jsonl(const std::filesystem::path& path);

} // namespace mum::profiles
