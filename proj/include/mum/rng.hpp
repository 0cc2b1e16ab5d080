#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>

#include "mum/errors.hpp"

namespace mum {

// Seedable, portable random source: mt19937_64 (a standardized algorithm)
// with all floating-point and bounded-integer draws built by hand.
// std::*_distribution is not required to produce identical streams across
// standard libraries, so nothing here goes through it.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t raw() { return gen_(); }

    // [0, 1) with 53-bit resolution
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // unbiased integer in [0, n)
    std::size_t below(std::size_t n) {
        const std::uint64_t bound = n;
        const std::uint64_t threshold = (-bound) % bound;  // (2^64 - n) % n
        std::uint64_t x = gen_();
        while (x < threshold) x = gen_();
        return static_cast<std::size_t>(x % bound);
    }

    // standard normal via Box-Muller, one cached value
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

    // Exp(1)
    double exponential() { return -std::log1p(-uniform()); }

    // index drawn with probability proportional to w[i]; weights must be
    // non-negative with a positive finite total
    std::size_t weighted(std::span<const double> w) {
        double total = 0.0;
        for (double v : w) total += v;
        if (!(total > 0.0) || !std::isfinite(total)) {
            throw NumericError("weighted draw over non-positive total weight");
        }
        const double t = uniform() * total;
        double cum = 0.0;
        std::size_t last_positive = w.size();
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (w[i] > 0.0) last_positive = i;
            cum += w[i];
            if (t < cum) return i;
        }
        return last_positive;  // rounding pushed t past the final cumulative sum
    }

private:
    std::mt19937_64 gen_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

} // namespace mum
