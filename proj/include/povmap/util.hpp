#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace povmap {

/// Malformed or inconsistent user input (CSV schema, config, registry mismatches).
struct input_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Numerical failure (non-finite targets, root bracketing failure, divergence storms).
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr const char* kVersion = "0.1.0";

// -- hashing / seeding --------------------------------------------------

uint64_t fnv1a64(std::string_view s);
uint64_t splitmix64(uint64_t& state);

/// Derive an independent RNG seed from a base seed, a stream tag and an index.
uint64_t derive_seed(uint64_t seed, std::string_view tag, uint64_t index = 0);

// -- formatting ---------------------------------------------------------

/// Shortest round-trip decimal representation (deterministic across runs).
std::string format_double(double x);
std::string hex_u64(uint64_t v);

// -- numerics -----------------------------------------------------------

double logsumexp(std::span<const double> x);

/// Linear interpolation between order statistics (type-7 convention).
/// `sorted` must be ascending; p in [0,1].
double quantile_type7(std::span<const double> sorted, double p);

double mean(std::span<const double> x);
double sample_variance(std::span<const double> x);  // n-1 denominator
double sample_sd(std::span<const double> x);

double digamma(double x);

/// Inverse standard normal CDF (Acklam's rational approximation, refined
/// with one Halley step; ~1e-15 relative accuracy).
double inv_normal_cdf(double p);

double sigmoid_stable(double x);
double log_sigmoid(double x);

}  // namespace povmap
