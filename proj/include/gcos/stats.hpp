#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace gcos {

using Rng = std::mt19937_64;

// Linear-interpolation quantile at zero-indexed rank p/100 * (n-1).
// `sorted` must be ascending and nonempty; p in [0, 100].
double quantile(std::span<const double> sorted, double percent);

// Sorts a copy and takes the quantile.
double quantile_unsorted(std::span<const double> values, double percent);

// SplitMix64 finalizer; mixes a master seed with stream tags so that
// independent consumers (shuffle, per-class synthesis, init) never share
// a random stream.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> tags);

double mean(std::span<const double> values);
// Sample standard deviation (denominator n-1); 0 for n < 2.
double sample_stddev(std::span<const double> values);

}  // namespace gcos
