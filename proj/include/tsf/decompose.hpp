#ifndef TSF_DECOMPOSE_HPP
#define TSF_DECOMPOSE_HPP

#include <span>
#include <variant>
#include <vector>

#include "tsf/tensor.hpp"

namespace tsf {

/**
 * Trend/seasonal split of an input window. Both components share the input's
 * shape and always sum back to it: each method defines one component as the
 * input minus the other.
 */
struct Decomposition {
    SeriesTensor trend;
    SeriesTensor seasonal;
};

/** Centered moving average with endpoint-replicating padding. */
struct MovingAverage {
    int kernel = 25;
};

/**
 * Softmax-gated mixture of moving-average trends at several kernel scales.
 * The gate maps each per-channel input series (length L) to one logit per
 * expert. Empty gate_w/gate_b stand for all-zero parameters (uniform mixing).
 */
struct MixtureOfExperts {
    std::vector<int> kernels{5, 9, 13, 25, 49};
    DenseMatrix gate_w;          // L x n_experts
    std::vector<double> gate_b;  // n_experts
};

/**
 * Seasonal = inverse transform of the top-k amplitude bins, trend = remainder.
 * The DC bin is excluded from selection and always masked out, so the series
 * mean stays in the trend.
 */
struct Frequency {
    int top_k = 5;
};

using DecompositionMethod = std::variant<MovingAverage, MixtureOfExperts, Frequency>;

Decomposition moving_average_decompose(const SeriesTensor& x, int kernel);
Decomposition moe_decompose(const SeriesTensor& x, const std::vector<int>& kernels,
                            const DenseMatrix& gate_w, const std::vector<double>& gate_b);
Decomposition frequency_decompose(const SeriesTensor& x, int top_k);

/** Dispatch on the configured method. */
Decomposition decompose(const SeriesTensor& x, const DecompositionMethod& method);

// --- building blocks, exposed for training and tests ---

/** Writes the moving-average trend of one series into `out` (same length). */
void moving_average_trend(std::span<const double> series, int kernel, std::span<double> out);

/** Numerically stable softmax. */
std::vector<double> softmax(std::span<const double> logits);

/**
 * Indices of the k largest values, ties broken toward the lower index.
 * Returned indices are sorted ascending.
 */
std::vector<int> top_k_indices(std::span<const double> values, int k);

/**
 * Per-(batch, channel) expert weights of the mixture gate, returned with the
 * expert index on the time axis: shape (B, n_experts, C).
 */
SeriesTensor moe_mixing_weights(const SeriesTensor& x, const std::vector<int>& kernels,
                                const DenseMatrix& gate_w, const std::vector<double>& gate_b);

}  // namespace tsf

#endif  // TSF_DECOMPOSE_HPP
