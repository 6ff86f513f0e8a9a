#include "tsf/decompose.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "tsf/fft.hpp"

namespace tsf {

namespace {

void validate_kernel(int kernel, int time_len) {
    if (kernel < 1 || kernel % 2 == 0) {
        throw std::invalid_argument("moving average kernel must be an odd positive integer, got " +
                                    std::to_string(kernel));
    }
    if (kernel > 2 * time_len - 1) {
        throw std::invalid_argument("moving average kernel " + std::to_string(kernel) +
                                    " too large for series length " + std::to_string(time_len) +
                                    " (max " + std::to_string(2 * time_len - 1) + ")");
    }
}

// Gathers the (b, :, c) series out of the channel-fastest layout.
void extract_series(const SeriesTensor& x, int b, int c, std::vector<double>& out) {
    out.resize(x.time);
    for (int t = 0; t < x.time; ++t) {
        out[t] = x.at(b, t, c);
    }
}

}  // namespace

void moving_average_trend(std::span<const double> series, int kernel, std::span<double> out) {
    const int n = static_cast<int>(series.size());
    const int half = (kernel - 1) / 2;
    // Prefix sums over the endpoint-replicated extension of the series.
    std::vector<double> prefix(static_cast<std::size_t>(n) + 2 * half + 1, 0.0);
    for (int i = 0; i < n + 2 * half; ++i) {
        const int src = std::clamp(i - half, 0, n - 1);
        prefix[i + 1] = prefix[i] + series[src];
    }
    const double inv = 1.0 / kernel;
    for (int t = 0; t < n; ++t) {
        out[t] = (prefix[t + kernel] - prefix[t]) * inv;
    }
}

Decomposition moving_average_decompose(const SeriesTensor& x, int kernel) {
    validate_kernel(kernel, x.time);
    Decomposition d{SeriesTensor(x.batch, x.time, x.channels),
                    SeriesTensor(x.batch, x.time, x.channels)};
    std::vector<double> series, trend(x.time);
    for (int b = 0; b < x.batch; ++b) {
        for (int c = 0; c < x.channels; ++c) {
            extract_series(x, b, c, series);
            moving_average_trend(series, kernel, trend);
            for (int t = 0; t < x.time; ++t) {
                d.trend.at(b, t, c) = trend[t];
                d.seasonal.at(b, t, c) = series[t] - trend[t];
            }
        }
    }
    return d;
}

std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.size());
    if (logits.empty()) {
        return out;
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (double& v : out) {
        v /= sum;
    }
    return out;
}

namespace {

std::vector<double> gate_logits(std::span<const double> series, const DenseMatrix& gate_w,
                                const std::vector<double>& gate_b, int n_experts) {
    std::vector<double> logits(n_experts, 0.0);
    if (!gate_b.empty()) {
        if (static_cast<int>(gate_b.size()) != n_experts) {
            throw std::invalid_argument("moe gate bias length " + std::to_string(gate_b.size()) +
                                        " does not match expert count " +
                                        std::to_string(n_experts));
        }
        logits = gate_b;
    }
    if (gate_w.rows != 0 || gate_w.cols != 0) {
        if (gate_w.rows != static_cast<int>(series.size()) || gate_w.cols != n_experts) {
            throw std::invalid_argument(
                "moe gate weights " + gate_w.shape_str() + " do not match series length " +
                std::to_string(series.size()) + " x expert count " + std::to_string(n_experts));
        }
        for (int l = 0; l < gate_w.rows; ++l) {
            const double s = series[l];
            for (int e = 0; e < n_experts; ++e) {
                logits[e] += s * gate_w.at(l, e);
            }
        }
    }
    return logits;
}

}  // namespace

SeriesTensor moe_mixing_weights(const SeriesTensor& x, const std::vector<int>& kernels,
                                const DenseMatrix& gate_w, const std::vector<double>& gate_b) {
    const int n_experts = static_cast<int>(kernels.size());
    SeriesTensor weights(x.batch, n_experts, x.channels);
    std::vector<double> series;
    for (int b = 0; b < x.batch; ++b) {
        for (int c = 0; c < x.channels; ++c) {
            extract_series(x, b, c, series);
            const std::vector<double> w = softmax(gate_logits(series, gate_w, gate_b, n_experts));
            for (int e = 0; e < n_experts; ++e) {
                weights.at(b, e, c) = w[e];
            }
        }
    }
    return weights;
}

Decomposition moe_decompose(const SeriesTensor& x, const std::vector<int>& kernels,
                            const DenseMatrix& gate_w, const std::vector<double>& gate_b) {
    if (kernels.empty()) {
        throw std::invalid_argument("moe_decompose: kernel list must not be empty");
    }
    for (int k : kernels) {
        validate_kernel(k, x.time);
    }
    const int n_experts = static_cast<int>(kernels.size());

    Decomposition d{SeriesTensor(x.batch, x.time, x.channels),
                    SeriesTensor(x.batch, x.time, x.channels)};
    std::vector<double> series, expert_trend(x.time), mixed(x.time);
    for (int b = 0; b < x.batch; ++b) {
        for (int c = 0; c < x.channels; ++c) {
            extract_series(x, b, c, series);
            const std::vector<double> w = softmax(gate_logits(series, gate_w, gate_b, n_experts));
            std::fill(mixed.begin(), mixed.end(), 0.0);
            for (int e = 0; e < n_experts; ++e) {
                moving_average_trend(series, kernels[e], expert_trend);
                for (int t = 0; t < x.time; ++t) {
                    mixed[t] += w[e] * expert_trend[t];
                }
            }
            for (int t = 0; t < x.time; ++t) {
                d.trend.at(b, t, c) = mixed[t];
                d.seasonal.at(b, t, c) = series[t] - mixed[t];
            }
        }
    }
    return d;
}

std::vector<int> top_k_indices(std::span<const double> values, int k) {
    std::vector<int> idx(values.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int a, int b) { return values[a] > values[b]; });
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

Decomposition frequency_decompose(const SeriesTensor& x, int top_k) {
    const int max_k = x.time / 2;
    if (top_k < 1 || top_k > max_k) {
        throw std::invalid_argument("frequency_decompose: top_k " + std::to_string(top_k) +
                                    " out of range [1, " + std::to_string(max_k) +
                                    "] for series length " + std::to_string(x.time));
    }
    Decomposition d{SeriesTensor(x.batch, x.time, x.channels),
                    SeriesTensor(x.batch, x.time, x.channels)};
    std::vector<double> series;
    std::vector<double> amps(max_k);
    for (int b = 0; b < x.batch; ++b) {
        for (int c = 0; c < x.channels; ++c) {
            extract_series(x, b, c, series);
            ComplexSpectrum z = rfft(series);
            // Rank AC bins only; amps[i] holds bin i+1.
            for (int m = 1; m <= max_k; ++m) {
                amps[m - 1] = z.amplitude(m);
            }
            const std::vector<int> keep = top_k_indices(amps, top_k);

            ComplexSpectrum masked;
            masked.original_length = z.original_length;
            masked.bins.assign(z.bins.size(), {0.0, 0.0});
            for (int i : keep) {
                masked.bins[i + 1] = z.bins[i + 1];
            }
            const std::vector<double> seasonal = irfft(masked, x.time);
            for (int t = 0; t < x.time; ++t) {
                d.seasonal.at(b, t, c) = seasonal[t];
                d.trend.at(b, t, c) = series[t] - seasonal[t];
            }
        }
    }
    return d;
}

Decomposition decompose(const SeriesTensor& x, const DecompositionMethod& method) {
    return std::visit(
        [&x](const auto& m) -> Decomposition {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, MovingAverage>) {
                return moving_average_decompose(x, m.kernel);
            } else if constexpr (std::is_same_v<T, MixtureOfExperts>) {
                return moe_decompose(x, m.kernels, m.gate_w, m.gate_b);
            } else {
                return frequency_decompose(x, m.top_k);
            }
        },
        method);
}

}  // namespace tsf
