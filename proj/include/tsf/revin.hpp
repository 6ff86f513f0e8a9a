#ifndef TSF_REVIN_HPP
#define TSF_REVIN_HPP

#include <utility>
#include <vector>

#include "tsf/tensor.hpp"

namespace tsf {

/** Learnable per-channel affine applied after standardization. */
struct RevinAffine {
    std::vector<double> gamma;  // init 1
    std::vector<double> beta;   // init 0

    static RevinAffine identity(int channels) {
        return {std::vector<double>(channels, 1.0), std::vector<double>(channels, 0.0)};
    }
};

/**
 * Per-instance, per-channel statistics captured at normalization time.
 * mean/std are indexed b * channels + c; std entries are >= sqrt(epsilon).
 */
struct RevinState {
    std::vector<double> mean;
    std::vector<double> std;
    int batch = 0;
    int channels = 0;
    double epsilon = 0.0;

    double mean_at(int b, int c) const { return mean[static_cast<std::size_t>(b) * channels + c]; }
    double std_at(int b, int c) const { return std[static_cast<std::size_t>(b) * channels + c]; }
};

inline constexpr double kRevinEpsilon = 1e-5;

/**
 * Standardize each (batch, channel) series over its time axis using the
 * population variance, then apply the affine: out = gamma*(x-mu)/sigma + beta
 * with sigma = sqrt(var + epsilon). Returns the output and the captured state.
 */
std::pair<SeriesTensor, RevinState> revin_normalize(const SeriesTensor& x, const RevinAffine& affine,
                                                    double epsilon = kRevinEpsilon);

/**
 * Invert the affine and restore the saved statistics:
 * out = ((y - beta)/gamma)*sigma + mu. The time axis of y may differ from the
 * one the state was captured at. Throws on a zero gamma entry.
 */
SeriesTensor revin_denormalize(const SeriesTensor& y, const RevinState& state,
                               const RevinAffine& affine);

}  // namespace tsf

#endif  // TSF_REVIN_HPP
