#include "tsf/revin.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace tsf {

namespace {

void check_affine(const RevinAffine& affine, int channels) {
    if (static_cast<int>(affine.gamma.size()) != channels ||
        static_cast<int>(affine.beta.size()) != channels) {
        throw std::invalid_argument("revin affine sized for " +
                                    std::to_string(affine.gamma.size()) + "/" +
                                    std::to_string(affine.beta.size()) + " channels, tensor has " +
                                    std::to_string(channels));
    }
}

}  // namespace

std::pair<SeriesTensor, RevinState> revin_normalize(const SeriesTensor& x,
                                                    const RevinAffine& affine, double epsilon) {
    if (epsilon <= 0.0) {
        throw std::invalid_argument("revin epsilon must be positive");
    }
    if (x.time < 1) {
        throw std::invalid_argument("revin_normalize: empty time axis");
    }
    check_affine(affine, x.channels);

    SeriesTensor out(x.batch, x.time, x.channels);
    RevinState state;
    state.batch = x.batch;
    state.channels = x.channels;
    state.epsilon = epsilon;
    state.mean.assign(static_cast<std::size_t>(x.batch) * x.channels, 0.0);
    state.std.assign(static_cast<std::size_t>(x.batch) * x.channels, 0.0);

    const double inv_t = 1.0 / x.time;
    for (int b = 0; b < x.batch; ++b) {
        for (int c = 0; c < x.channels; ++c) {
            double mu = 0.0;
            for (int t = 0; t < x.time; ++t) {
                mu += x.at(b, t, c);
            }
            mu *= inv_t;
            double var = 0.0;
            for (int t = 0; t < x.time; ++t) {
                const double d = x.at(b, t, c) - mu;
                var += d * d;
            }
            var *= inv_t;
            const double sigma = std::sqrt(var + epsilon);

            state.mean[static_cast<std::size_t>(b) * x.channels + c] = mu;
            state.std[static_cast<std::size_t>(b) * x.channels + c] = sigma;

            const double g = affine.gamma[c], be = affine.beta[c];
            for (int t = 0; t < x.time; ++t) {
                out.at(b, t, c) = g * (x.at(b, t, c) - mu) / sigma + be;
            }
        }
    }
    return {std::move(out), std::move(state)};
}

SeriesTensor revin_denormalize(const SeriesTensor& y, const RevinState& state,
                               const RevinAffine& affine) {
    if (y.batch != state.batch || y.channels != state.channels) {
        throw std::invalid_argument("revin_denormalize: tensor " + y.shape_str() +
                                    " does not match state captured for (" +
                                    std::to_string(state.batch) + ",*," +
                                    std::to_string(state.channels) + ")");
    }
    check_affine(affine, y.channels);
    for (int c = 0; c < y.channels; ++c) {
        if (affine.gamma[c] == 0.0) {
            throw std::invalid_argument("revin_denormalize: gamma[" + std::to_string(c) +
                                        "] is zero, affine is not invertible");
        }
    }

    SeriesTensor out(y.batch, y.time, y.channels);
    for (int b = 0; b < y.batch; ++b) {
        for (int c = 0; c < y.channels; ++c) {
            const double mu = state.mean_at(b, c);
            const double sigma = state.std_at(b, c);
            const double g = affine.gamma[c], be = affine.beta[c];
            for (int t = 0; t < y.time; ++t) {
                out.at(b, t, c) = (y.at(b, t, c) - be) / g * sigma + mu;
            }
        }
    }
    return out;
}

}  // namespace tsf
