#ifndef TSF_TRAIN_HPP
#define TSF_TRAIN_HPP

#include <cstdint>
#include <functional>
#include <vector>

#include "tsf/data.hpp"
#include "tsf/model.hpp"
#include "tsf/tensor.hpp"

namespace tsf {

/** Mean over all B*T*C entries of (pred - target)^2. */
double mse_loss(const SeriesTensor& pred, const SeriesTensor& target);
/** Mean absolute difference over all entries. */
double mae_metric(const SeriesTensor& pred, const SeriesTensor& target);

/** Flat per-parameter gradients, laid out exactly like the model's ParamTable. */
struct Gradients {
    std::vector<double> flat;
};

/**
 * dLoss/dtheta for every learnable parameter of the model under MSE, computed
 * analytically. Gradients flow through the RevIN statistics, both heads, and
 * the mixture gate softmax when the gate is trainable. Throws a divergence
 * error naming the batch when the loss is not finite.
 */
struct BackwardResult {
    double loss;
    Gradients grads;
};
BackwardResult backward(ForecastModel& model, const SeriesTensor& batch_x,
                        const SeriesTensor& batch_y, int batch_index = -1);

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long step_count = 0;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

AdamState make_adam_state(std::size_t n_params, double lr);

/** One bias-corrected Adam update, in place over the parameter table. */
void adam_step(ParamTable& params, const Gradients& grads, AdamState& state);

struct TrainConfig {
    double lr = 1e-4;
    int batch_size = 32;
    int max_epochs = 10;
    int patience = 3;
    std::uint64_t seed = 0;
};

struct EpochStats {
    int epoch;
    double train_mse;
    double val_mse;
};

struct TrainResult {
    std::vector<EpochStats> history;
    int best_epoch = -1;
    double best_val_mse = 0.0;
    double train_ms_per_batch = 0.0;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/**
 * Epoch loop: reshuffle training windows with the seeded generator, take one
 * Adam step per batch, score validation MSE after each epoch, and keep the
 * parameters of the best validation epoch. Stops early after `patience`
 * epochs without improvement. With max_epochs = 0 the model is untouched.
 */
TrainResult train(ForecastModel& model, const DatasetSplit& train_split,
                  const DatasetSplit& val_split, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

struct Metrics {
    double mse = 0.0;
    double mae = 0.0;
};

/** Batched forward over a split; reduction order is fixed for determinism. */
Metrics evaluate_split(const ForecastModel& model, const DatasetSplit& split, int batch_size);

/** Copy windows [first, first+count) of a split into one contiguous batch. */
SeriesTensor slice_windows(const SeriesTensor& t, int first, int count);

}  // namespace tsf

#endif  // TSF_TRAIN_HPP
