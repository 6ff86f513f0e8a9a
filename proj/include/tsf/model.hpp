#ifndef TSF_MODEL_HPP
#define TSF_MODEL_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tsf/decompose.hpp"
#include "tsf/revin.hpp"
#include "tsf/tensor.hpp"

namespace tsf {

/**
 * Trend path: normalize per instance, run a three-layer MLP along the time
 * axis (weights shared across channels), denormalize with the saved state.
 */
struct TrendHead {
    RevinAffine affine;
    DenseMatrix w1;  // L x hidden
    std::vector<double> b1;
    DenseMatrix w2;  // hidden x hidden
    std::vector<double> b2;
    DenseMatrix w3;  // hidden x H
    std::vector<double> b3;
};

/** Plain three-layer MLP seasonal head (linear output layer). */
struct SeasonalHeadRMM {
    DenseMatrix w1;  // L x hidden
    std::vector<double> b1;
    DenseMatrix w2;  // hidden x hidden
    std::vector<double> b2;
    DenseMatrix w3;  // hidden x H
    std::vector<double> b3;
};

/**
 * Shift-forecasting seasonal head: the first hidden layer's output is
 * concatenated with the raw (undecomposed) input before the second layer,
 * so the head can track distribution shift between input and output windows.
 */
struct SeasonalHeadRMSM {
    DenseMatrix w1;  // L x h1
    std::vector<double> b1;
    DenseMatrix w2;  // (h1 + L) x h2
    std::vector<double> b2;
    DenseMatrix w3;  // h2 x H
    std::vector<double> b3;
};

/** One affine map per channel along the time axis. */
struct LinearBackbone {
    DenseMatrix w;  // L x H
    std::vector<double> b;
};

// The seasonal path deliberately carries no normalization state of any kind;
// none of these alternatives contains a RevinState or RevinAffine.
using BackboneSpec = std::variant<LinearBackbone, SeasonalHeadRMM, SeasonalHeadRMSM>;

enum class BackboneKind { kLinear, kMlp, kShiftMlp };

/** Decomposition choice plus its parameters, serializable to config/checkpoint. */
struct DecompConfig {
    enum class Kind { kMovingAverage, kMixtureOfExperts, kFrequency };
    Kind kind = Kind::kMovingAverage;
    int kernel = 25;                          // moving average
    std::vector<int> kernels{5, 9, 13, 25, 49};  // mixture of experts
    int top_k = 5;                            // frequency
    bool gate_trainable = true;               // mixture gate joins the parameter set
};

struct ModelConfig {
    int seq_len = 96;
    int horizon = 96;
    int channels = 1;
    BackboneKind backbone = BackboneKind::kMlp;
    DecompConfig decomp;
    double revin_epsilon = kRevinEpsilon;
    int trend_hidden = 512;
    int rmm_hidden = 512;
    int rmsm_hidden1 = 64;
    int rmsm_hidden2 = 128;
};

struct ForecastModel {
    ModelConfig config;
    DecompositionMethod decomposition;  // gate parameters live here when trainable
    TrendHead trend;
    BackboneSpec backbone;
};

/**
 * Build a model with weights drawn uniformly in +-sqrt(1/fan_in) from the
 * seeded generator; biases start at zero, gamma at 1, beta at 0.
 */
ForecastModel make_forecast_model(const ModelConfig& config, std::uint64_t seed);

/** Construct the runtime decomposition method for a config (gate zero-filled). */
DecompositionMethod build_decomposition(const DecompConfig& decomp, int seq_len);

// --- forward passes (pure; weights shared across channels) ---

SeriesTensor trend_head_forward(const SeriesTensor& xt, const TrendHead& head,
                                double epsilon = kRevinEpsilon);
SeriesTensor rmm_seasonal_forward(const SeriesTensor& xs, const SeasonalHeadRMM& head);
SeriesTensor rmsm_seasonal_forward(const SeriesTensor& xs, const SeriesTensor& x_full,
                                   const SeasonalHeadRMSM& head);
SeriesTensor linear_backbone_forward(const SeriesTensor& xs, const LinearBackbone& head);
SeriesTensor backbone_forward(const SeriesTensor& xs, const SeriesTensor& x_full,
                              const BackboneSpec& spec);

/** Full pipeline: decompose, forecast both components, sum (Y = Y_trend + Y_seasonal). */
SeriesTensor model_forward(const SeriesTensor& x, const ForecastModel& model);

// --- layout helpers shared by forward and backward passes ---

/** Stack every (batch, channel) time series as a row: (B*C) x T, row = b*C + c. */
DenseMatrix channel_rows(const SeriesTensor& x);
/** Inverse of channel_rows. */
SeriesTensor rows_to_tensor(const DenseMatrix& rows, int batch, int channels);

// --- flat-addressable parameter set ---

struct ParamSlot {
    std::string name;
    double* data;
    int rows;
    int cols;
    std::size_t offset;  // position of this slot in the flattened vector
    std::size_t size;
};

/**
 * Stable, named view over every learnable scalar of a model (trend head,
 * backbone, RevIN affine, mixture gate when trainable). Slot order is fixed,
 * so flat indices are portable across optimizer state, gradients and
 * checkpoints. The table holds pointers into the model: the model must stay
 * alive and unmoved while a table is in use.
 */
class ParamTable {
public:
    explicit ParamTable(ForecastModel& model);

    std::size_t total() const { return total_; }
    const std::vector<ParamSlot>& slots() const { return slots_; }
    const ParamSlot* find(std::string_view name) const;

    double get(std::size_t flat_index) const;
    void set(std::size_t flat_index, double value);

    std::vector<double> to_flat() const;
    void from_flat(const std::vector<double>& flat);

private:
    std::vector<ParamSlot> slots_;
    std::size_t total_ = 0;
};

// --- checkpointing (bit-exact round trip) ---

void save_checkpoint(ForecastModel& model, const std::string& path);
ForecastModel load_checkpoint(const std::string& path);

std::string backbone_kind_name(BackboneKind kind);
BackboneKind backbone_kind_from_name(const std::string& name);
std::string decomp_kind_name(DecompConfig::Kind kind);
DecompConfig::Kind decomp_kind_from_name(const std::string& name);

}  // namespace tsf

#endif  // TSF_MODEL_HPP
