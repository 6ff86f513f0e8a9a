#ifndef TSF_DATA_HPP
#define TSF_DATA_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "tsf/tensor.hpp"

namespace tsf {

/** A fully parsed multivariate series: N rows x C channels, no missing entries. */
struct RawDataset {
    std::vector<std::string> timestamps;  // empty when the file has no date column
    std::vector<double> values;           // row-major N x C
    int rows = 0;
    int channels = 0;
    std::vector<std::string> channel_names;

    double value(int r, int c) const { return values[static_cast<std::size_t>(r) * channels + c]; }
    double& value(int r, int c) { return values[static_cast<std::size_t>(r) * channels + c]; }
};

/**
 * Load a comma-separated file with a header row. When has_date_column is set,
 * the first column is carried as timestamps and the rest parsed as channels.
 * Unparseable or non-finite cells and ragged rows raise errors naming the
 * offending line and column.
 */
RawDataset load_csv(const std::string& path, bool has_date_column);

/** Write a dataset back out; values are printed so they re-parse exactly. */
void save_csv(const RawDataset& data, const std::string& path);

/** Windowed supervised pairs for one chronological segment. */
struct DatasetSplit {
    enum class Role { kTrain, kVal, kTest };
    Role role = Role::kTrain;
    SeriesTensor inputs;   // (n_windows, L, C)
    SeriesTensor targets;  // (n_windows, H, C)

    int window_count() const { return inputs.batch; }
};

struct SplitRatios {
    double train = 0.7;
    double val = 0.2;
    double test = 0.1;
};

/**
 * Partition rows chronologically at floor(train*N) and floor((train+val)*N),
 * then build stride-1 sliding windows strictly inside each segment: input rows
 * [i, i+L), target rows [i+L, i+L+H). Throws when a segment cannot fit one
 * window, stating the required minimum.
 */
std::array<DatasetSplit, 3> chronological_split(const RawDataset& raw, SplitRatios ratios, int L,
                                                int H);

/** Seeded synthetic signal: linear trend + sinusoids with per-channel phases + noise. */
struct SyntheticSpec {
    struct Sinusoid {
        double period;
        double amplitude;
    };
    int n = 5000;
    int channels = 3;
    double trend_slope = 0.001;
    std::vector<Sinusoid> sinusoids{{24.0, 1.0}, {96.0, 0.5}};
    double noise_sigma = 0.1;
    std::uint64_t seed = 0;
};

RawDataset generate_synthetic(const SyntheticSpec& spec);

/** Per-channel statistics used for optional standardization. */
struct ChannelScaler {
    std::vector<double> mean;
    std::vector<double> std;
};

/**
 * Standardize every channel in place using statistics fitted on the leading
 * train_fraction of rows only, so no information leaks backward from the
 * validation or test segments.
 */
ChannelScaler standardize_in_place(RawDataset& data, double train_fraction);

}  // namespace tsf

#endif  // TSF_DATA_HPP
