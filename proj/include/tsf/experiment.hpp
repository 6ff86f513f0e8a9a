#ifndef TSF_EXPERIMENT_HPP
#define TSF_EXPERIMENT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "tsf/data.hpp"
#include "tsf/model.hpp"
#include "tsf/train.hpp"

namespace tsf {

inline constexpr int kReportSchemaVersion = 1;

/** Where the series comes from: a CSV file or the seeded synthetic generator. */
struct DatasetConfig {
    std::string path;
    bool has_date_column = true;
    bool synthetic = false;
    SyntheticSpec synthetic_spec;
    bool standardize = false;  // per-channel, statistics fitted on the train segment
};

struct ExperimentConfig {
    DatasetConfig dataset;
    DecompConfig decomp;
    BackboneKind model = BackboneKind::kMlp;
    int seq_len = 96;
    int horizon = 96;
    SplitRatios ratios;
    TrainConfig train;
    int repeats = 3;
    int trend_hidden = 512;
    int rmm_hidden = 512;
    int rmsm_hidden1 = 64;
    int rmsm_hidden2 = 128;
    std::string out_path;         // report JSON; empty writes nothing
    std::string save_model_path;  // checkpoint of the last repeat; empty skips
    bool verbose = false;         // one JSON line per epoch on stderr
};

/** Load or synthesize the configured dataset, standardizing when asked. */
RawDataset materialize_dataset(const DatasetConfig& cfg, double train_fraction);

ModelConfig to_model_config(const ExperimentConfig& cfg, int channels);

/**
 * Run `repeats` seeded trainings (seed, seed+1, ...), evaluate each on the
 * test split and return the report. Repeat metrics are averaged; the report
 * echoes the full configuration so a run can be reproduced from it.
 */
nlohmann::json run_train_experiment(const ExperimentConfig& cfg);

/** Score a saved checkpoint on a dataset's test split without training. */
nlohmann::json run_evaluate(const std::string& checkpoint_path, const DatasetConfig& dataset,
                            SplitRatios ratios, int batch_size);

/** Dump per-channel trend/seasonal columns of a whole file to CSV. */
void run_decompose(const std::string& input_csv, bool has_date_column,
                   const DecompositionMethod& method, const std::string& output_csv);

struct BenchConfig {
    BackboneKind model = BackboneKind::kMlp;
    DecompConfig decomp;
    std::vector<int> seq_lens{96};
    int horizon = 720;
    int batch_size = 32;
    int channels = 7;
    int iters = 10;
    int warmup = 2;
    bool with_backward = false;
    std::uint64_t seed = 0;
};

/** Wall-clock per-batch timings (mean/stddev over `iters` runs after warmup). */
nlohmann::json run_bench(const BenchConfig& cfg);

/** Write via a temp file + rename so failures never leave partial reports. */
void write_json_atomically(const nlohmann::json& j, const std::string& path);

nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg);

}  // namespace tsf

#endif  // TSF_EXPERIMENT_HPP
