#include "tsf/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>

namespace tsf {

using nlohmann::json;

// ============================================================================
// Dataset / config plumbing
// ============================================================================

RawDataset materialize_dataset(const DatasetConfig& cfg, double train_fraction) {
    RawDataset raw;
    if (cfg.synthetic) {
        raw = generate_synthetic(cfg.synthetic_spec);
    } else {
        if (cfg.path.empty()) {
            throw std::invalid_argument("no dataset: provide a CSV path or a synthetic spec");
        }
        raw = load_csv(cfg.path, cfg.has_date_column);
    }
    if (cfg.standardize) {
        standardize_in_place(raw, train_fraction);
    }
    return raw;
}

ModelConfig to_model_config(const ExperimentConfig& cfg, int channels) {
    ModelConfig mc;
    mc.seq_len = cfg.seq_len;
    mc.horizon = cfg.horizon;
    mc.channels = channels;
    mc.backbone = cfg.model;
    mc.decomp = cfg.decomp;
    mc.trend_hidden = cfg.trend_hidden;
    mc.rmm_hidden = cfg.rmm_hidden;
    mc.rmsm_hidden1 = cfg.rmsm_hidden1;
    mc.rmsm_hidden2 = cfg.rmsm_hidden2;
    return mc;
}

namespace {

json dataset_config_to_json(const DatasetConfig& d) {
    json j{{"standardize", d.standardize}};
    if (d.synthetic) {
        json sins = json::array();
        for (const auto& s : d.synthetic_spec.sinusoids) {
            sins.push_back({{"period", s.period}, {"amplitude", s.amplitude}});
        }
        j["synthetic"] = {{"n", d.synthetic_spec.n},
                          {"channels", d.synthetic_spec.channels},
                          {"trend_slope", d.synthetic_spec.trend_slope},
                          {"sinusoids", sins},
                          {"noise_sigma", d.synthetic_spec.noise_sigma},
                          {"seed", d.synthetic_spec.seed}};
    } else {
        j["path"] = d.path;
        j["has_date_column"] = d.has_date_column;
    }
    return j;
}

json decomp_config_to_json(const DecompConfig& d) {
    return json{{"kind", decomp_kind_name(d.kind)},
                {"kernel", d.kernel},
                {"kernels", d.kernels},
                {"top_k", d.top_k},
                {"gate_trainable", d.gate_trainable}};
}

}  // namespace

json experiment_config_to_json(const ExperimentConfig& cfg) {
    return json{{"dataset", dataset_config_to_json(cfg.dataset)},
                {"decomp", decomp_config_to_json(cfg.decomp)},
                {"model", backbone_kind_name(cfg.model)},
                {"seq_len", cfg.seq_len},
                {"horizon", cfg.horizon},
                {"ratios", {{"train", cfg.ratios.train}, {"val", cfg.ratios.val}, {"test", cfg.ratios.test}}},
                {"train",
                 {{"lr", cfg.train.lr},
                  {"batch_size", cfg.train.batch_size},
                  {"max_epochs", cfg.train.max_epochs},
                  {"patience", cfg.train.patience},
                  {"seed", cfg.train.seed}}},
                {"repeats", cfg.repeats},
                {"hidden",
                 {{"trend", cfg.trend_hidden},
                  {"rmm", cfg.rmm_hidden},
                  {"rmsm1", cfg.rmsm_hidden1},
                  {"rmsm2", cfg.rmsm_hidden2}}}};
}

// ============================================================================
// Train command
// ============================================================================

namespace {

double time_inference_ms_per_batch(const ForecastModel& model, const DatasetSplit& split,
                                   int batch_size) {
    const int n = split.window_count();
    double checksum = 0.0;
    int batches = 0;
    // one untimed pass to warm caches
    {
        const SeriesTensor bx = slice_windows(split.inputs, 0, std::min(batch_size, n));
        checksum += model_forward(bx, model).data[0];
    }
    const auto t0 = std::chrono::steady_clock::now();
    for (int first = 0; first < n; first += batch_size, ++batches) {
        const int b = std::min(batch_size, n - first);
        const SeriesTensor bx = slice_windows(split.inputs, first, b);
        checksum += model_forward(bx, model).data[0];
    }
    const auto t1 = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    if (!std::isfinite(checksum)) {
        throw std::runtime_error("inference produced non-finite values");
    }
    return batches > 0 ? ms / batches : 0.0;
}

}  // namespace

json run_train_experiment(const ExperimentConfig& cfg) {
    if (cfg.repeats < 1) {
        throw std::invalid_argument("repeats must be >= 1");
    }
    const RawDataset raw = materialize_dataset(cfg.dataset, cfg.ratios.train);
    const auto splits = chronological_split(raw, cfg.ratios, cfg.seq_len, cfg.horizon);
    const ModelConfig model_cfg = to_model_config(cfg, raw.channels);

    json report;
    report["schema_version"] = kReportSchemaVersion;
    report["command"] = "train";
    report["config"] = experiment_config_to_json(cfg);
    report["channels"] = raw.channels;

    json repeats = json::array();
    std::vector<std::uint64_t> seeds;
    double mse_sum = 0.0, mae_sum = 0.0, train_ms_sum = 0.0, infer_ms_sum = 0.0;
    for (int r = 0; r < cfg.repeats; ++r) {
        const std::uint64_t seed = cfg.train.seed + static_cast<std::uint64_t>(r);
        seeds.push_back(seed);

        ForecastModel model = make_forecast_model(model_cfg, seed);
        TrainConfig tc = cfg.train;
        tc.seed = seed;

        EpochCallback cb;
        if (cfg.verbose) {
            cb = [r](const EpochStats& e) {
                std::fprintf(stderr, "{\"repeat\":%d,\"epoch\":%d,\"train_mse\":%.17g,\"val_mse\":%.17g}\n",
                             r, e.epoch, e.train_mse, e.val_mse);
            };
        }
        const TrainResult tr = train(model, splits[0], splits[1], tc, cb);
        const Metrics test = evaluate_split(model, splits[2], cfg.train.batch_size);
        const double infer_ms = time_inference_ms_per_batch(model, splits[2], cfg.train.batch_size);

        json history = json::array();
        for (const EpochStats& e : tr.history) {
            history.push_back({{"epoch", e.epoch}, {"train_mse", e.train_mse}, {"val_mse", e.val_mse}});
        }
        repeats.push_back({{"seed", seed},
                           {"test_mse", test.mse},
                           {"test_mae", test.mae},
                           {"best_epoch", tr.best_epoch},
                           {"best_val_mse", tr.best_val_mse},
                           {"history", history},
                           {"train_ms_per_batch", tr.train_ms_per_batch},
                           {"inference_ms_per_batch", infer_ms}});
        mse_sum += test.mse;
        mae_sum += test.mae;
        train_ms_sum += tr.train_ms_per_batch;
        infer_ms_sum += infer_ms;

        if (!cfg.save_model_path.empty() && r == cfg.repeats - 1) {
            save_checkpoint(model, cfg.save_model_path);
            report["checkpoint"] = cfg.save_model_path;
            report["checkpoint_repeat"] = r;
        }
    }

    report["seeds"] = seeds;
    report["repeats"] = repeats;
    report["mean"] = {{"test_mse", mse_sum / cfg.repeats}, {"test_mae", mae_sum / cfg.repeats}};
    report["timing"] = {{"train_ms_per_batch_mean", train_ms_sum / cfg.repeats},
                        {"inference_ms_per_batch_mean", infer_ms_sum / cfg.repeats}};

    if (!cfg.out_path.empty()) {
        write_json_atomically(report, cfg.out_path);
    }
    return report;
}

// ============================================================================
// Evaluate command
// ============================================================================

json run_evaluate(const std::string& checkpoint_path, const DatasetConfig& dataset,
                  SplitRatios ratios, int batch_size) {
    ForecastModel model = load_checkpoint(checkpoint_path);
    const RawDataset raw = materialize_dataset(dataset, ratios.train);
    if (raw.channels != model.config.channels) {
        throw std::invalid_argument("checkpoint expects " +
                                    std::to_string(model.config.channels) +
                                    " channels, dataset has " + std::to_string(raw.channels));
    }
    const auto splits = chronological_split(raw, ratios, model.config.seq_len,
                                            model.config.horizon);
    const Metrics test = evaluate_split(model, splits[2], batch_size);

    return json{{"schema_version", kReportSchemaVersion},
                {"command", "evaluate"},
                {"checkpoint", checkpoint_path},
                {"dataset", dataset_config_to_json(dataset)},
                {"seq_len", model.config.seq_len},
                {"horizon", model.config.horizon},
                {"channels", model.config.channels},
                {"test_mse", test.mse},
                {"test_mae", test.mae}};
}

// ============================================================================
// Decompose command
// ============================================================================

void run_decompose(const std::string& input_csv, bool has_date_column,
                   const DecompositionMethod& method, const std::string& output_csv) {
    const RawDataset raw = load_csv(input_csv, has_date_column);
    if (raw.rows < 2) {
        throw std::invalid_argument("decompose needs at least 2 rows, file has " +
                                    std::to_string(raw.rows));
    }
    SeriesTensor x(1, raw.rows, raw.channels);
    for (int r = 0; r < raw.rows; ++r) {
        for (int c = 0; c < raw.channels; ++c) {
            x.at(0, r, c) = raw.value(r, c);
        }
    }
    const Decomposition d = decompose(x, method);

    RawDataset out;
    out.rows = raw.rows;
    out.channels = 2 * raw.channels;
    out.timestamps = raw.timestamps;
    out.values.resize(static_cast<std::size_t>(out.rows) * out.channels);
    for (int c = 0; c < raw.channels; ++c) {
        out.channel_names.push_back(raw.channel_names[c] + "_trend");
        out.channel_names.push_back(raw.channel_names[c] + "_seasonal");
    }
    for (int r = 0; r < raw.rows; ++r) {
        for (int c = 0; c < raw.channels; ++c) {
            out.value(r, 2 * c) = d.trend.at(0, r, c);
            out.value(r, 2 * c + 1) = d.seasonal.at(0, r, c);
        }
    }
    const std::string tmp = output_csv + ".tmp";
    try {
        save_csv(out, tmp);
        std::filesystem::rename(tmp, output_csv);
    } catch (...) {
        std::error_code ec;
        std::filesystem::remove(tmp, ec);
        throw;
    }
}

// ============================================================================
// Bench command
// ============================================================================

json run_bench(const BenchConfig& cfg) {
    if (cfg.iters < 1) {
        throw std::invalid_argument("bench iters must be >= 1");
    }
    json results = json::array();
    for (int L : cfg.seq_lens) {
        ModelConfig mc;
        mc.seq_len = L;
        mc.horizon = cfg.horizon;
        mc.channels = cfg.channels;
        mc.backbone = cfg.model;
        mc.decomp = cfg.decomp;
        ForecastModel model = make_forecast_model(mc, cfg.seed);

        std::mt19937_64 rng(cfg.seed);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        SeriesTensor bx(cfg.batch_size, L, cfg.channels);
        for (double& v : bx.data) {
            v = dist(rng);
        }
        SeriesTensor by(cfg.batch_size, cfg.horizon, cfg.channels);
        for (double& v : by.data) {
            v = dist(rng);
        }

        double checksum = 0.0;
        auto run_once = [&]() {
            if (cfg.with_backward) {
                checksum += backward(model, bx, by).loss;
            } else {
                checksum += model_forward(bx, model).data[0];
            }
        };
        for (int i = 0; i < cfg.warmup; ++i) {
            run_once();
        }
        std::vector<double> ms(cfg.iters);
        for (int i = 0; i < cfg.iters; ++i) {
            const auto t0 = std::chrono::steady_clock::now();
            run_once();
            const auto t1 = std::chrono::steady_clock::now();
            ms[i] = std::chrono::duration<double, std::milli>(t1 - t0).count();
        }
        double mean = 0.0;
        for (double v : ms) {
            mean += v;
        }
        mean /= cfg.iters;
        double var = 0.0;
        for (double v : ms) {
            var += (v - mean) * (v - mean);
        }
        var /= cfg.iters;

        results.push_back({{"seq_len", L},
                           {"ms_per_batch_mean", mean},
                           {"ms_per_batch_std", std::sqrt(var)},
                           {"checksum", checksum}});
    }
    return json{{"schema_version", kReportSchemaVersion},
                {"command", "bench"},
                {"model", backbone_kind_name(cfg.model)},
                {"horizon", cfg.horizon},
                {"batch_size", cfg.batch_size},
                {"channels", cfg.channels},
                {"iters", cfg.iters},
                {"warmup", cfg.warmup},
                {"with_backward", cfg.with_backward},
                {"results", results}};
}

// ============================================================================
// Atomic report writing
// ============================================================================

void write_json_atomically(const json& j, const std::string& path) {
    const std::string tmp = path + ".tmp";
    try {
        {
            std::ofstream out(tmp, std::ios::trunc);
            if (!out) {
                throw std::runtime_error("cannot open report file for writing: " + path);
            }
            out << j.dump(2) << '\n';
            if (!out) {
                throw std::runtime_error("failed while writing report: " + path);
            }
        }
        std::filesystem::rename(tmp, path);
    } catch (...) {
        std::error_code ec;
        std::filesystem::remove(tmp, ec);
        throw;
    }
}

}  // namespace tsf
