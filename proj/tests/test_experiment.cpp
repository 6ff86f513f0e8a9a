#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "tsf/experiment.hpp"

using namespace tsf;
using nlohmann::json;

namespace {

ExperimentConfig tiny_experiment() {
    ExperimentConfig cfg;
    cfg.dataset.synthetic = true;
    cfg.dataset.synthetic_spec.n = 300;
    cfg.dataset.synthetic_spec.channels = 1;
    cfg.dataset.synthetic_spec.sinusoids = {{12.0, 1.0}};
    cfg.dataset.synthetic_spec.noise_sigma = 0.05;
    cfg.dataset.synthetic_spec.seed = 3;
    cfg.decomp.kernel = 3;
    cfg.seq_len = 8;
    cfg.horizon = 2;
    cfg.train.batch_size = 16;
    cfg.train.max_epochs = 2;
    cfg.train.seed = 40;
    cfg.repeats = 2;
    cfg.trend_hidden = 8;
    cfg.rmm_hidden = 8;
    return cfg;
}

}  // namespace

// ============================================================================
// train command
// ============================================================================

TEST_CASE("a train run produces a structurally complete report", "[experiment][train]") {
    const json report = run_train_experiment(tiny_experiment());
    REQUIRE(report.at("schema_version") == 1);
    REQUIRE(report.at("command") == "train");
    REQUIRE(report.at("seeds") == json::array({40, 41}));
    REQUIRE(report.at("repeats").size() == 2);
    for (const json& rep : report.at("repeats")) {
        REQUIRE(std::isfinite(rep.at("test_mse").get<double>()));
        REQUIRE(std::isfinite(rep.at("test_mae").get<double>()));
        REQUIRE(rep.at("history").size() == 2);
        REQUIRE(rep.at("train_ms_per_batch").get<double>() >= 0.0);
    }
    // the mean is the arithmetic mean of the repeats
    const double m0 = report.at("repeats")[0].at("test_mse").get<double>();
    const double m1 = report.at("repeats")[1].at("test_mse").get<double>();
    REQUIRE(std::abs(report.at("mean").at("test_mse").get<double>() - (m0 + m1) / 2.0) < 1e-12);
    // the config echo is complete enough to rebuild the run
    REQUIRE(report.at("config").at("train").at("seed") == 40);
    REQUIRE(report.at("config").at("dataset").at("synthetic").at("n") == 300);
}

TEST_CASE("with one repeat the mean is that run", "[experiment][train]") {
    ExperimentConfig cfg = tiny_experiment();
    cfg.repeats = 1;
    const json report = run_train_experiment(cfg);
    REQUIRE(report.at("mean").at("test_mse") == report.at("repeats")[0].at("test_mse"));
    REQUIRE(report.at("mean").at("test_mae") == report.at("repeats")[0].at("test_mae"));
}

TEST_CASE("reports are written atomically", "[experiment][train]") {
    ExperimentConfig cfg = tiny_experiment();
    cfg.train.max_epochs = 1;
    cfg.repeats = 1;
    cfg.out_path = "t_report.json";
    run_train_experiment(cfg);
    REQUIRE(std::filesystem::exists("t_report.json"));
    REQUIRE_FALSE(std::filesystem::exists("t_report.json.tmp"));
    std::ifstream in("t_report.json");
    const json parsed = json::parse(in);
    REQUIRE(parsed.at("schema_version") == 1);
    std::remove("t_report.json");

    // a failing write leaves nothing behind
    cfg.out_path = "no_such_dir/t_report.json";
    REQUIRE_THROWS_AS(run_train_experiment(cfg), std::exception);
    REQUIRE_FALSE(std::filesystem::exists("no_such_dir/t_report.json.tmp"));
}

TEST_CASE("identical config and seed reproduce the metrics bitwise", "[experiment][determinism]") {
    const ExperimentConfig cfg = tiny_experiment();
    const json a = run_train_experiment(cfg);
    const json b = run_train_experiment(cfg);
    for (int r = 0; r < 2; ++r) {
        REQUIRE(a.at("repeats")[r].at("test_mse").get<double>() ==
                b.at("repeats")[r].at("test_mse").get<double>());
        REQUIRE(a.at("repeats")[r].at("test_mae").get<double>() ==
                b.at("repeats")[r].at("test_mae").get<double>());
        REQUIRE(a.at("repeats")[r].at("history") == b.at("repeats")[r].at("history"));
    }
}

// ============================================================================
// evaluate command
// ============================================================================

TEST_CASE("evaluate on a fresh checkpoint reproduces the training metrics", "[experiment][evaluate]") {
    ExperimentConfig cfg = tiny_experiment();
    cfg.repeats = 1;
    cfg.save_model_path = "t_eval_model.bin";
    const json trained = run_train_experiment(cfg);

    const json scored = run_evaluate("t_eval_model.bin", cfg.dataset, cfg.ratios,
                                     cfg.train.batch_size);
    REQUIRE(scored.at("test_mse").get<double>() ==
            trained.at("repeats")[0].at("test_mse").get<double>());
    REQUIRE(scored.at("test_mae").get<double>() ==
            trained.at("repeats")[0].at("test_mae").get<double>());
    std::remove("t_eval_model.bin");
}

TEST_CASE("evaluate rejects a channel-count mismatch", "[experiment][evaluate][error]") {
    ExperimentConfig cfg = tiny_experiment();
    cfg.repeats = 1;
    cfg.train.max_epochs = 1;
    cfg.save_model_path = "t_mismatch_model.bin";
    run_train_experiment(cfg);

    DatasetConfig two_channels = cfg.dataset;
    two_channels.synthetic_spec.channels = 2;
    REQUIRE_THROWS_WITH(run_evaluate("t_mismatch_model.bin", two_channels, cfg.ratios, 16),
                        Catch::Matchers::ContainsSubstring("1") &&
                            Catch::Matchers::ContainsSubstring("2"));
    std::remove("t_mismatch_model.bin");
}

TEST_CASE("a zero-weight checkpoint scores like the hand-computed pipeline",
          "[experiment][evaluate][oracle]") {
    // model: zero weights, gamma = 1 -> prediction = mean of the window's trend
    ModelConfig mc;
    mc.seq_len = 8;
    mc.horizon = 2;
    mc.channels = 1;
    mc.backbone = BackboneKind::kMlp;
    mc.decomp.kernel = 3;
    mc.trend_hidden = 8;
    mc.rmm_hidden = 8;
    ForecastModel model = make_forecast_model(mc, 50);
    ParamTable table(model);
    for (std::size_t i = 0; i < table.total(); ++i) {
        table.set(i, 0.0);
    }
    const ParamSlot* gamma = table.find("revin.gamma");
    gamma->data[0] = 1.0;
    save_checkpoint(model, "t_zero_model.bin");

    DatasetConfig ds;
    ds.synthetic = true;
    ds.synthetic_spec.n = 120;  // test segment [108, 120): 3 windows
    ds.synthetic_spec.channels = 1;
    ds.synthetic_spec.sinusoids = {{12.0, 1.0}};
    ds.synthetic_spec.noise_sigma = 0.1;
    ds.synthetic_spec.seed = 8;
    const json scored = run_evaluate("t_zero_model.bin", ds, SplitRatios{}, 32);

    // independent pipeline: naive padded-window mean, then the trend average
    const RawDataset raw = generate_synthetic(ds.synthetic_spec);
    double sse = 0.0;
    int count = 0;
    for (int w = 0; w < 3; ++w) {
        const int start = 108 + w;
        double trend_mean = 0.0;
        for (int t = 0; t < 8; ++t) {
            double window_sum = 0.0;
            for (int d = -1; d <= 1; ++d) {
                const int idx = std::min(std::max(t + d, 0), 7);
                window_sum += raw.value(start + idx, 0);
            }
            trend_mean += window_sum / 3.0;
        }
        trend_mean /= 8.0;
        for (int h = 0; h < 2; ++h) {
            const double err = trend_mean - raw.value(start + 8 + h, 0);
            sse += err * err;
            ++count;
        }
    }
    REQUIRE(std::abs(scored.at("test_mse").get<double>() - sse / count) < 1e-12);
    std::remove("t_zero_model.bin");
}

// ============================================================================
// decompose command
// ============================================================================

TEST_CASE("decompose dumps 2C columns that re-sum to the input", "[experiment][decompose]") {
    {
        std::ofstream out("t_dec_in.csv", std::ios::trunc);
        out << "date,flat,wave\n";
        for (int t = 0; t < 40; ++t) {
            out << "r" << t << ",7.5," << std::sin(0.7 * t) + 0.01 * t << "\n";
        }
    }
    run_decompose("t_dec_in.csv", true, MovingAverage{5}, "t_dec_out.csv");
    const RawDataset in = load_csv("t_dec_in.csv", true);
    const RawDataset out = load_csv("t_dec_out.csv", true);
    REQUIRE(out.rows == in.rows);
    REQUIRE(out.channels == 4);
    REQUIRE(out.channel_names == std::vector<std::string>{"flat_trend", "flat_seasonal",
                                                          "wave_trend", "wave_seasonal"});
    for (int r = 0; r < out.rows; ++r) {
        // constant channel: seasonal identically zero
        REQUIRE(out.value(r, 1) == 0.0);
        for (int c = 0; c < 2; ++c) {
            REQUIRE(std::abs(out.value(r, 2 * c) + out.value(r, 2 * c + 1) - in.value(r, c)) <
                    1e-6);
        }
    }
    std::remove("t_dec_in.csv");
    std::remove("t_dec_out.csv");
}

// ============================================================================
// bench command
// ============================================================================

TEST_CASE("bench reports non-negative spreads per length", "[experiment][bench]") {
    BenchConfig cfg;
    cfg.seq_lens = {16, 32};
    cfg.horizon = 8;
    cfg.batch_size = 4;
    cfg.channels = 1;
    cfg.iters = 3;
    cfg.warmup = 1;
    cfg.decomp.kernel = 5;
    const json report = run_bench(cfg);
    REQUIRE(report.at("results").size() == 2);
    for (const json& row : report.at("results")) {
        REQUIRE(row.at("ms_per_batch_mean").get<double>() > 0.0);
        REQUIRE(row.at("ms_per_batch_std").get<double>() >= 0.0);
    }
    BenchConfig backward_cfg = cfg;
    backward_cfg.seq_lens = {16};
    backward_cfg.with_backward = true;
    const json bw = run_bench(backward_cfg);
    REQUIRE(bw.at("with_backward") == true);
    REQUIRE(bw.at("results")[0].at("ms_per_batch_mean").get<double>() > 0.0);
}
