// Acceptance suite: one criterion per function, one PASS/FAIL/SKIP line each.
// Exit status is nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "tsf/decompose.hpp"
#include "tsf/experiment.hpp"
#include "tsf/fft.hpp"
#include "tsf/model.hpp"
#include "tsf/revin.hpp"
#include "tsf/train.hpp"

using namespace tsf;

namespace {

struct Outcome {
    enum class Status { kPass, kFail, kSkip } status;
    std::string detail;
};

Outcome pass(std::string detail) { return {Outcome::Status::kPass, std::move(detail)}; }
Outcome fail(std::string detail) { return {Outcome::Status::kFail, std::move(detail)}; }
Outcome skip(std::string detail) { return {Outcome::Status::kSkip, std::move(detail)}; }

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

// ----------------------------------------------------------------------------
// 1. Decomposition additivity across 1,000 random tensors
// ----------------------------------------------------------------------------
Outcome criterion_additivity() {
    std::mt19937_64 rng(1001);
    std::uniform_int_distribution<int> bdist(1, 4), tdist(8, 96), cdist(1, 21);
    double worst_ma = 0.0, worst_moe = 0.0, worst_fd = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
        const int B = bdist(rng), T = tdist(rng), C = cdist(rng);
        const SeriesTensor x = oracles::random_tensor(rng, B, T, C, -10.0, 10.0);
        std::uniform_int_distribution<int> kdist(1, std::min(25, 2 * T - 1) / 2);
        const int kernel = 2 * kdist(rng) + 1;
        std::uniform_int_distribution<int> fdist(1, T / 2);
        const int top_k = fdist(rng);

        const Decomposition ma = moving_average_decompose(x, kernel);
        const Decomposition moe = moe_decompose(x, {3, 7}, {}, {});
        const Decomposition fd = frequency_decompose(x, top_k);
        for (std::size_t i = 0; i < x.data.size(); ++i) {
            worst_ma = std::max(worst_ma,
                                std::abs(ma.trend.data[i] + ma.seasonal.data[i] - x.data[i]));
            worst_moe = std::max(worst_moe,
                                 std::abs(moe.trend.data[i] + moe.seasonal.data[i] - x.data[i]));
            worst_fd = std::max(worst_fd,
                                std::abs(fd.trend.data[i] + fd.seasonal.data[i] - x.data[i]));
        }
    }
    const bool ok = worst_ma < 1e-9 && worst_moe < 1e-9 && worst_fd < 1e-6;
    const std::string detail = "worst residual: ma " + fmt(worst_ma) + ", moe " + fmt(worst_moe) +
                               ", fd " + fmt(worst_fd);
    return ok ? pass(detail) : fail(detail);
}

// ----------------------------------------------------------------------------
// 2. Single-expert mixture degenerates to the plain moving average
// ----------------------------------------------------------------------------
Outcome criterion_moe_degeneracy() {
    std::mt19937_64 rng(1002);
    std::uniform_real_distribution<double> gdist(-2.0, 2.0);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const SeriesTensor x = oracles::random_tensor(rng, 2, 24, 3, -5.0, 5.0);
        DenseMatrix gate(24, 1);
        for (double& v : gate.data) {
            v = gdist(rng);
        }
        const Decomposition moe = moe_decompose(x, {7}, gate, {gdist(rng)});
        const Decomposition ma = moving_average_decompose(x, 7);
        worst = std::max(worst, oracles::max_abs_diff(moe.trend, ma.trend));
        worst = std::max(worst, oracles::max_abs_diff(moe.seasonal, ma.seasonal));
    }
    const std::string detail = "worst |moe - ma| = " + fmt(worst);
    return worst <= 1e-12 ? pass(detail) : fail(detail);
}

// ----------------------------------------------------------------------------
// 3. Frequency decomposition against the brute-force DFT reference
// ----------------------------------------------------------------------------
Outcome criterion_frequency_oracle() {
    std::mt19937_64 rng(1003);
    const int lengths[] = {8, 96, 100};
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const int n = lengths[rep % 3];
        std::uniform_int_distribution<int> kdist(1, n / 2);
        const int k = kdist(rng);
        const SeriesTensor x = oracles::random_tensor(rng, 1, n, 1, -3.0, 3.0);
        const Decomposition d = frequency_decompose(x, k);
        std::vector<double> series(n);
        for (int t = 0; t < n; ++t) {
            series[t] = x.at(0, t, 0);
        }
        const std::vector<double> ref_seasonal = oracles::frequency_seasonal_reference(series, k);
        for (int t = 0; t < n; ++t) {
            worst = std::max(worst, std::abs(d.seasonal.at(0, t, 0) - ref_seasonal[t]));
            worst = std::max(worst,
                             std::abs(d.trend.at(0, t, 0) - (series[t] - ref_seasonal[t])));
        }
    }
    const std::string detail = "worst |impl - reference| = " + fmt(worst);
    return worst <= 1e-8 ? pass(detail) : fail(detail);
}

// ----------------------------------------------------------------------------
// 4. RevIN round trip and trend-head equivariances
// ----------------------------------------------------------------------------
Outcome criterion_revin() {
    std::mt19937_64 rng(1004);
    std::uniform_real_distribution<double> gdist(0.1, 2.0), bdist(-1.0, 1.0);
    double worst_rt = 0.0;
    for (int rep = 0; rep < 200; ++rep) {
        std::uniform_int_distribution<int> tdist(2, 48), cdist(1, 8);
        const int T = tdist(rng), C = cdist(rng);
        const SeriesTensor x = oracles::random_tensor(rng, 2, T, C, -6.0, 6.0);
        RevinAffine affine;
        for (int c = 0; c < C; ++c) {
            affine.gamma.push_back((bdist(rng) > 0 ? 1.0 : -1.0) * gdist(rng));
            affine.beta.push_back(bdist(rng));
        }
        const auto [normed, state] = revin_normalize(x, affine, kRevinEpsilon);
        worst_rt = std::max(worst_rt,
                            oracles::max_abs_diff(revin_denormalize(normed, state, affine), x));
    }
    if (worst_rt >= 1e-9) {
        return fail("round trip residual " + fmt(worst_rt));
    }

    ModelConfig mc;
    mc.seq_len = 24;
    mc.horizon = 12;
    mc.channels = 3;
    mc.trend_hidden = 16;
    ForecastModel model = make_forecast_model(mc, 1004);
    const SeriesTensor xt = oracles::random_tensor(rng, 3, 24, 3);
    const SeriesTensor base = trend_head_forward(xt, model.trend);

    SeriesTensor shifted = xt;
    for (double& v : shifted.data) {
        v += 5.0;
    }
    const SeriesTensor moved = trend_head_forward(shifted, model.trend);
    double worst_shift = 0.0;
    for (std::size_t i = 0; i < base.data.size(); ++i) {
        worst_shift = std::max(worst_shift, std::abs(moved.data[i] - base.data[i] - 5.0));
    }

    const SeriesTensor xpos = oracles::random_tensor(rng, 3, 24, 3, 1.0, 3.0);
    const SeriesTensor pos_base = trend_head_forward(xpos, model.trend);
    SeriesTensor scaled = xpos;
    const double s = 7.0;
    for (double& v : scaled.data) {
        v *= s;
    }
    const SeriesTensor big = trend_head_forward(scaled, model.trend);
    double worst_scale = 0.0;
    for (std::size_t i = 0; i < pos_base.data.size(); ++i) {
        worst_scale = std::max(worst_scale, std::abs(big.data[i] - s * pos_base.data[i]) /
                                                std::abs(s * pos_base.data[i]));
    }

    const bool ok = worst_shift < 1e-8 && worst_scale < 1e-6;
    const std::string detail = "round trip " + fmt(worst_rt) + ", shift " + fmt(worst_shift) +
                               ", scale(rel) " + fmt(worst_scale);
    return ok ? pass(detail) : fail(detail);
}

// ----------------------------------------------------------------------------
// 5. Gradient correctness: every variant x every decomposition
// ----------------------------------------------------------------------------
Outcome criterion_gradients() {
    std::mt19937_64 rng(1005);
    double worst_rel = 0.0;
    std::string worst_at;
    for (BackboneKind backbone :
         {BackboneKind::kMlp, BackboneKind::kShiftMlp, BackboneKind::kLinear}) {
        for (DecompConfig::Kind decomp : {DecompConfig::Kind::kMovingAverage,
                                          DecompConfig::Kind::kMixtureOfExperts,
                                          DecompConfig::Kind::kFrequency}) {
            ModelConfig mc;
            mc.seq_len = 8;
            mc.horizon = 4;
            mc.channels = 2;
            mc.backbone = backbone;
            mc.decomp.kind = decomp;
            mc.decomp.kernel = 3;
            mc.decomp.kernels = {3, 5};
            mc.decomp.top_k = 2;
            mc.trend_hidden = 8;
            mc.rmm_hidden = 8;
            mc.rmsm_hidden1 = 4;
            mc.rmsm_hidden2 = 8;
            ForecastModel model = make_forecast_model(mc, 1005);
            const SeriesTensor x = oracles::random_tensor(rng, 3, 8, 2, -2.0, 2.0);
            const SeriesTensor y = oracles::random_tensor(rng, 3, 4, 2, -2.0, 2.0);
            const auto check = oracles::finite_difference_check(model, x, y);
            if (!check.ok) {
                return fail(backbone_kind_name(backbone) + "/" + decomp_kind_name(decomp) +
                            ": worst " + check.worst_param + " abs " + fmt(check.worst_abs));
            }
            if (check.worst_rel > worst_rel) {
                worst_rel = check.worst_rel;
                worst_at = backbone_kind_name(backbone) + "/" + decomp_kind_name(decomp) + "/" +
                           check.worst_param;
            }
        }
    }
    return pass("9 variants checked; worst rel dev " + fmt(worst_rel) + " at " + worst_at);
}

// ----------------------------------------------------------------------------
// 6. Learning on the pinned synthetic dataset
// ----------------------------------------------------------------------------
Outcome criterion_synthetic_learning() {
    ExperimentConfig cfg;
    cfg.dataset.synthetic = true;
    cfg.dataset.synthetic_spec.n = 5000;
    cfg.dataset.synthetic_spec.channels = 3;
    cfg.dataset.synthetic_spec.trend_slope = 0.001;
    cfg.dataset.synthetic_spec.sinusoids = {{24.0, 1.0}, {96.0, 0.5}};
    cfg.dataset.synthetic_spec.noise_sigma = 0.1;
    cfg.dataset.synthetic_spec.seed = 42;
    cfg.model = BackboneKind::kMlp;
    cfg.seq_len = 96;
    cfg.horizon = 96;
    cfg.train.lr = 1e-4;
    cfg.train.batch_size = 32;
    cfg.train.max_epochs = 8;
    cfg.train.patience = 4;
    cfg.train.seed = 42;
    cfg.repeats = 1;
    const nlohmann::json report = run_train_experiment(cfg);
    const double mse = report.at("mean").at("test_mse").get<double>();
    const std::string detail =
        "test mse " + fmt(mse) + " vs noise floor 0.01 (threshold 0.02)";
    return mse <= 0.02 ? pass(detail) : fail(detail);
}

// ----------------------------------------------------------------------------
// 7. Reported-number reproduction on ETTh2 (skipped when the file is absent)
// ----------------------------------------------------------------------------
Outcome criterion_etth2() {
    std::string path;
    const char* env = std::getenv("TSF_ETTH2_CSV");
    if (env != nullptr && *env != '\0') {
        path = env;
    } else {
        for (const char* candidate : {"data/ETTh2.csv", "../data/ETTh2.csv",
                                      "../../data/ETTh2.csv", "../../../data/ETTh2.csv"}) {
            if (std::filesystem::exists(candidate)) {
                path = candidate;
                break;
            }
        }
    }
    if (path.empty() || !std::filesystem::exists(path)) {
        return skip("ETTh2.csv not found (set TSF_ETTH2_CSV or place it under data/); "
                    "criterion skipped");
    }

    ExperimentConfig cfg;
    cfg.dataset.path = path;
    cfg.dataset.has_date_column = true;
    cfg.dataset.standardize = true;
    cfg.model = BackboneKind::kMlp;
    cfg.seq_len = 96;
    cfg.horizon = 96;
    cfg.train.lr = 1e-4;
    cfg.train.batch_size = 32;
    cfg.train.max_epochs = 10;
    cfg.train.patience = 3;
    cfg.train.seed = 2024;
    cfg.repeats = 3;
    const nlohmann::json report = run_train_experiment(cfg);
    const double mse = report.at("mean").at("test_mse").get<double>();
    const double mae = report.at("mean").at("test_mae").get<double>();
    const bool ok = mse >= 0.276 * 0.85 && mse <= 0.276 * 1.15 && mae >= 0.325 * 0.85 &&
                    mae <= 0.325 * 1.15;
    const std::string detail = "mean mse " + fmt(mse) + " (target 0.276 +-15%), mae " + fmt(mae) +
                               " (target 0.325 +-15%)";
    return ok ? pass(detail) : fail(detail);
}

// ----------------------------------------------------------------------------
// 8. Near-linear runtime scaling in the input length
// ----------------------------------------------------------------------------
Outcome criterion_scaling() {
    BenchConfig cfg;
    cfg.model = BackboneKind::kMlp;
    cfg.seq_lens = {96, 768};
    cfg.horizon = 720;
    cfg.batch_size = 32;
    cfg.channels = 7;
    cfg.iters = 10;
    cfg.warmup = 2;
    cfg.with_backward = true;
    cfg.seed = 1008;
    const nlohmann::json report = run_bench(cfg);
    const double t96 = report.at("results")[0].at("ms_per_batch_mean").get<double>();
    const double t768 = report.at("results")[1].at("ms_per_batch_mean").get<double>();
    const double ratio = t768 / t96;
    const std::string detail = "T(768)/T(96) = " + fmt(ratio) + " (" + fmt(t768) + "ms / " +
                               fmt(t96) + "ms), threshold 10";
    return ratio <= 10.0 ? pass(detail) : fail(detail);
}

// ----------------------------------------------------------------------------
// 9. Bitwise-deterministic reports
// ----------------------------------------------------------------------------
Outcome criterion_determinism() {
    ExperimentConfig cfg;
    cfg.dataset.synthetic = true;
    cfg.dataset.synthetic_spec.n = 1200;
    cfg.dataset.synthetic_spec.channels = 2;
    cfg.dataset.synthetic_spec.sinusoids = {{24.0, 1.0}};
    cfg.dataset.synthetic_spec.noise_sigma = 0.1;
    cfg.dataset.synthetic_spec.seed = 9;
    cfg.seq_len = 24;
    cfg.horizon = 12;
    cfg.trend_hidden = 32;
    cfg.rmm_hidden = 32;
    cfg.train.max_epochs = 3;
    cfg.train.seed = 900;
    cfg.repeats = 2;

    const nlohmann::json a = run_train_experiment(cfg);
    const nlohmann::json b = run_train_experiment(cfg);
    for (int r = 0; r < cfg.repeats; ++r) {
        const auto& ra = a.at("repeats")[r];
        const auto& rb = b.at("repeats")[r];
        if (ra.at("test_mse").get<double>() != rb.at("test_mse").get<double>() ||
            ra.at("test_mae").get<double>() != rb.at("test_mae").get<double>() ||
            ra.at("history") != rb.at("history")) {
            return fail("repeat " + std::to_string(r) + " differs between invocations");
        }
    }
    if (a.at("mean").at("test_mse").get<double>() != b.at("mean").at("test_mse").get<double>()) {
        return fail("mean metrics differ between invocations");
    }
    return pass("2 invocations x " + std::to_string(cfg.repeats) +
                " repeats bitwise identical (mse " + fmt(a.at("mean").at("test_mse").get<double>()) +
                ")");
}

int g_failures = 0;

void run(int index, const char* name, Outcome (*criterion)()) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome outcome = fail("unhandled exception");
    try {
        outcome = criterion();
    } catch (const std::exception& e) {
        outcome = fail(std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* tag = outcome.status == Outcome::Status::kPass   ? "PASS"
                      : outcome.status == Outcome::Status::kSkip ? "SKIP"
                                                                 : "FAIL";
    std::printf("[%s] %d %s: %s (%.1fs)\n", tag, index, name, outcome.detail.c_str(), secs);
    std::fflush(stdout);
    if (outcome.status == Outcome::Status::kFail) {
        ++g_failures;
    }
}

}  // namespace

int main() {
    run(1, "decomposition-additivity", criterion_additivity);
    run(2, "moe-degeneracy", criterion_moe_degeneracy);
    run(3, "frequency-oracle", criterion_frequency_oracle);
    run(4, "revin-roundtrip-equivariance", criterion_revin);
    run(5, "gradient-correctness", criterion_gradients);
    run(6, "synthetic-learning", criterion_synthetic_learning);
    run(7, "etth2-reproduction", criterion_etth2);
    run(8, "linear-scaling", criterion_scaling);
    run(9, "determinism", criterion_determinism);

    if (g_failures > 0) {
        std::printf("%d criterion(s) failed\n", g_failures);
        return 1;
    }
    std::printf("all criteria satisfied (skips noted above)\n");
    return 0;
}
