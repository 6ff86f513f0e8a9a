#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tsf/experiment.hpp"

namespace {

// Shared dataset flags (train / evaluate / decompose).
void add_dataset_options(CLI::App* cmd, tsf::DatasetConfig& ds) {
    cmd->add_option("--data", ds.path, "CSV dataset path (header row expected)")
        ->envname("TSF_DATA");
    cmd->add_flag("--no-date", [&ds](std::int64_t) { ds.has_date_column = false; },
                  "file has no leading date column");
    cmd->add_flag("--standardize", ds.standardize,
                  "standardize channels with statistics fitted on the train segment")
        ->envname("TSF_STANDARDIZE");
}

void add_synthetic_options(CLI::App* cmd, tsf::DatasetConfig& ds,
                           std::vector<double>& periods, std::vector<double>& amps) {
    cmd->add_flag("--synthetic", ds.synthetic, "use the seeded synthetic generator");
    cmd->add_option("--synth-len", ds.synthetic_spec.n, "synthetic series length");
    cmd->add_option("--synth-channels", ds.synthetic_spec.channels, "synthetic channel count");
    cmd->add_option("--synth-slope", ds.synthetic_spec.trend_slope, "trend slope per step");
    cmd->add_option("--synth-periods", periods, "sinusoid periods (steps)");
    cmd->add_option("--synth-amps", amps, "sinusoid amplitudes, paired with --synth-periods");
    cmd->add_option("--synth-noise", ds.synthetic_spec.noise_sigma, "noise standard deviation");
    cmd->add_option("--synth-seed", ds.synthetic_spec.seed, "generator seed for the dataset");
}

void finish_synthetic(tsf::DatasetConfig& ds, const std::vector<double>& periods,
                      const std::vector<double>& amps) {
    if (periods.empty()) {
        return;
    }
    if (amps.size() != periods.size()) {
        throw CLI::ValidationError("--synth-amps must list one amplitude per period");
    }
    ds.synthetic_spec.sinusoids.clear();
    for (std::size_t i = 0; i < periods.size(); ++i) {
        ds.synthetic_spec.sinusoids.push_back({periods[i], amps[i]});
    }
}

void add_decomp_options(CLI::App* cmd, tsf::DecompConfig& d, std::string& decomp_name) {
    cmd->add_option("--decomp", decomp_name, "decomposition: ma, moe or fd")
        ->check(CLI::IsMember({"ma", "moe", "fd"}))
        ->envname("TSF_DECOMP");
    cmd->add_option("--kernel", d.kernel, "moving-average kernel (odd)");
    cmd->add_option("--kernels", d.kernels, "mixture-of-experts kernel list (odd)");
    cmd->add_option("--topk", d.top_k, "frequency bins kept by fd");
    cmd->add_flag("--moe-frozen", [&d](std::int64_t) { d.gate_trainable = false; },
                  "freeze the mixture gate at uniform weights");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"decomposition-based multivariate time series forecasting"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from a TOML/INI config file");

    tsf::ExperimentConfig train_cfg;
    std::string train_decomp = "ma", train_model = "rmm";
    std::vector<double> train_periods, train_amps;

    CLI::App* train = app.add_subcommand("train", "train a model and write a run report");
    add_dataset_options(train, train_cfg.dataset);
    add_synthetic_options(train, train_cfg.dataset, train_periods, train_amps);
    add_decomp_options(train, train_cfg.decomp, train_decomp);
    train->add_option("--model", train_model, "rmm, rmsm or linear-backbone")
        ->check(CLI::IsMember({"rmm", "rmsm", "linear-backbone"}))
        ->envname("TSF_MODEL");
    train->add_option("--seq-len", train_cfg.seq_len, "lookback window L")->envname("TSF_SEQ_LEN");
    train->add_option("--horizon", train_cfg.horizon, "forecast horizon H")->envname("TSF_HORIZON");
    train->add_option("--lr", train_cfg.train.lr, "Adam learning rate");
    train->add_option("--batch-size", train_cfg.train.batch_size, "batch size");
    train->add_option("--epochs", train_cfg.train.max_epochs, "max epochs");
    train->add_option("--patience", train_cfg.train.patience, "early-stopping patience");
    train->add_option("--repeats", train_cfg.repeats, "independent seeded runs to average");
    train->add_option("--seed", train_cfg.train.seed, "base seed (repeats use seed, seed+1, ...)")
        ->envname("TSF_SEED");
    train->add_option("--out", train_cfg.out_path, "report JSON path")->envname("TSF_OUT");
    train->add_option("--save-model", train_cfg.save_model_path,
                      "checkpoint path for the last repeat's model");
    train->add_option("--trend-hidden", train_cfg.trend_hidden, "trend MLP hidden width");
    train->add_option("--rmm-hidden", train_cfg.rmm_hidden, "rmm hidden width");
    train->add_flag("--verbose", train_cfg.verbose, "print one JSON line per epoch to stderr");

    std::string eval_checkpoint, eval_out;
    tsf::DatasetConfig eval_ds;
    std::vector<double> eval_periods, eval_amps;
    int eval_batch = 32;
    CLI::App* evaluate = app.add_subcommand("evaluate", "score a checkpoint on the test split");
    evaluate->add_option("--checkpoint", eval_checkpoint, "model checkpoint path")->required();
    add_dataset_options(evaluate, eval_ds);
    add_synthetic_options(evaluate, eval_ds, eval_periods, eval_amps);
    evaluate->add_option("--batch-size", eval_batch, "evaluation batch size");
    evaluate->add_option("--out", eval_out, "metrics JSON path");

    std::string dec_in, dec_out, dec_name = "ma";
    bool dec_no_date = false;
    tsf::DecompConfig dec_cfg;
    CLI::App* decompose = app.add_subcommand("decompose", "dump trend/seasonal columns to CSV");
    decompose->add_option("--data", dec_in, "input CSV")->required();
    decompose->add_flag("--no-date", dec_no_date, "file has no leading date column");
    decompose->add_option("--decomp", dec_name, "decomposition: ma, moe or fd")
        ->check(CLI::IsMember({"ma", "moe", "fd"}));
    decompose->add_option("--kernel", dec_cfg.kernel, "moving-average kernel (odd)");
    decompose->add_option("--kernels", dec_cfg.kernels, "mixture kernel list (odd)");
    decompose->add_option("--topk", dec_cfg.top_k, "frequency bins kept by fd");
    decompose->add_option("--out", dec_out, "output CSV")->required();

    tsf::BenchConfig bench_cfg;
    std::string bench_model = "rmm", bench_out;
    CLI::App* bench = app.add_subcommand("bench", "time forward (and backward) passes");
    bench->add_option("--model", bench_model, "rmm, rmsm or linear-backbone")
        ->check(CLI::IsMember({"rmm", "rmsm", "linear-backbone"}));
    bench->add_option("--seq-lens", bench_cfg.seq_lens, "input lengths to time");
    bench->add_option("--horizon", bench_cfg.horizon, "forecast horizon");
    bench->add_option("--batch-size", bench_cfg.batch_size, "batch size");
    bench->add_option("--channels", bench_cfg.channels, "channel count");
    bench->add_option("--iters", bench_cfg.iters, "timed runs per length");
    bench->add_flag("--backward", bench_cfg.with_backward, "time forward+backward");
    bench->add_option("--seed", bench_cfg.seed, "seed for weights and inputs");
    bench->add_option("--out", bench_out, "timing JSON path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) {
            finish_synthetic(train_cfg.dataset, train_periods, train_amps);
            train_cfg.decomp.kind = tsf::decomp_kind_from_name(train_decomp);
            train_cfg.model = tsf::backbone_kind_from_name(train_model);
            const nlohmann::json report = tsf::run_train_experiment(train_cfg);
            if (train_cfg.out_path.empty()) {
                std::cout << report.dump(2) << '\n';
            } else {
                std::cout << "report written to " << train_cfg.out_path << '\n';
            }
        } else if (evaluate->parsed()) {
            finish_synthetic(eval_ds, eval_periods, eval_amps);
            const nlohmann::json report =
                tsf::run_evaluate(eval_checkpoint, eval_ds, tsf::SplitRatios{}, eval_batch);
            if (eval_out.empty()) {
                std::cout << report.dump(2) << '\n';
            } else {
                tsf::write_json_atomically(report, eval_out);
                std::cout << "metrics written to " << eval_out << '\n';
            }
        } else if (decompose->parsed()) {
            // Outside a trained model the mixture gate defaults to zero
            // parameters, i.e. uniform mixing.
            tsf::DecompositionMethod method;
            if (dec_name == "ma") {
                method = tsf::MovingAverage{dec_cfg.kernel};
            } else if (dec_name == "moe") {
                tsf::MixtureOfExperts moe;
                moe.kernels = dec_cfg.kernels;
                method = std::move(moe);
            } else {
                method = tsf::Frequency{dec_cfg.top_k};
            }
            tsf::run_decompose(dec_in, !dec_no_date, method, dec_out);
            std::cout << "components written to " << dec_out << '\n';
        } else if (bench->parsed()) {
            bench_cfg.model = tsf::backbone_kind_from_name(bench_model);
            const nlohmann::json report = tsf::run_bench(bench_cfg);
            if (bench_out.empty()) {
                std::cout << report.dump(2) << '\n';
            } else {
                tsf::write_json_atomically(report, bench_out);
                std::cout << "timings written to " << bench_out << '\n';
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
