#include "tsf/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "tsf/decompose.hpp"
#include "tsf/revin.hpp"

namespace tsf {

// ============================================================================
// Losses
// ============================================================================

namespace {

void check_same_shape(const SeriesTensor& a, const SeriesTensor& b, const char* where) {
    if (!a.same_shape(b)) {
        throw std::invalid_argument(std::string(where) + ": shape mismatch " + a.shape_str() +
                                    " vs " + b.shape_str());
    }
}

}  // namespace

double mse_loss(const SeriesTensor& pred, const SeriesTensor& target) {
    check_same_shape(pred, target, "mse_loss");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const double d = pred.data[i] - target.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.data.size());
}

double mae_metric(const SeriesTensor& pred, const SeriesTensor& target) {
    check_same_shape(pred, target, "mae_metric");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        acc += std::abs(pred.data[i] - target.data[i]);
    }
    return acc / static_cast<double>(pred.data.size());
}

// ============================================================================
// Backward pass
// ============================================================================

namespace {

// Accumulation buffers for one three-layer MLP; scattered into the flat
// gradient vector at the end of the pass.
struct MlpGradBuffers {
    DenseMatrix dw1, dw2, dw3;
    std::vector<double> db1, db2, db3;
};

MlpGradBuffers make_buffers(const DenseMatrix& w1, const DenseMatrix& w2, const DenseMatrix& w3) {
    MlpGradBuffers g;
    g.dw1 = DenseMatrix(w1.rows, w1.cols);
    g.dw2 = DenseMatrix(w2.rows, w2.cols);
    g.dw3 = DenseMatrix(w3.rows, w3.cols);
    g.db1.assign(w1.cols, 0.0);
    g.db2.assign(w2.cols, 0.0);
    g.db3.assign(w3.cols, 0.0);
    return g;
}

void scatter(Gradients& grads, const ParamTable& table, const std::string& name,
             const std::vector<double>& values) {
    const ParamSlot* slot = table.find(name);
    std::memcpy(grads.flat.data() + slot->offset, values.data(), slot->size * sizeof(double));
}

// Forward pass of a plain 3-layer MLP over row-stacked series, keeping the
// activations the backward sweep needs.
struct MlpTrace {
    DenseMatrix h1, h2, z;
};

MlpTrace mlp_forward(const DenseMatrix& x, const DenseMatrix& w1, const std::vector<double>& b1,
                     const DenseMatrix& w2, const std::vector<double>& b2, const DenseMatrix& w3,
                     const std::vector<double>& b3) {
    MlpTrace t;
    t.h1 = matmul_bias(x, w1, b1);
    relu_inplace(t.h1);
    t.h2 = matmul_bias(t.h1, w2, b2);
    relu_inplace(t.h2);
    t.z = matmul_bias(t.h2, w3, b3);
    return t;
}

// Mirror sweep: fills weight gradients and returns dLoss/dx.
DenseMatrix mlp_backward(const DenseMatrix& x, const MlpTrace& t, const DenseMatrix& w1,
                         const DenseMatrix& w2, const DenseMatrix& w3, DenseMatrix dz,
                         MlpGradBuffers& g) {
    accumulate_weight_grads(t.h2, dz, g.dw3, g.db3);
    DenseMatrix dh2;
    input_grad_into(dz, w3, dh2);
    relu_backward_inplace(t.h2, dh2);

    accumulate_weight_grads(t.h1, dh2, g.dw2, g.db2);
    DenseMatrix dh1;
    input_grad_into(dh2, w2, dh1);
    relu_backward_inplace(t.h1, dh1);

    accumulate_weight_grads(x, dh1, g.dw1, g.db1);
    DenseMatrix dx;
    input_grad_into(dh1, w1, dx);
    return dx;
}

}  // namespace

BackwardResult backward(ForecastModel& model, const SeriesTensor& batch_x,
                        const SeriesTensor& batch_y, int batch_index) {
    const ModelConfig& cfg = model.config;
    if (batch_x.time != cfg.seq_len || batch_x.channels != cfg.channels) {
        throw std::invalid_argument("backward: input " + batch_x.shape_str() +
                                    " does not match model (L=" + std::to_string(cfg.seq_len) +
                                    ", C=" + std::to_string(cfg.channels) + ")");
    }
    if (batch_y.batch != batch_x.batch || batch_y.time != cfg.horizon ||
        batch_y.channels != cfg.channels) {
        throw std::invalid_argument("backward: target " + batch_y.shape_str() +
                                    " does not match model horizon/channels");
    }

    const int B = batch_x.batch, L = cfg.seq_len, H = cfg.horizon, C = cfg.channels;
    const int R = B * C;  // row-stacked (batch, channel) pairs

    ParamTable table(model);
    Gradients grads;
    grads.flat.assign(table.total(), 0.0);

    // ---- decomposition, with mixture intermediates captured when trainable ----
    const bool moe_trainable =
        cfg.decomp.kind == DecompConfig::Kind::kMixtureOfExperts && cfg.decomp.gate_trainable;
    const Decomposition dec = decompose(batch_x, model.decomposition);

    const DenseMatrix raw_rows = channel_rows(batch_x);
    const DenseMatrix trend_rows = channel_rows(dec.trend);
    const DenseMatrix seasonal_rows = channel_rows(dec.seasonal);

    int n_experts = 0;
    DenseMatrix expert_trends;  // (R*E) x L, expert-major per row
    DenseMatrix mix_weights;    // R x E
    if (moe_trainable) {
        const auto& moe = std::get<MixtureOfExperts>(model.decomposition);
        n_experts = static_cast<int>(moe.kernels.size());
        expert_trends = DenseMatrix(R * n_experts, L);
        mix_weights = DenseMatrix(R, n_experts);
        for (int r = 0; r < R; ++r) {
            const auto series = raw_rows.row(r);
            for (int e = 0; e < n_experts; ++e) {
                moving_average_trend(series, moe.kernels[e],
                                     expert_trends.row(r * n_experts + e));
            }
            std::vector<double> logits(moe.gate_b);
            for (int l = 0; l < L; ++l) {
                const double s = series[l];
                for (int e = 0; e < n_experts; ++e) {
                    logits[e] += s * moe.gate_w.at(l, e);
                }
            }
            const std::vector<double> w = softmax(logits);
            std::copy(w.begin(), w.end(), mix_weights.row(r).begin());
        }
    }

    // ---- trend path forward (normalize, MLP, denormalize) ----
    const TrendHead& th = model.trend;
    RevinState state;
    DenseMatrix xhat(R, L);  // standardized trend input
    DenseMatrix xnorm(R, L); // after affine
    {
        auto [xn, st] = revin_normalize(dec.trend, th.affine, cfg.revin_epsilon);
        state = std::move(st);
        xnorm = channel_rows(xn);
        for (int r = 0; r < R; ++r) {
            const int b = r / C, c = r % C;
            const double mu = state.mean_at(b, c), sigma = state.std_at(b, c);
            const auto u = trend_rows.row(r);
            auto xh = xhat.row(r);
            for (int t = 0; t < L; ++t) {
                xh[t] = (u[t] - mu) / sigma;
            }
        }
    }
    const MlpTrace trend_trace = mlp_forward(xnorm, th.w1, th.b1, th.w2, th.b2, th.w3, th.b3);

    // ---- backbone forward ----
    MlpTrace bb_trace;          // rmm / rmsm
    DenseMatrix rmsm_cat;       // concat(h1, x_full) for the shift head
    DenseMatrix ys_rows(R, H);
    if (const auto* lb = std::get_if<LinearBackbone>(&model.backbone)) {
        matmul_bias_into(seasonal_rows, lb->w, lb->b, ys_rows);
    } else if (const auto* rmm = std::get_if<SeasonalHeadRMM>(&model.backbone)) {
        bb_trace = mlp_forward(seasonal_rows, rmm->w1, rmm->b1, rmm->w2, rmm->b2, rmm->w3,
                               rmm->b3);
        ys_rows = bb_trace.z;
    } else {
        const auto& rmsm = std::get<SeasonalHeadRMSM>(model.backbone);
        bb_trace.h1 = matmul_bias(seasonal_rows, rmsm.w1, rmsm.b1);
        relu_inplace(bb_trace.h1);
        const int h1_width = rmsm.w1.cols;
        rmsm_cat = DenseMatrix(R, h1_width + L);
        for (int r = 0; r < R; ++r) {
            std::copy(bb_trace.h1.row(r).begin(), bb_trace.h1.row(r).end(),
                      rmsm_cat.row(r).begin());
            std::copy(raw_rows.row(r).begin(), raw_rows.row(r).end(),
                      rmsm_cat.row(r).begin() + h1_width);
        }
        bb_trace.h2 = matmul_bias(rmsm_cat, rmsm.w2, rmsm.b2);
        relu_inplace(bb_trace.h2);
        bb_trace.z = matmul_bias(bb_trace.h2, rmsm.w3, rmsm.b3);
        ys_rows = bb_trace.z;
    }

    // ---- combine, loss ----
    const DenseMatrix target_rows = channel_rows(batch_y);
    DenseMatrix pred_rows(R, H);
    double sse = 0.0;
    for (int r = 0; r < R; ++r) {
        const int b = r / C, c = r % C;
        const double mu = state.mean_at(b, c), sigma = state.std_at(b, c);
        const double g = th.affine.gamma[c], be = th.affine.beta[c];
        for (int h = 0; h < H; ++h) {
            const double yt = (trend_trace.z.at(r, h) - be) / g * sigma + mu;
            const double p = yt + ys_rows.at(r, h);
            pred_rows.at(r, h) = p;
            const double d = p - target_rows.at(r, h);
            sse += d * d;
        }
    }
    const double n_elems = static_cast<double>(R) * H;
    const double loss = sse / n_elems;
    if (!std::isfinite(loss)) {
        throw std::runtime_error("training diverged: non-finite loss on batch " +
                                 std::to_string(batch_index));
    }

    DenseMatrix dpred(R, H);
    for (std::size_t i = 0; i < dpred.data.size(); ++i) {
        dpred.data[i] = 2.0 * (pred_rows.data[i] - target_rows.data[i]) / n_elems;
    }

    // ---- trend path backward ----
    std::vector<double> dgamma(C, 0.0), dbeta(C, 0.0);
    std::vector<double> dsigma(R, 0.0), dmu(R, 0.0);
    DenseMatrix dz(R, H);
    for (int r = 0; r < R; ++r) {
        const int b = r / C, c = r % C;
        const double sigma = state.std_at(b, c);
        const double g = th.affine.gamma[c];
        const double be = th.affine.beta[c];
        double sum_g = 0.0, sum_gz = 0.0;
        for (int h = 0; h < H; ++h) {
            const double gh = dpred.at(r, h);
            dz.at(r, h) = gh * sigma / g;
            sum_g += gh;
            sum_gz += gh * (trend_trace.z.at(r, h) - be);
        }
        dgamma[c] += -sigma / (g * g) * sum_gz;
        dbeta[c] += -sigma / g * sum_g;
        dsigma[r] = sum_gz / g;
        dmu[r] = sum_g;
    }

    MlpGradBuffers trend_g = make_buffers(th.w1, th.w2, th.w3);
    DenseMatrix dxnorm =
        mlp_backward(xnorm, trend_trace, th.w1, th.w2, th.w3, std::move(dz), trend_g);

    // Undo the normalization: xnorm = gamma * xhat + beta, xhat = (u - mu)/sigma,
    // sigma = sqrt(var + eps). The statistics are functions of the trend input,
    // so their contributions fold into the input gradient.
    DenseMatrix dtrend_in(R, L);
    for (int r = 0; r < R; ++r) {
        const int b = r / C, c = r % C;
        const double mu = state.mean_at(b, c), sigma = state.std_at(b, c);
        const double g = th.affine.gamma[c];
        const auto dxn = dxnorm.row(r);
        const auto xh = xhat.row(r);
        const auto u = trend_rows.row(r);
        double sum_dxn = 0.0, sum_dxn_xhat = 0.0;
        for (int t = 0; t < L; ++t) {
            dgamma[c] += dxn[t] * xh[t];
            sum_dxn += dxn[t];
            sum_dxn_xhat += dxn[t] * xh[t];
        }
        dbeta[c] += sum_dxn;

        const double dmu_total = dmu[r] - g * sum_dxn / sigma;
        const double dsigma_total = dsigma[r] - g * sum_dxn_xhat / sigma;
        const double ds2 = dsigma_total / (2.0 * sigma);

        auto dti = dtrend_in.row(r);
        for (int t = 0; t < L; ++t) {
            dti[t] = g * dxn[t] / sigma + ds2 * 2.0 / L * (u[t] - mu) + dmu_total / L;
        }
    }

    // ---- backbone backward ----
    DenseMatrix dseasonal_in;
    if (const auto* lb = std::get_if<LinearBackbone>(&model.backbone)) {
        DenseMatrix dw(lb->w.rows, lb->w.cols);
        std::vector<double> db(lb->b.size(), 0.0);
        accumulate_weight_grads(seasonal_rows, dpred, dw, db);
        input_grad_into(dpred, lb->w, dseasonal_in);
        scatter(grads, table, "backbone.linear.w", dw.data);
        scatter(grads, table, "backbone.linear.b", db);
    } else if (const auto* rmm = std::get_if<SeasonalHeadRMM>(&model.backbone)) {
        MlpGradBuffers g = make_buffers(rmm->w1, rmm->w2, rmm->w3);
        dseasonal_in =
            mlp_backward(seasonal_rows, bb_trace, rmm->w1, rmm->w2, rmm->w3, dpred, g);
        scatter(grads, table, "backbone.rmm.w1", g.dw1.data);
        scatter(grads, table, "backbone.rmm.b1", g.db1);
        scatter(grads, table, "backbone.rmm.w2", g.dw2.data);
        scatter(grads, table, "backbone.rmm.b2", g.db2);
        scatter(grads, table, "backbone.rmm.w3", g.dw3.data);
        scatter(grads, table, "backbone.rmm.b3", g.db3);
    } else {
        const auto& rmsm = std::get<SeasonalHeadRMSM>(model.backbone);
        MlpGradBuffers g = make_buffers(rmsm.w1, rmsm.w2, rmsm.w3);
        accumulate_weight_grads(bb_trace.h2, dpred, g.dw3, g.db3);
        DenseMatrix dh2;
        input_grad_into(dpred, rmsm.w3, dh2);
        relu_backward_inplace(bb_trace.h2, dh2);

        accumulate_weight_grads(rmsm_cat, dh2, g.dw2, g.db2);
        DenseMatrix dcat;
        input_grad_into(dh2, rmsm.w2, dcat);

        // Only the h1 half of the concat feeds parameters upstream; the raw
        // input half ends at a leaf.
        const int h1_width = rmsm.w1.cols;
        DenseMatrix dh1(R, h1_width);
        for (int r = 0; r < R; ++r) {
            std::copy(dcat.row(r).begin(), dcat.row(r).begin() + h1_width, dh1.row(r).begin());
        }
        relu_backward_inplace(bb_trace.h1, dh1);
        accumulate_weight_grads(seasonal_rows, dh1, g.dw1, g.db1);
        input_grad_into(dh1, rmsm.w1, dseasonal_in);

        scatter(grads, table, "backbone.rmsm.w1", g.dw1.data);
        scatter(grads, table, "backbone.rmsm.b1", g.db1);
        scatter(grads, table, "backbone.rmsm.w2", g.dw2.data);
        scatter(grads, table, "backbone.rmsm.b2", g.db2);
        scatter(grads, table, "backbone.rmsm.w3", g.dw3.data);
        scatter(grads, table, "backbone.rmsm.b3", g.db3);
    }

    scatter(grads, table, "revin.gamma", dgamma);
    scatter(grads, table, "revin.beta", dbeta);
    scatter(grads, table, "trend.w1", trend_g.dw1.data);
    scatter(grads, table, "trend.b1", trend_g.db1);
    scatter(grads, table, "trend.w2", trend_g.dw2.data);
    scatter(grads, table, "trend.b2", trend_g.db2);
    scatter(grads, table, "trend.w3", trend_g.dw3.data);
    scatter(grads, table, "trend.b3", trend_g.db3);

    // ---- mixture gate backward ----
    if (moe_trainable) {
        const auto& moe = std::get<MixtureOfExperts>(model.decomposition);
        DenseMatrix dgate_w(moe.gate_w.rows, moe.gate_w.cols);
        std::vector<double> dgate_b(moe.gate_b.size(), 0.0);
        std::vector<double> dmix(n_experts), dlogit(n_experts);
        for (int r = 0; r < R; ++r) {
            // seasonal = x - trend, so the trend carries both heads' pull.
            const auto dt = dtrend_in.row(r);
            const auto ds = dseasonal_in.row(r);
            for (int e = 0; e < n_experts; ++e) {
                const auto te = expert_trends.row(r * n_experts + e);
                double acc = 0.0;
                for (int t = 0; t < L; ++t) {
                    acc += (dt[t] - ds[t]) * te[t];
                }
                dmix[e] = acc;
            }
            const auto w = mix_weights.row(r);
            double dot = 0.0;
            for (int e = 0; e < n_experts; ++e) {
                dot += w[e] * dmix[e];
            }
            for (int e = 0; e < n_experts; ++e) {
                dlogit[e] = w[e] * (dmix[e] - dot);
            }
            const auto series = raw_rows.row(r);
            for (int l = 0; l < L; ++l) {
                const double s = series[l];
                for (int e = 0; e < n_experts; ++e) {
                    dgate_w.at(l, e) += s * dlogit[e];
                }
            }
            for (int e = 0; e < n_experts; ++e) {
                dgate_b[e] += dlogit[e];
            }
        }
        scatter(grads, table, "moe.gate.w", dgate_w.data);
        scatter(grads, table, "moe.gate.b", dgate_b);
    }

    return {loss, std::move(grads)};
}

// ============================================================================
// Adam
// ============================================================================

AdamState make_adam_state(std::size_t n_params, double lr) {
    AdamState s;
    s.m.assign(n_params, 0.0);
    s.v.assign(n_params, 0.0);
    s.lr = lr;
    return s;
}

void adam_step(ParamTable& params, const Gradients& grads, AdamState& state) {
    if (grads.flat.size() != params.total() || state.m.size() != params.total()) {
        throw std::invalid_argument("adam_step: parameter/gradient/state sizes differ");
    }
    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    for (const ParamSlot& slot : params.slots()) {
        for (std::size_t i = 0; i < slot.size; ++i) {
            const std::size_t k = slot.offset + i;
            const double g = grads.flat[k];
            state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g;
            state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * g * g;
            const double mhat = state.m[k] / bc1;
            const double vhat = state.v[k] / bc2;
            slot.data[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

// ============================================================================
// Epoch loop
// ============================================================================

SeriesTensor slice_windows(const SeriesTensor& t, int first, int count) {
    SeriesTensor out(count, t.time, t.channels);
    const std::size_t stride = static_cast<std::size_t>(t.time) * t.channels;
    std::memcpy(out.data.data(), t.data.data() + first * stride,
                count * stride * sizeof(double));
    return out;
}

namespace {

void gather_windows(const SeriesTensor& src, const std::vector<int>& order, int first, int count,
                    SeriesTensor& out) {
    out.batch = count;
    out.time = src.time;
    out.channels = src.channels;
    const std::size_t stride = static_cast<std::size_t>(src.time) * src.channels;
    out.data.resize(count * stride);
    for (int i = 0; i < count; ++i) {
        std::memcpy(out.data.data() + i * stride, src.data.data() + order[first + i] * stride,
                    stride * sizeof(double));
    }
}

}  // namespace

Metrics evaluate_split(const ForecastModel& model, const DatasetSplit& split, int batch_size) {
    const int n = split.window_count();
    if (n == 0) {
        throw std::invalid_argument("evaluate_split: empty split");
    }
    double sse = 0.0, sae = 0.0;
    std::size_t count = 0;
    for (int first = 0; first < n; first += batch_size) {
        const int b = std::min(batch_size, n - first);
        const SeriesTensor bx = slice_windows(split.inputs, first, b);
        const SeriesTensor by = slice_windows(split.targets, first, b);
        const SeriesTensor pred = model_forward(bx, model);
        for (std::size_t i = 0; i < pred.data.size(); ++i) {
            const double d = pred.data[i] - by.data[i];
            sse += d * d;
            sae += std::abs(d);
        }
        count += pred.data.size();
    }
    return {sse / static_cast<double>(count), sae / static_cast<double>(count)};
}

TrainResult train(ForecastModel& model, const DatasetSplit& train_split,
                  const DatasetSplit& val_split, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
    if (cfg.batch_size < 1 || cfg.patience < 1 || cfg.max_epochs < 0) {
        throw std::invalid_argument("train: batch_size and patience must be >= 1");
    }
    if (train_split.window_count() == 0 || val_split.window_count() == 0) {
        throw std::invalid_argument("train: empty train or validation split");
    }

    TrainResult result;
    if (cfg.max_epochs == 0) {
        return result;
    }

    ParamTable table(model);
    AdamState adam = make_adam_state(table.total(), cfg.lr);
    std::mt19937_64 rng(cfg.seed);

    const int n_train = train_split.window_count();
    std::vector<int> order(n_train);
    std::iota(order.begin(), order.end(), 0);

    std::vector<double> best_params;
    double best_val = std::numeric_limits<double>::infinity();
    int epochs_since_best = 0;
    long total_batches = 0;
    double total_ms = 0.0;

    SeriesTensor bx, by;
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);

        double sse = 0.0;
        std::size_t elems = 0;
        const auto t0 = std::chrono::steady_clock::now();
        int batch_index = 0;
        for (int first = 0; first < n_train; first += cfg.batch_size, ++batch_index) {
            const int b = std::min(cfg.batch_size, n_train - first);
            gather_windows(train_split.inputs, order, first, b, bx);
            gather_windows(train_split.targets, order, first, b, by);
            BackwardResult bw = backward(model, bx, by, batch_index);
            adam_step(table, bw.grads, adam);
            const std::size_t n = static_cast<std::size_t>(b) * by.time * by.channels;
            sse += bw.loss * static_cast<double>(n);
            elems += n;
        }
        const auto t1 = std::chrono::steady_clock::now();
        total_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
        total_batches += batch_index;

        const double train_mse = sse / static_cast<double>(elems);
        const double val_mse = evaluate_split(model, val_split, cfg.batch_size).mse;
        result.history.push_back({epoch, train_mse, val_mse});
        if (on_epoch) {
            on_epoch(result.history.back());
        }

        if (val_mse < best_val) {
            best_val = val_mse;
            result.best_epoch = epoch;
            best_params = table.to_flat();
            epochs_since_best = 0;
        } else {
            ++epochs_since_best;
            if (epochs_since_best >= cfg.patience) {
                break;
            }
        }
    }

    if (result.best_epoch >= 0) {
        table.from_flat(best_params);
        result.best_val_mse = best_val;
    }
    result.train_ms_per_batch = total_batches > 0 ? total_ms / static_cast<double>(total_batches)
                                                  : 0.0;
    return result;
}

}  // namespace tsf
