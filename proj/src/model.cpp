#include "tsf/model.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace tsf {

using nlohmann::json;

// ============================================================================
// Construction
// ============================================================================

DecompositionMethod build_decomposition(const DecompConfig& decomp, int seq_len) {
    switch (decomp.kind) {
        case DecompConfig::Kind::kMovingAverage:
            return MovingAverage{decomp.kernel};
        case DecompConfig::Kind::kMixtureOfExperts: {
            MixtureOfExperts moe;
            moe.kernels = decomp.kernels;
            moe.gate_w = DenseMatrix(seq_len, static_cast<int>(decomp.kernels.size()));
            moe.gate_b.assign(decomp.kernels.size(), 0.0);
            return moe;
        }
        case DecompConfig::Kind::kFrequency:
            return Frequency{decomp.top_k};
    }
    throw std::logic_error("build_decomposition: unknown kind");
}

namespace {

void fill_uniform(DenseMatrix& m, int fan_in, std::mt19937_64& rng) {
    const double bound = std::sqrt(1.0 / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : m.data) {
        v = dist(rng);
    }
}

}  // namespace

ForecastModel make_forecast_model(const ModelConfig& config, std::uint64_t seed) {
    if (config.seq_len < 1 || config.horizon < 1 || config.channels < 1) {
        throw std::invalid_argument("model config requires positive seq_len, horizon, channels");
    }
    const int L = config.seq_len, H = config.horizon;
    std::mt19937_64 rng(seed);

    ForecastModel model;
    model.config = config;
    model.decomposition = build_decomposition(config.decomp, L);

    TrendHead& th = model.trend;
    th.affine = RevinAffine::identity(config.channels);
    th.w1 = DenseMatrix(L, config.trend_hidden);
    th.b1.assign(config.trend_hidden, 0.0);
    th.w2 = DenseMatrix(config.trend_hidden, config.trend_hidden);
    th.b2.assign(config.trend_hidden, 0.0);
    th.w3 = DenseMatrix(config.trend_hidden, H);
    th.b3.assign(H, 0.0);
    fill_uniform(th.w1, L, rng);
    fill_uniform(th.w2, config.trend_hidden, rng);
    fill_uniform(th.w3, config.trend_hidden, rng);

    switch (config.backbone) {
        case BackboneKind::kLinear: {
            LinearBackbone lb;
            lb.w = DenseMatrix(L, H);
            lb.b.assign(H, 0.0);
            fill_uniform(lb.w, L, rng);
            model.backbone = std::move(lb);
            break;
        }
        case BackboneKind::kMlp: {
            SeasonalHeadRMM h;
            h.w1 = DenseMatrix(L, config.rmm_hidden);
            h.b1.assign(config.rmm_hidden, 0.0);
            h.w2 = DenseMatrix(config.rmm_hidden, config.rmm_hidden);
            h.b2.assign(config.rmm_hidden, 0.0);
            h.w3 = DenseMatrix(config.rmm_hidden, H);
            h.b3.assign(H, 0.0);
            fill_uniform(h.w1, L, rng);
            fill_uniform(h.w2, config.rmm_hidden, rng);
            fill_uniform(h.w3, config.rmm_hidden, rng);
            model.backbone = std::move(h);
            break;
        }
        case BackboneKind::kShiftMlp: {
            SeasonalHeadRMSM h;
            h.w1 = DenseMatrix(L, config.rmsm_hidden1);
            h.b1.assign(config.rmsm_hidden1, 0.0);
            h.w2 = DenseMatrix(config.rmsm_hidden1 + L, config.rmsm_hidden2);
            h.b2.assign(config.rmsm_hidden2, 0.0);
            h.w3 = DenseMatrix(config.rmsm_hidden2, H);
            h.b3.assign(H, 0.0);
            fill_uniform(h.w1, L, rng);
            fill_uniform(h.w2, config.rmsm_hidden1 + L, rng);
            fill_uniform(h.w3, config.rmsm_hidden2, rng);
            model.backbone = std::move(h);
            break;
        }
    }

    if (config.decomp.kind == DecompConfig::Kind::kMixtureOfExperts &&
        config.decomp.gate_trainable) {
        auto& moe = std::get<MixtureOfExperts>(model.decomposition);
        fill_uniform(moe.gate_w, L, rng);
    }
    return model;
}

// ============================================================================
// Layout helpers
// ============================================================================

DenseMatrix channel_rows(const SeriesTensor& x) {
    DenseMatrix rows(x.batch * x.channels, x.time);
    for (int b = 0; b < x.batch; ++b) {
        for (int c = 0; c < x.channels; ++c) {
            double* out = rows.data.data() +
                          static_cast<std::size_t>(b * x.channels + c) * x.time;
            for (int t = 0; t < x.time; ++t) {
                out[t] = x.at(b, t, c);
            }
        }
    }
    return rows;
}

SeriesTensor rows_to_tensor(const DenseMatrix& rows, int batch, int channels) {
    SeriesTensor x(batch, rows.cols, channels);
    for (int b = 0; b < batch; ++b) {
        for (int c = 0; c < channels; ++c) {
            const double* in = rows.data.data() +
                               static_cast<std::size_t>(b * channels + c) * rows.cols;
            for (int t = 0; t < rows.cols; ++t) {
                x.at(b, t, c) = in[t];
            }
        }
    }
    return x;
}

// ============================================================================
// Forward passes
// ============================================================================

namespace {

void check_time_axis(const SeriesTensor& x, const DenseMatrix& w1, const char* where) {
    if (w1.rows != x.time) {
        throw std::invalid_argument(std::string(where) + ": input time length " +
                                    std::to_string(x.time) + " does not match first layer " +
                                    w1.shape_str());
    }
}

}  // namespace

SeriesTensor trend_head_forward(const SeriesTensor& xt, const TrendHead& head, double epsilon) {
    check_time_axis(xt, head.w1, "trend_head_forward");
    auto [xn, state] = revin_normalize(xt, head.affine, epsilon);

    DenseMatrix h = matmul_bias(channel_rows(xn), head.w1, head.b1);
    relu_inplace(h);
    DenseMatrix h2 = matmul_bias(h, head.w2, head.b2);
    relu_inplace(h2);
    DenseMatrix z = matmul_bias(h2, head.w3, head.b3);

    return revin_denormalize(rows_to_tensor(z, xt.batch, xt.channels), state, head.affine);
}

SeriesTensor rmm_seasonal_forward(const SeriesTensor& xs, const SeasonalHeadRMM& head) {
    check_time_axis(xs, head.w1, "rmm_seasonal_forward");
    DenseMatrix h = matmul_bias(channel_rows(xs), head.w1, head.b1);
    relu_inplace(h);
    DenseMatrix h2 = matmul_bias(h, head.w2, head.b2);
    relu_inplace(h2);
    DenseMatrix z = matmul_bias(h2, head.w3, head.b3);
    return rows_to_tensor(z, xs.batch, xs.channels);
}

SeriesTensor rmsm_seasonal_forward(const SeriesTensor& xs, const SeriesTensor& x_full,
                                   const SeasonalHeadRMSM& head) {
    check_time_axis(xs, head.w1, "rmsm_seasonal_forward");
    if (!xs.same_shape(x_full)) {
        throw std::invalid_argument("rmsm_seasonal_forward: seasonal " + xs.shape_str() +
                                    " and full input " + x_full.shape_str() + " differ in shape");
    }
    const int h1_width = head.w1.cols;
    if (head.w2.rows != h1_width + xs.time) {
        throw std::invalid_argument("rmsm_seasonal_forward: second layer expects width " +
                                    std::to_string(head.w2.rows) + ", concat produces " +
                                    std::to_string(h1_width + xs.time));
    }

    DenseMatrix h1 = matmul_bias(channel_rows(xs), head.w1, head.b1);
    relu_inplace(h1);

    // Concat(h1, X) row by row.
    const DenseMatrix full_rows = channel_rows(x_full);
    DenseMatrix cat(h1.rows, h1_width + xs.time);
    for (int r = 0; r < h1.rows; ++r) {
        std::copy(h1.row(r).begin(), h1.row(r).end(), cat.row(r).begin());
        std::copy(full_rows.row(r).begin(), full_rows.row(r).end(),
                  cat.row(r).begin() + h1_width);
    }

    DenseMatrix h2 = matmul_bias(cat, head.w2, head.b2);
    relu_inplace(h2);
    DenseMatrix z = matmul_bias(h2, head.w3, head.b3);
    return rows_to_tensor(z, xs.batch, xs.channels);
}

SeriesTensor linear_backbone_forward(const SeriesTensor& xs, const LinearBackbone& head) {
    check_time_axis(xs, head.w, "linear_backbone_forward");
    DenseMatrix z = matmul_bias(channel_rows(xs), head.w, head.b);
    return rows_to_tensor(z, xs.batch, xs.channels);
}

SeriesTensor backbone_forward(const SeriesTensor& xs, const SeriesTensor& x_full,
                              const BackboneSpec& spec) {
    return std::visit(
        [&](const auto& head) -> SeriesTensor {
            using T = std::decay_t<decltype(head)>;
            if constexpr (std::is_same_v<T, LinearBackbone>) {
                return linear_backbone_forward(xs, head);
            } else if constexpr (std::is_same_v<T, SeasonalHeadRMM>) {
                return rmm_seasonal_forward(xs, head);
            } else {
                return rmsm_seasonal_forward(xs, x_full, head);
            }
        },
        spec);
}

SeriesTensor model_forward(const SeriesTensor& x, const ForecastModel& model) {
    if (x.time != model.config.seq_len || x.channels != model.config.channels) {
        throw std::invalid_argument("model_forward: input " + x.shape_str() +
                                    " does not match model (L=" +
                                    std::to_string(model.config.seq_len) +
                                    ", C=" + std::to_string(model.config.channels) + ")");
    }
    const Decomposition d = decompose(x, model.decomposition);
    SeriesTensor yt = trend_head_forward(d.trend, model.trend, model.config.revin_epsilon);
    const SeriesTensor ys = backbone_forward(d.seasonal, x, model.backbone);
    for (std::size_t i = 0; i < yt.data.size(); ++i) {
        yt.data[i] += ys.data[i];
    }
    return yt;
}

// ============================================================================
// Parameter table
// ============================================================================

ParamTable::ParamTable(ForecastModel& model) {
    auto add_mat = [this](const std::string& name, DenseMatrix& m) {
        slots_.push_back({name, m.data.data(), m.rows, m.cols, total_, m.data.size()});
        total_ += m.data.size();
    };
    auto add_vec = [this](const std::string& name, std::vector<double>& v) {
        slots_.push_back({name, v.data(), 1, static_cast<int>(v.size()), total_, v.size()});
        total_ += v.size();
    };

    add_vec("revin.gamma", model.trend.affine.gamma);
    add_vec("revin.beta", model.trend.affine.beta);
    add_mat("trend.w1", model.trend.w1);
    add_vec("trend.b1", model.trend.b1);
    add_mat("trend.w2", model.trend.w2);
    add_vec("trend.b2", model.trend.b2);
    add_mat("trend.w3", model.trend.w3);
    add_vec("trend.b3", model.trend.b3);

    if (auto* lb = std::get_if<LinearBackbone>(&model.backbone)) {
        add_mat("backbone.linear.w", lb->w);
        add_vec("backbone.linear.b", lb->b);
    } else if (auto* rmm = std::get_if<SeasonalHeadRMM>(&model.backbone)) {
        add_mat("backbone.rmm.w1", rmm->w1);
        add_vec("backbone.rmm.b1", rmm->b1);
        add_mat("backbone.rmm.w2", rmm->w2);
        add_vec("backbone.rmm.b2", rmm->b2);
        add_mat("backbone.rmm.w3", rmm->w3);
        add_vec("backbone.rmm.b3", rmm->b3);
    } else if (auto* rmsm = std::get_if<SeasonalHeadRMSM>(&model.backbone)) {
        add_mat("backbone.rmsm.w1", rmsm->w1);
        add_vec("backbone.rmsm.b1", rmsm->b1);
        add_mat("backbone.rmsm.w2", rmsm->w2);
        add_vec("backbone.rmsm.b2", rmsm->b2);
        add_mat("backbone.rmsm.w3", rmsm->w3);
        add_vec("backbone.rmsm.b3", rmsm->b3);
    }

    if (model.config.decomp.kind == DecompConfig::Kind::kMixtureOfExperts &&
        model.config.decomp.gate_trainable) {
        auto& moe = std::get<MixtureOfExperts>(model.decomposition);
        add_mat("moe.gate.w", moe.gate_w);
        add_vec("moe.gate.b", moe.gate_b);
    }
}

const ParamSlot* ParamTable::find(std::string_view name) const {
    for (const ParamSlot& s : slots_) {
        if (s.name == name) {
            return &s;
        }
    }
    return nullptr;
}

double ParamTable::get(std::size_t flat_index) const {
    for (const ParamSlot& s : slots_) {
        if (flat_index < s.offset + s.size) {
            return s.data[flat_index - s.offset];
        }
    }
    throw std::out_of_range("ParamTable::get: index " + std::to_string(flat_index));
}

void ParamTable::set(std::size_t flat_index, double value) {
    for (const ParamSlot& s : slots_) {
        if (flat_index < s.offset + s.size) {
            s.data[flat_index - s.offset] = value;
            return;
        }
    }
    throw std::out_of_range("ParamTable::set: index " + std::to_string(flat_index));
}

std::vector<double> ParamTable::to_flat() const {
    std::vector<double> flat(total_);
    for (const ParamSlot& s : slots_) {
        std::memcpy(flat.data() + s.offset, s.data, s.size * sizeof(double));
    }
    return flat;
}

void ParamTable::from_flat(const std::vector<double>& flat) {
    if (flat.size() != total_) {
        throw std::invalid_argument("ParamTable::from_flat: got " + std::to_string(flat.size()) +
                                    " values, table holds " + std::to_string(total_));
    }
    for (const ParamSlot& s : slots_) {
        std::memcpy(s.data, flat.data() + s.offset, s.size * sizeof(double));
    }
}

// ============================================================================
// Names
// ============================================================================

std::string backbone_kind_name(BackboneKind kind) {
    switch (kind) {
        case BackboneKind::kLinear: return "linear";
        case BackboneKind::kMlp: return "rmm";
        case BackboneKind::kShiftMlp: return "rmsm";
    }
    throw std::logic_error("backbone_kind_name");
}

BackboneKind backbone_kind_from_name(const std::string& name) {
    if (name == "linear" || name == "linear-backbone") return BackboneKind::kLinear;
    if (name == "rmm") return BackboneKind::kMlp;
    if (name == "rmsm") return BackboneKind::kShiftMlp;
    throw std::invalid_argument("unknown model '" + name + "' (expected rmm, rmsm or linear-backbone)");
}

std::string decomp_kind_name(DecompConfig::Kind kind) {
    switch (kind) {
        case DecompConfig::Kind::kMovingAverage: return "ma";
        case DecompConfig::Kind::kMixtureOfExperts: return "moe";
        case DecompConfig::Kind::kFrequency: return "fd";
    }
    throw std::logic_error("decomp_kind_name");
}

DecompConfig::Kind decomp_kind_from_name(const std::string& name) {
    if (name == "ma") return DecompConfig::Kind::kMovingAverage;
    if (name == "moe") return DecompConfig::Kind::kMixtureOfExperts;
    if (name == "fd") return DecompConfig::Kind::kFrequency;
    throw std::invalid_argument("unknown decomposition '" + name + "' (expected ma, moe or fd)");
}

// ============================================================================
// Checkpointing
// ============================================================================

namespace {

constexpr char kMagic[8] = {'T', 'S', 'F', 'C', 'K', 'P', 'T', '1'};

json config_to_json(const ModelConfig& c) {
    return json{{"seq_len", c.seq_len},
                {"horizon", c.horizon},
                {"channels", c.channels},
                {"backbone", backbone_kind_name(c.backbone)},
                {"decomp",
                 {{"kind", decomp_kind_name(c.decomp.kind)},
                  {"kernel", c.decomp.kernel},
                  {"kernels", c.decomp.kernels},
                  {"top_k", c.decomp.top_k},
                  {"gate_trainable", c.decomp.gate_trainable}}},
                {"revin_epsilon", c.revin_epsilon},
                {"trend_hidden", c.trend_hidden},
                {"rmm_hidden", c.rmm_hidden},
                {"rmsm_hidden1", c.rmsm_hidden1},
                {"rmsm_hidden2", c.rmsm_hidden2}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig c;
    c.seq_len = j.at("seq_len").get<int>();
    c.horizon = j.at("horizon").get<int>();
    c.channels = j.at("channels").get<int>();
    c.backbone = backbone_kind_from_name(j.at("backbone").get<std::string>());
    const json& d = j.at("decomp");
    c.decomp.kind = decomp_kind_from_name(d.at("kind").get<std::string>());
    c.decomp.kernel = d.at("kernel").get<int>();
    c.decomp.kernels = d.at("kernels").get<std::vector<int>>();
    c.decomp.top_k = d.at("top_k").get<int>();
    c.decomp.gate_trainable = d.at("gate_trainable").get<bool>();
    c.revin_epsilon = j.at("revin_epsilon").get<double>();
    c.trend_hidden = j.at("trend_hidden").get<int>();
    c.rmm_hidden = j.at("rmm_hidden").get<int>();
    c.rmsm_hidden1 = j.at("rmsm_hidden1").get<int>();
    c.rmsm_hidden2 = j.at("rmsm_hidden2").get<int>();
    return c;
}

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t read_u32(std::ifstream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

}  // namespace

void save_checkpoint(ForecastModel& model, const std::string& path) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot open checkpoint file for writing: " + path);
        }
        out.write(kMagic, sizeof(kMagic));

        const std::string cfg = config_to_json(model.config).dump();
        write_u32(out, static_cast<std::uint32_t>(cfg.size()));
        out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));

        ParamTable table(model);
        write_u32(out, static_cast<std::uint32_t>(table.slots().size()));
        for (const ParamSlot& s : table.slots()) {
            write_u32(out, static_cast<std::uint32_t>(s.name.size()));
            out.write(s.name.data(), static_cast<std::streamsize>(s.name.size()));
            write_u32(out, static_cast<std::uint32_t>(s.rows));
            write_u32(out, static_cast<std::uint32_t>(s.cols));
            out.write(reinterpret_cast<const char*>(s.data),
                      static_cast<std::streamsize>(s.size * sizeof(double)));
        }
        if (!out) {
            throw std::runtime_error("failed while writing checkpoint: " + path);
        }
    }
    std::filesystem::rename(tmp, path);
}

ForecastModel load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open checkpoint file: " + path);
    }
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("not a model checkpoint: " + path);
    }
    const std::uint32_t cfg_len = read_u32(in);
    std::string cfg(cfg_len, '\0');
    in.read(cfg.data(), cfg_len);
    ForecastModel model = make_forecast_model(config_from_json(json::parse(cfg)), 0);

    ParamTable table(model);
    const std::uint32_t n_entries = read_u32(in);
    if (n_entries != table.slots().size()) {
        throw std::runtime_error("checkpoint holds " + std::to_string(n_entries) +
                                 " parameter tensors, model expects " +
                                 std::to_string(table.slots().size()));
    }
    for (std::uint32_t i = 0; i < n_entries; ++i) {
        const std::uint32_t name_len = read_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const std::uint32_t rows = read_u32(in);
        const std::uint32_t cols = read_u32(in);
        const ParamSlot* slot = table.find(name);
        if (slot == nullptr) {
            throw std::runtime_error("checkpoint parameter '" + name + "' unknown to this model");
        }
        if (slot->rows != static_cast<int>(rows) || slot->cols != static_cast<int>(cols)) {
            throw std::runtime_error("checkpoint parameter '" + name + "' has shape " +
                                     std::to_string(rows) + "x" + std::to_string(cols) +
                                     ", model expects " + std::to_string(slot->rows) + "x" +
                                     std::to_string(slot->cols));
        }
        in.read(reinterpret_cast<char*>(slot->data),
                static_cast<std::streamsize>(slot->size * sizeof(double)));
    }
    if (!in) {
        throw std::runtime_error("truncated checkpoint: " + path);
    }
    return model;
}

}  // namespace tsf
