#include "tsf/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

namespace tsf {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

std::string trimmed(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    std::size_t e = s.find_last_not_of(" \t");
    if (b == std::string::npos) {
        return "";
    }
    return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, int line_no, int column_no) {
    const std::string cell = trimmed(raw);
    double v = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last || cell.empty() || !std::isfinite(v)) {
        throw std::runtime_error("csv line " + std::to_string(line_no) + ", column " +
                                 std::to_string(column_no) + " ('" + cell +
                                 "'): not a finite number");
    }
    return v;
}

}  // namespace

RawDataset load_csv(const std::string& path, bool has_date_column) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open dataset file: " + path);
    }
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("csv file is empty (no header row): " + path);
    }
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
    std::vector<std::string> header = split_fields(line);
    const int first_channel = has_date_column ? 1 : 0;
    if (static_cast<int>(header.size()) <= first_channel) {
        throw std::runtime_error("csv header has no value columns: " + path);
    }

    RawDataset data;
    data.channels = static_cast<int>(header.size()) - first_channel;
    for (std::size_t i = first_channel; i < header.size(); ++i) {
        data.channel_names.push_back(trimmed(header[i]));
    }

    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> fields = split_fields(line);
        if (static_cast<int>(fields.size()) != data.channels + first_channel) {
            throw std::runtime_error("csv line " + std::to_string(line_no) + " has " +
                                     std::to_string(fields.size()) + " fields, expected " +
                                     std::to_string(data.channels + first_channel));
        }
        if (has_date_column) {
            data.timestamps.push_back(fields[0]);
        }
        for (int c = 0; c < data.channels; ++c) {
            data.values.push_back(parse_cell(fields[first_channel + c], line_no,
                                             first_channel + c + 1));
        }
        ++data.rows;
    }
    return data;
}

void save_csv(const RawDataset& data, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw std::runtime_error("cannot open file for writing: " + path);
    }
    const bool dated = !data.timestamps.empty();
    if (dated) {
        out << "date";
    }
    for (int c = 0; c < data.channels; ++c) {
        if (dated || c > 0) {
            out << ',';
        }
        out << data.channel_names[c];
    }
    out << '\n';

    char buf[40];
    for (int r = 0; r < data.rows; ++r) {
        if (dated) {
            out << data.timestamps[r];
        }
        for (int c = 0; c < data.channels; ++c) {
            if (dated || c > 0) {
                out << ',';
            }
            std::snprintf(buf, sizeof(buf), "%.17g", data.value(r, c));
            out << buf;
        }
        out << '\n';
    }
    if (!out) {
        throw std::runtime_error("failed while writing: " + path);
    }
}

namespace {

const char* role_name(DatasetSplit::Role role) {
    switch (role) {
        case DatasetSplit::Role::kTrain: return "train";
        case DatasetSplit::Role::kVal: return "validation";
        case DatasetSplit::Role::kTest: return "test";
    }
    return "?";
}

DatasetSplit build_segment(const RawDataset& raw, DatasetSplit::Role role, int begin, int end,
                           int L, int H) {
    const int len = end - begin;
    const int n_windows = len - (L + H) + 1;
    if (n_windows < 1) {
        throw std::invalid_argument(std::string("chronological_split: ") + role_name(role) +
                                    " segment has " + std::to_string(len) +
                                    " rows but needs at least L+H = " + std::to_string(L + H) +
                                    " for one window");
    }
    DatasetSplit split;
    split.role = role;
    split.inputs = SeriesTensor(n_windows, L, raw.channels);
    split.targets = SeriesTensor(n_windows, H, raw.channels);
    for (int w = 0; w < n_windows; ++w) {
        for (int t = 0; t < L; ++t) {
            for (int c = 0; c < raw.channels; ++c) {
                split.inputs.at(w, t, c) = raw.value(begin + w + t, c);
            }
        }
        for (int t = 0; t < H; ++t) {
            for (int c = 0; c < raw.channels; ++c) {
                split.targets.at(w, t, c) = raw.value(begin + w + L + t, c);
            }
        }
    }
    return split;
}

}  // namespace

std::array<DatasetSplit, 3> chronological_split(const RawDataset& raw, SplitRatios ratios, int L,
                                                int H) {
    if (L < 1 || H < 1) {
        throw std::invalid_argument("chronological_split: L and H must be positive");
    }
    if (ratios.train <= 0 || ratios.val <= 0 || ratios.test <= 0) {
        throw std::invalid_argument("chronological_split: ratios must be positive");
    }
    // Guard against representation error in the ratio sum (0.7 + 0.2 is a hair
    // below 0.9) so the boundaries land where the decimal ratios say.
    const int b1 = static_cast<int>(std::floor(ratios.train * raw.rows + 1e-6));
    const int b2 = static_cast<int>(std::floor((ratios.train + ratios.val) * raw.rows + 1e-6));
    return {build_segment(raw, DatasetSplit::Role::kTrain, 0, b1, L, H),
            build_segment(raw, DatasetSplit::Role::kVal, b1, b2, L, H),
            build_segment(raw, DatasetSplit::Role::kTest, b2, raw.rows, L, H)};
}

RawDataset generate_synthetic(const SyntheticSpec& spec) {
    if (spec.n < 1 || spec.channels < 1) {
        throw std::invalid_argument("synthetic spec requires n >= 1 and channels >= 1");
    }
    for (const auto& s : spec.sinusoids) {
        if (s.period < 2.0) {
            throw std::invalid_argument("synthetic sinusoid periods must be >= 2 steps");
        }
    }
    if (spec.noise_sigma < 0.0) {
        throw std::invalid_argument("synthetic noise_sigma must be >= 0");
    }

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
    // One phase per (sinusoid, channel), drawn before any noise.
    std::vector<double> phases(spec.sinusoids.size() * spec.channels);
    for (std::size_t j = 0; j < spec.sinusoids.size(); ++j) {
        for (int c = 0; c < spec.channels; ++c) {
            phases[j * spec.channels + c] = phase_dist(rng);
        }
    }
    std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0 ? spec.noise_sigma : 1.0);

    RawDataset data;
    data.rows = spec.n;
    data.channels = spec.channels;
    data.values.resize(static_cast<std::size_t>(spec.n) * spec.channels);
    for (int c = 0; c < spec.channels; ++c) {
        data.channel_names.push_back("ch" + std::to_string(c));
    }
    for (int t = 0; t < spec.n; ++t) {
        for (int c = 0; c < spec.channels; ++c) {
            double v = spec.trend_slope * t;
            for (std::size_t j = 0; j < spec.sinusoids.size(); ++j) {
                const auto& s = spec.sinusoids[j];
                v += s.amplitude * std::sin(2.0 * std::numbers::pi * t / s.period +
                                            phases[j * spec.channels + c]);
            }
            if (spec.noise_sigma > 0.0) {
                v += noise(rng);
            }
            data.value(t, c) = v;
        }
    }
    return data;
}

ChannelScaler standardize_in_place(RawDataset& data, double train_fraction) {
    const int n_fit = static_cast<int>(std::floor(train_fraction * data.rows));
    if (n_fit < 2) {
        throw std::invalid_argument("standardize: train segment of " + std::to_string(n_fit) +
                                    " rows is too short to fit statistics");
    }
    ChannelScaler scaler;
    scaler.mean.assign(data.channels, 0.0);
    scaler.std.assign(data.channels, 0.0);
    for (int c = 0; c < data.channels; ++c) {
        double mu = 0.0;
        for (int r = 0; r < n_fit; ++r) {
            mu += data.value(r, c);
        }
        mu /= n_fit;
        double var = 0.0;
        for (int r = 0; r < n_fit; ++r) {
            const double d = data.value(r, c) - mu;
            var += d * d;
        }
        var /= n_fit;
        double sd = std::sqrt(var);
        if (sd <= 0.0) {
            sd = 1.0;  // constant channel maps to zeros
        }
        scaler.mean[c] = mu;
        scaler.std[c] = sd;
        for (int r = 0; r < data.rows; ++r) {
            data.value(r, c) = (data.value(r, c) - mu) / sd;
        }
    }
    return scaler;
}

}  // namespace tsf
