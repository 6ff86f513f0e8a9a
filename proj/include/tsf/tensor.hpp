#ifndef TSF_TENSOR_HPP
#define TSF_TENSOR_HPP

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace tsf {

/**
 * Dense rank-3 tensor of doubles, shape (batch, time, channels).
 *
 * Storage is lexicographic in (b, t, c): channel index varies fastest.
 * This layout is fixed so that serialized values are bit-stable.
 */
struct SeriesTensor {
    std::vector<double> data;
    int batch = 0;
    int time = 0;
    int channels = 0;

    SeriesTensor() = default;
    SeriesTensor(int b, int t, int c)
        : data(static_cast<std::size_t>(b) * t * c, 0.0), batch(b), time(t), channels(c) {}

    std::size_t index(int b, int t, int c) const {
        return (static_cast<std::size_t>(b) * time + t) * channels + c;
    }
    double& at(int b, int t, int c) { return data[index(b, t, c)]; }
    double at(int b, int t, int c) const { return data[index(b, t, c)]; }

    std::size_t size() const { return data.size(); }
    bool same_shape(const SeriesTensor& o) const {
        return batch == o.batch && time == o.time && channels == o.channels;
    }
    std::string shape_str() const;
};

/** Row-major dense matrix. */
struct DenseMatrix {
    std::vector<double> data;
    int rows = 0;
    int cols = 0;

    DenseMatrix() = default;
    DenseMatrix(int r, int c) : data(static_cast<std::size_t>(r) * c, 0.0), rows(r), cols(c) {}

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

    std::span<double> row(int r) { return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }
    std::span<const double> row(int r) const { return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }

    std::string shape_str() const;
};

/**
 * out = x * w + b, with x (n x d_in), w (d_in x d_out) and b broadcast over rows.
 * Throws std::invalid_argument naming both shapes when inner dimensions differ.
 */
DenseMatrix matmul_bias(const DenseMatrix& x, const DenseMatrix& w, const std::vector<double>& b);

/** In-place variant; `out` is resized as needed. */
void matmul_bias_into(const DenseMatrix& x, const DenseMatrix& w, const std::vector<double>& b,
                      DenseMatrix& out);

/** Gradients of matmul_bias given upstream dL/dout. */
struct MatmulGrads {
    DenseMatrix dx;
    DenseMatrix dw;
    std::vector<double> db;
};
MatmulGrads matmul_bias_backward(const DenseMatrix& x, const DenseMatrix& w, const DenseMatrix& dy);

/** dw += x^T * dy and db += column sums of dy (accumulating forms used by training). */
void accumulate_weight_grads(const DenseMatrix& x, const DenseMatrix& dy, DenseMatrix& dw,
                             std::vector<double>& db);
/** dx = dy * w^T. */
void input_grad_into(const DenseMatrix& dy, const DenseMatrix& w, DenseMatrix& dx);

/** Elementwise max(0, x). */
DenseMatrix relu(const DenseMatrix& x);
SeriesTensor relu(const SeriesTensor& x);
void relu_inplace(DenseMatrix& x);

/** Zeroes grad entries where the stored activation is <= 0 (gradient at exactly 0 is 0). */
void relu_backward_inplace(const DenseMatrix& activation, DenseMatrix& grad);

}  // namespace tsf

#endif  // TSF_TENSOR_HPP
