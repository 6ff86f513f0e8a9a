#include "tsf/tensor.hpp"

#include <algorithm>
#include <stdexcept>

namespace tsf {

std::string SeriesTensor::shape_str() const {
    return "(" + std::to_string(batch) + "," + std::to_string(time) + "," +
           std::to_string(channels) + ")";
}

std::string DenseMatrix::shape_str() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
}

void matmul_bias_into(const DenseMatrix& x, const DenseMatrix& w, const std::vector<double>& b,
                      DenseMatrix& out) {
    if (x.cols != w.rows) {
        throw std::invalid_argument("matmul_bias: cannot multiply " + x.shape_str() + " by " +
                                    w.shape_str());
    }
    if (!b.empty() && static_cast<int>(b.size()) != w.cols) {
        throw std::invalid_argument("matmul_bias: bias length " + std::to_string(b.size()) +
                                    " does not match output width " + std::to_string(w.cols));
    }
    out.rows = x.rows;
    out.cols = w.cols;
    out.data.assign(static_cast<std::size_t>(x.rows) * w.cols, 0.0);

    const int n = x.rows, k = x.cols, m = w.cols;
    for (int i = 0; i < n; ++i) {
        double* oi = out.data.data() + static_cast<std::size_t>(i) * m;
        if (!b.empty()) {
            std::copy(b.begin(), b.end(), oi);
        }
        const double* xi = x.data.data() + static_cast<std::size_t>(i) * k;
        for (int l = 0; l < k; ++l) {
            const double a = xi[l];
            const double* wl = w.data.data() + static_cast<std::size_t>(l) * m;
            for (int j = 0; j < m; ++j) {
                oi[j] += a * wl[j];
            }
        }
    }
}

DenseMatrix matmul_bias(const DenseMatrix& x, const DenseMatrix& w, const std::vector<double>& b) {
    DenseMatrix out;
    matmul_bias_into(x, w, b, out);
    return out;
}

void accumulate_weight_grads(const DenseMatrix& x, const DenseMatrix& dy, DenseMatrix& dw,
                             std::vector<double>& db) {
    const int n = x.rows, k = x.cols, m = dy.cols;
    for (int i = 0; i < n; ++i) {
        const double* xi = x.data.data() + static_cast<std::size_t>(i) * k;
        const double* gi = dy.data.data() + static_cast<std::size_t>(i) * m;
        for (int l = 0; l < k; ++l) {
            const double a = xi[l];
            double* dwl = dw.data.data() + static_cast<std::size_t>(l) * m;
            for (int j = 0; j < m; ++j) {
                dwl[j] += a * gi[j];
            }
        }
        for (int j = 0; j < m; ++j) {
            db[j] += gi[j];
        }
    }
}

void input_grad_into(const DenseMatrix& dy, const DenseMatrix& w, DenseMatrix& dx) {
    // dx[i][j] = sum_l dy[i][l] * w[j][l]; both inner spans are contiguous.
    const int n = dy.rows, m = dy.cols, k = w.rows;
    dx.rows = n;
    dx.cols = k;
    dx.data.assign(static_cast<std::size_t>(n) * k, 0.0);
    for (int i = 0; i < n; ++i) {
        const double* gi = dy.data.data() + static_cast<std::size_t>(i) * m;
        double* di = dx.data.data() + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < k; ++j) {
            const double* wj = w.data.data() + static_cast<std::size_t>(j) * m;
            double s = 0.0;
            for (int l = 0; l < m; ++l) {
                s += gi[l] * wj[l];
            }
            di[j] = s;
        }
    }
}

MatmulGrads matmul_bias_backward(const DenseMatrix& x, const DenseMatrix& w,
                                 const DenseMatrix& dy) {
    if (dy.rows != x.rows || dy.cols != w.cols) {
        throw std::invalid_argument("matmul_bias_backward: upstream gradient " + dy.shape_str() +
                                    " does not match output of " + x.shape_str() + " * " +
                                    w.shape_str());
    }
    MatmulGrads g;
    g.dw = DenseMatrix(w.rows, w.cols);
    g.db.assign(w.cols, 0.0);
    accumulate_weight_grads(x, dy, g.dw, g.db);
    input_grad_into(dy, w, g.dx);
    return g;
}

DenseMatrix relu(const DenseMatrix& x) {
    DenseMatrix out = x;
    relu_inplace(out);
    return out;
}

SeriesTensor relu(const SeriesTensor& x) {
    SeriesTensor out = x;
    for (double& v : out.data) {
        v = std::max(0.0, v);
    }
    return out;
}

void relu_inplace(DenseMatrix& x) {
    for (double& v : x.data) {
        v = std::max(0.0, v);
    }
}

void relu_backward_inplace(const DenseMatrix& activation, DenseMatrix& grad) {
    for (std::size_t i = 0; i < grad.data.size(); ++i) {
        if (activation.data[i] <= 0.0) {
            grad.data[i] = 0.0;
        }
    }
}

}  // namespace tsf
