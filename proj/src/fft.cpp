#include "tsf/fft.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace tsf {

namespace {

int smallest_prime_factor(int n) {
    for (int p = 2; p * p <= n; ++p) {
        if (n % p == 0) {
            return p;
        }
    }
    return n;
}

// Recursive mixed-radix Cooley-Tukey. A prime length splits into N
// subproblems of size 1, which reduces the combine step to the direct DFT.
void fft_rec(const std::vector<std::complex<double>>& in, std::vector<std::complex<double>>& out) {
    const int n = static_cast<int>(in.size());
    if (n == 1) {
        out[0] = in[0];
        return;
    }
    const int p = smallest_prime_factor(n);
    const int m = n / p;

    std::vector<std::complex<double>> sub_in(m), sub_out(m);
    std::vector<std::complex<double>> parts(static_cast<std::size_t>(p) * m);
    for (int r = 0; r < p; ++r) {
        for (int j = 0; j < m; ++j) {
            sub_in[j] = in[static_cast<std::size_t>(j) * p + r];
        }
        fft_rec(sub_in, sub_out);
        for (int j = 0; j < m; ++j) {
            parts[static_cast<std::size_t>(r) * m + j] = sub_out[j];
        }
    }

    const double base = -2.0 * std::numbers::pi / n;
    for (int k = 0; k < n; ++k) {
        std::complex<double> acc{0.0, 0.0};
        for (int r = 0; r < p; ++r) {
            const std::complex<double> tw = std::polar(1.0, base * (static_cast<double>(r) * k));
            acc += tw * parts[static_cast<std::size_t>(r) * m + (k % m)];
        }
        out[k] = acc;
    }
}

}  // namespace

std::vector<std::complex<double>> fft(std::vector<std::complex<double>> x) {
    if (x.empty()) {
        return x;
    }
    std::vector<std::complex<double>> out(x.size());
    fft_rec(x, out);
    return out;
}

std::vector<std::complex<double>> ifft(std::vector<std::complex<double>> x) {
    const std::size_t n = x.size();
    for (auto& v : x) {
        v = std::conj(v);
    }
    std::vector<std::complex<double>> out = fft(std::move(x));
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& v : out) {
        v = std::conj(v) * inv;
    }
    return out;
}

ComplexSpectrum rfft(const std::vector<double>& x) {
    const int n = static_cast<int>(x.size());
    if (n < 2) {
        throw std::invalid_argument("rfft: input too short (" + std::to_string(n) +
                                    " samples, need at least 2)");
    }
    std::vector<std::complex<double>> cx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        cx[i] = {x[i], 0.0};
    }
    std::vector<std::complex<double>> full = fft(std::move(cx));

    ComplexSpectrum z;
    z.original_length = n;
    z.bins.assign(full.begin(), full.begin() + (n / 2 + 1));
    return z;
}

std::vector<double> irfft(const ComplexSpectrum& z, int n) {
    const int expected = n / 2 + 1;
    if (n < 2 || static_cast<int>(z.bins.size()) != expected) {
        throw std::invalid_argument("irfft: spectrum with " + std::to_string(z.bins.size()) +
                                    " bins is inconsistent with output length " +
                                    std::to_string(n) + " (expected " + std::to_string(expected) +
                                    " bins)");
    }
    std::vector<std::complex<double>> full(n);
    for (int m = 0; m < expected; ++m) {
        full[m] = z.bins[m];
    }
    for (int m = expected; m < n; ++m) {
        full[m] = std::conj(z.bins[n - m]);
    }
    std::vector<std::complex<double>> time = ifft(std::move(full));
    std::vector<double> out(n);
    for (int t = 0; t < n; ++t) {
        out[t] = time[t].real();
    }
    return out;
}

}  // namespace tsf
