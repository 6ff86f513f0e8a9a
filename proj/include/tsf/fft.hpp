#ifndef TSF_FFT_HPP
#define TSF_FFT_HPP

#include <complex>
#include <vector>

namespace tsf {

/**
 * One-sided spectrum of a real signal: floor(n/2)+1 bins for a length-n input.
 * Bin m holds sum_t x[t] * exp(-2*pi*i*m*t/n).
 */
struct ComplexSpectrum {
    std::vector<std::complex<double>> bins;
    int original_length = 0;

    double amplitude(int m) const { return std::abs(bins[m]); }
};

/** Forward transform of a complex sequence (mixed-radix, any length). */
std::vector<std::complex<double>> fft(std::vector<std::complex<double>> x);

/** Inverse transform, normalized by 1/N. */
std::vector<std::complex<double>> ifft(std::vector<std::complex<double>> x);

/**
 * Real-input transform keeping bins 0..floor(n/2).
 * Throws std::invalid_argument for inputs shorter than 2 samples.
 */
ComplexSpectrum rfft(const std::vector<double>& x);

/**
 * Inverse of rfft for a length-n real signal; the missing bins are implied by
 * conjugate symmetry. Throws when the bin count is inconsistent with n.
 */
std::vector<double> irfft(const ComplexSpectrum& z, int n);

}  // namespace tsf

#endif  // TSF_FFT_HPP
