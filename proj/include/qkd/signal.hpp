#pragma once

// Wavelet denoising and fixed-length window construction for single-lead ECG.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace qkd::signal {

inline constexpr std::size_t kWindowLength = 256;

enum class Wavelet { haar, db4 };

Wavelet parse_wavelet(std::string_view name);
std::string_view wavelet_name(Wavelet w);

struct RawSignal {
  std::vector<double> samples;
  std::string sample_id;
};

/// Multi-level DWT pyramid. `details` is ordered coarse to fine, so
/// details.front() pairs with `approx` and details.back() is the finest band.
struct WaveletCoeffs {
  std::vector<double> approx;
  std::vector<std::vector<double>> details;
  Wavelet wavelet = Wavelet::db4;
  int levels = 0;
  std::size_t signal_length = 0;  // length of the analyzed signal
};

struct EcgWindow {
  std::vector<double> samples;  // exactly kWindowLength values
  int label = 0;
  std::string source_id;
};

WaveletCoeffs dwt_forward(std::span<const double> signal, Wavelet wavelet, int levels);
inline WaveletCoeffs dwt_forward(const RawSignal& s, Wavelet wavelet, int levels) {
  return dwt_forward(s.samples, wavelet, levels);
}

std::vector<double> dwt_inverse(const WaveletCoeffs& coeffs);

/// Robust noise scale: median(|d|) / 0.6745.
double mad_sigma(std::span<const double> finest_details);

/// Donoho-Johnstone universal threshold sigma * sqrt(2 ln n).
double universal_threshold(double sigma, long long n);

std::vector<double> soft_threshold(std::span<const double> coeffs, double lambda);

/// Forward DWT, MAD noise estimate on the finest band, universal threshold
/// with n = signal length, soft-thresholding of every detail band, inverse DWT.
std::vector<double> denoise(std::span<const double> signal, Wavelet wavelet = Wavelet::db4,
                            int levels = 4);
inline RawSignal denoise(const RawSignal& s, Wavelet wavelet = Wavelet::db4, int levels = 4) {
  return {denoise(s.samples, wavelet, levels), s.sample_id};
}

/// Z-score normalization with population std; constant input maps to zeros.
void zscore_inplace(std::span<double> values);

std::vector<EcgWindow> make_windows(const RawSignal& signal, int label,
                                    std::size_t length, std::size_t stride);

// Window CSV: header `label,s0,...,s255`, one row per window.
std::vector<EcgWindow> read_window_csv(const std::string& path);
std::vector<EcgWindow> parse_window_csv(std::string_view text);
std::string format_window_csv(std::span<const EcgWindow> windows);
void write_window_csv(const std::string& path, std::span<const EcgWindow> windows);

}  // namespace qkd::signal
