#include "qkd/signal.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "qkd/error.hpp"
#include "qkd/io.hpp"

namespace qkd::signal {

namespace {

struct FilterBank {
  std::vector<double> dec_lo, dec_hi, rec_lo, rec_hi;
};

// Daubechies-4 scaling filter (8 taps), analysis ordering.
constexpr std::array<double, 8> kDb4DecLo = {
    -0.010597401784997278, 0.032883011666982945, 0.030841381835986965,
    -0.18703481171888114,  -0.027983769416983849, 0.63088076792959036,
    0.71484657055254153,   0.23037781330885523};

FilterBank make_bank(Wavelet w) {
  FilterBank fb;
  if (w == Wavelet::haar) {
    const double s = 1.0 / std::sqrt(2.0);
    fb.dec_lo = {s, s};
  } else {
    fb.dec_lo.assign(kDb4DecLo.begin(), kDb4DecLo.end());
  }
  const std::size_t f = fb.dec_lo.size();
  fb.dec_hi.resize(f);
  for (std::size_t k = 0; k < f; ++k) {
    const double sign = (k % 2 == 0) ? -1.0 : 1.0;
    fb.dec_hi[k] = sign * fb.dec_lo[f - 1 - k];
  }
  fb.rec_lo.assign(fb.dec_lo.rbegin(), fb.dec_lo.rend());
  fb.rec_hi.assign(fb.dec_hi.rbegin(), fb.dec_hi.rend());
  return fb;
}

const FilterBank& bank(Wavelet w) {
  static const FilterBank haar = make_bank(Wavelet::haar);
  static const FilterBank db4 = make_bank(Wavelet::db4);
  return w == Wavelet::haar ? haar : db4;
}

// Half-sample symmetric extension: x[-1] = x[0], x[n] = x[n-1], repeated.
std::size_t reflect(long long idx, std::size_t n) {
  const long long period = 2 * static_cast<long long>(n);
  long long m = idx % period;
  if (m < 0) m += period;
  if (m >= static_cast<long long>(n)) m = period - 1 - m;
  return static_cast<std::size_t>(m);
}

void analyze(std::span<const double> x, const FilterBank& fb, std::vector<double>& approx,
             std::vector<double>& detail) {
  const std::size_t n = x.size();
  const std::size_t f = fb.dec_lo.size();
  const std::size_t m = (n + f - 1) / 2;
  approx.assign(m, 0.0);
  detail.assign(m, 0.0);
  for (std::size_t o = 0; o < m; ++o) {
    double a = 0.0, d = 0.0;
    const long long centre = 2 * static_cast<long long>(o) + 1;
    for (std::size_t j = 0; j < f; ++j) {
      const double v = x[reflect(centre - static_cast<long long>(j), n)];
      a += fb.dec_lo[j] * v;
      d += fb.dec_hi[j] * v;
    }
    approx[o] = a;
    detail[o] = d;
  }
}

// Length of the signal synthesized from bands of length m.
std::size_t synthesized_length(std::size_t m, std::size_t f) { return 2 * m + 2 - f; }

std::vector<double> synthesize(std::span<const double> approx, std::span<const double> detail,
                               const FilterBank& fb) {
  const std::size_t m = approx.size();
  const std::size_t f = fb.rec_lo.size();
  const std::size_t half = f / 2;
  std::vector<double> out(synthesized_length(m, f), 0.0);
  for (std::size_t i = half - 1, o = 0; i < m; ++i, o += 2) {
    double even = 0.0, odd = 0.0;
    for (std::size_t j = 0; j < half; ++j) {
      even += fb.rec_lo[2 * j] * approx[i - j] + fb.rec_hi[2 * j] * detail[i - j];
      odd += fb.rec_lo[2 * j + 1] * approx[i - j] + fb.rec_hi[2 * j + 1] * detail[i - j];
    }
    out[o] = even;
    out[o + 1] = odd;
  }
  return out;
}

}  // namespace

Wavelet parse_wavelet(std::string_view name) {
  if (name == "haar") return Wavelet::haar;
  if (name == "db4") return Wavelet::db4;
  throw Error(ErrorCode::UnknownWavelet, "unsupported wavelet '" + std::string(name) + "'");
}

std::string_view wavelet_name(Wavelet w) { return w == Wavelet::haar ? "haar" : "db4"; }

WaveletCoeffs dwt_forward(std::span<const double> signal, Wavelet wavelet, int levels) {
  require(wavelet == Wavelet::haar || wavelet == Wavelet::db4, ErrorCode::UnknownWavelet,
          "unknown wavelet");
  require(levels >= 1, ErrorCode::TooShort, "levels must be >= 1");
  require(levels < 31 && signal.size() >= 2 &&
              signal.size() >= (std::size_t{1} << static_cast<unsigned>(levels)),
          ErrorCode::TooShort,
          "signal of length " + std::to_string(signal.size()) + " is too short for " +
              std::to_string(levels) + " levels");

  const auto& fb = bank(wavelet);
  WaveletCoeffs out;
  out.wavelet = wavelet;
  out.levels = levels;
  out.signal_length = signal.size();
  out.details.resize(static_cast<std::size_t>(levels));

  std::vector<double> current(signal.begin(), signal.end());
  std::vector<double> approx, detail;
  for (int lvl = 0; lvl < levels; ++lvl) {
    analyze(current, fb, approx, detail);
    // Finest band is produced first; store coarse -> fine.
    out.details[static_cast<std::size_t>(levels - 1 - lvl)] = std::move(detail);
    current = std::move(approx);
  }
  out.approx = std::move(current);
  return out;
}

std::vector<double> dwt_inverse(const WaveletCoeffs& coeffs) {
  require(coeffs.levels >= 1 && coeffs.details.size() == static_cast<std::size_t>(coeffs.levels),
          ErrorCode::MalformedCoeffs, "detail band count does not match levels");
  const auto& fb = bank(coeffs.wavelet);
  const std::size_t f = fb.rec_lo.size();

  std::vector<double> approx = coeffs.approx;
  for (std::size_t lvl = 0; lvl < coeffs.details.size(); ++lvl) {
    const auto& detail = coeffs.details[lvl];
    require(approx.size() == detail.size(), ErrorCode::MalformedCoeffs,
            "band length mismatch at level " + std::to_string(lvl));
    require(approx.size() >= f / 2, ErrorCode::MalformedCoeffs, "band too short for filter");
    const std::size_t target = lvl + 1 < coeffs.details.size() ? coeffs.details[lvl + 1].size()
                                                               : coeffs.signal_length;
    const std::size_t produced = synthesized_length(approx.size(), f);
    require(target == produced || target + 1 == produced, ErrorCode::MalformedCoeffs,
            "inconsistent band lengths at level " + std::to_string(lvl));
    auto rec = synthesize(approx, detail, fb);
    rec.resize(target);
    approx = std::move(rec);
  }
  return approx;
}

double mad_sigma(std::span<const double> finest_details) {
  require(!finest_details.empty(), ErrorCode::EmptyInput, "mad_sigma of empty sequence");
  std::vector<double> mags(finest_details.size());
  std::transform(finest_details.begin(), finest_details.end(), mags.begin(),
                 [](double d) { return std::abs(d); });
  const std::size_t n = mags.size();
  const std::size_t mid = n / 2;
  std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(mid), mags.end());
  double median = mags[mid];
  if (n % 2 == 0) {
    const double lower =
        *std::max_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (lower + median);
  }
  return median / 0.6745;
}

double universal_threshold(double sigma, long long n) {
  require(n >= 2, ErrorCode::BadN, "universal threshold needs n >= 2");
  require(sigma >= 0.0, ErrorCode::NegativeLambda, "sigma must be non-negative");
  return sigma * std::sqrt(2.0 * std::log(static_cast<double>(n)));
}

std::vector<double> soft_threshold(std::span<const double> coeffs, double lambda) {
  require(lambda >= 0.0, ErrorCode::NegativeLambda, "lambda must be non-negative");
  std::vector<double> out(coeffs.size());
  for (std::size_t i = 0; i < coeffs.size(); ++i) {
    const double mag = std::abs(coeffs[i]) - lambda;
    out[i] = mag > 0.0 ? std::copysign(mag, coeffs[i]) : 0.0;
  }
  return out;
}

std::vector<double> denoise(std::span<const double> signal, Wavelet wavelet, int levels) {
  auto coeffs = dwt_forward(signal, wavelet, levels);
  const double sigma = mad_sigma(coeffs.details.back());
  const double lambda = universal_threshold(sigma, static_cast<long long>(signal.size()));
  for (auto& band : coeffs.details) band = soft_threshold(band, lambda);
  return dwt_inverse(coeffs);
}

void zscore_inplace(std::span<double> values) {
  if (values.empty()) return;
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
    std::fill(values.begin(), values.end(), 0.0);
    return;
  }
  for (double& v : values) v = (v - mean) / sd;
}

std::vector<EcgWindow> make_windows(const RawSignal& signal, int label, std::size_t length,
                                    std::size_t stride) {
  require(stride >= 1, ErrorCode::WindowTooLong, "stride must be >= 1");
  require(length >= 1 && length <= signal.samples.size(), ErrorCode::WindowTooLong,
          "window length " + std::to_string(length) + " exceeds signal length " +
              std::to_string(signal.samples.size()));
  require(label == 0 || label == 1, ErrorCode::BadLabel, "label must be 0 or 1");
  std::vector<EcgWindow> out;
  for (std::size_t off = 0; off + length <= signal.samples.size(); off += stride) {
    EcgWindow w;
    w.samples.assign(signal.samples.begin() + static_cast<std::ptrdiff_t>(off),
                     signal.samples.begin() + static_cast<std::ptrdiff_t>(off + length));
    zscore_inplace(w.samples);
    w.label = label;
    w.source_id = signal.sample_id;
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<EcgWindow> parse_window_csv(std::string_view text) {
  const auto lines = io::split_lines(text);
  require(!lines.empty(), ErrorCode::ParseError, "window CSV is empty");
  const auto header = io::split_fields(lines[0]);
  require(header.size() == kWindowLength + 1 && header[0] == "label", ErrorCode::ParseError,
          "row 1: expected header 'label,s0,...,s255'");
  for (std::size_t i = 1; i < header.size(); ++i) {
    require(header[i] == "s" + std::to_string(i - 1), ErrorCode::ParseError,
            "row 1: unexpected header field '" + std::string(header[i]) + "'");
  }
  std::vector<EcgWindow> out;
  out.reserve(lines.size() - 1);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const std::string ctx = "row " + std::to_string(r + 1);
    const auto fields = io::split_fields(lines[r]);
    require(fields.size() == kWindowLength + 1, ErrorCode::ParseError,
            ctx + ": expected " + std::to_string(kWindowLength + 1) + " fields, got " +
                std::to_string(fields.size()));
    EcgWindow w;
    const auto label = io::parse_int(fields[0], ctx);
    require(label == 0 || label == 1, ErrorCode::ParseError, ctx + ": label must be 0 or 1");
    w.label = static_cast<int>(label);
    w.samples.resize(kWindowLength);
    for (std::size_t i = 0; i < kWindowLength; ++i) w.samples[i] = io::parse_double(fields[i + 1], ctx);
    w.source_id = "row" + std::to_string(r - 1);
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<EcgWindow> read_window_csv(const std::string& path) {
  return parse_window_csv(io::read_file(path));
}

std::string format_window_csv(std::span<const EcgWindow> windows) {
  std::string out = "label";
  for (std::size_t i = 0; i < kWindowLength; ++i) out += ",s" + std::to_string(i);
  out += '\n';
  for (const auto& w : windows) {
    require(w.samples.size() == kWindowLength, ErrorCode::ShapeMismatch,
            "window must hold exactly 256 samples");
    out += std::to_string(w.label);
    for (double v : w.samples) {
      out += ',';
      out += io::format_double(v);
    }
    out += '\n';
  }
  return out;
}

void write_window_csv(const std::string& path, std::span<const EcgWindow> windows) {
  io::write_file(path, format_window_csv(windows));
}

}  // namespace qkd::signal
