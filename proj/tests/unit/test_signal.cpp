#include <cmath>
#include <numbers>
#include <numeric>

#include "doctest.h"
#include "qkd/error.hpp"
#include "qkd/rng.hpp"
#include "qkd/signal.hpp"

using namespace qkd;
using namespace qkd::signal;

namespace {

std::vector<double> random_signal(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(n);
  for (auto& v : x) v = rng.normal();
  return x;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected qkd::Error");
  return ErrorCode::Empty;
}

}  // namespace

TEST_CASE("haar pair on [1,1]") {
  const std::vector<double> x{1.0, 1.0};
  auto c = dwt_forward(x, Wavelet::haar, 1);
  REQUIRE(c.approx.size() == 1);
  REQUIRE(c.details.size() == 1);
  CHECK(c.approx[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(std::abs(c.details[0][0]) < 1e-15);

  WaveletCoeffs hand;
  hand.approx = {std::sqrt(2.0)};
  hand.details = {{0.0}};
  hand.wavelet = Wavelet::haar;
  hand.levels = 1;
  hand.signal_length = 2;
  auto back = dwt_inverse(hand);
  REQUIRE(back.size() == 2);
  CHECK(back[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(back[1] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("haar detail sign convention is (x0 - x1)/sqrt2") {
  const std::vector<double> x{3.0, 1.0};
  auto c = dwt_forward(x, Wavelet::haar, 1);
  CHECK(c.approx[0] == doctest::Approx(4.0 / std::sqrt(2.0)));
  CHECK(c.details[0][0] == doctest::Approx(2.0 / std::sqrt(2.0)));
}

TEST_CASE("constant signal has vanishing details") {
  for (auto w : {Wavelet::haar, Wavelet::db4}) {
    std::vector<double> x(64, 2.5);
    auto c = dwt_forward(x, w, 2);
    for (const auto& band : c.details)
      for (double d : band) CHECK(std::abs(d) < 1e-12);
  }
}

TEST_CASE("perfect reconstruction, both wavelets, levels 1-4") {
  for (auto w : {Wavelet::haar, Wavelet::db4}) {
    for (int levels = 1; levels <= 4; ++levels) {
      for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto x = random_signal(256, seed * 31 + static_cast<std::uint64_t>(levels));
        auto back = dwt_inverse(dwt_forward(x, w, levels));
        CHECK(max_abs_diff(back, x) < 1e-9);
      }
    }
  }
}

TEST_CASE("perfect reconstruction on odd and short lengths") {
  for (auto w : {Wavelet::haar, Wavelet::db4}) {
    for (std::size_t n : {2u, 3u, 5u, 17u, 31u, 100u, 257u, 1001u}) {
      const int levels = n >= 16 ? 4 : 1;
      auto x = random_signal(n, n);
      auto back = dwt_inverse(dwt_forward(x, w, levels));
      CHECK(max_abs_diff(back, x) < 1e-9);
    }
  }
}

TEST_CASE("all-zero coefficients reconstruct zeros") {
  auto c = dwt_forward(random_signal(256, 3), Wavelet::db4, 4);
  std::fill(c.approx.begin(), c.approx.end(), 0.0);
  for (auto& b : c.details) std::fill(b.begin(), b.end(), 0.0);
  for (double v : dwt_inverse(c)) CHECK(v == 0.0);
}

TEST_CASE("dwt errors") {
  const std::vector<double> x(8, 1.0);
  CHECK(code_of([&] { dwt_forward(x, Wavelet::db4, 4); }) == ErrorCode::TooShort);
  CHECK(code_of([&] { dwt_forward(std::vector<double>{1.0}, Wavelet::haar, 1); }) ==
        ErrorCode::TooShort);
  CHECK(code_of([&] { dwt_forward(x, Wavelet::haar, 0); }) == ErrorCode::TooShort);
  CHECK(code_of([] { parse_wavelet("sym8"); }) == ErrorCode::UnknownWavelet);
  CHECK(parse_wavelet("haar") == Wavelet::haar);

  auto c = dwt_forward(random_signal(64, 1), Wavelet::db4, 2);
  auto bad = c;
  bad.details[1].pop_back();
  CHECK(code_of([&] { dwt_inverse(bad); }) == ErrorCode::MalformedCoeffs);
  bad = c;
  bad.approx.push_back(0.0);
  CHECK(code_of([&] { dwt_inverse(bad); }) == ErrorCode::MalformedCoeffs);
  bad = c;
  bad.levels = 3;
  CHECK(code_of([&] { dwt_inverse(bad); }) == ErrorCode::MalformedCoeffs);
}

TEST_CASE("mad_sigma") {
  CHECK(mad_sigma(std::vector<double>{1, -1, 2, -2, 3}) == doctest::Approx(2.0 / 0.6745));
  CHECK(mad_sigma(std::vector<double>{2.0 / 0.6745 * 0.0, 0.0, 0.0}) == 0.0);
  CHECK(mad_sigma(std::vector<double>{-1.5}) == doctest::Approx(1.5 / 0.6745));
  // Even count: mean of the two middle magnitudes.
  CHECK(mad_sigma(std::vector<double>{1, -4, 2, 3}) == doctest::Approx(2.5 / 0.6745));
  CHECK(code_of([] { mad_sigma(std::vector<double>{}); }) == ErrorCode::EmptyInput);
}

TEST_CASE("universal_threshold") {
  CHECK(universal_threshold(1.0, 1024) == doctest::Approx(3.7233).epsilon(1e-4));
  CHECK(universal_threshold(1.0, 1024) == doctest::Approx(std::sqrt(2.0 * std::log(1024.0))));
  CHECK(universal_threshold(0.0, 500) == 0.0);
  CHECK(universal_threshold(2.0, 8) == doctest::Approx(4.0789).epsilon(1e-4));
  CHECK(code_of([] { universal_threshold(1.0, 1); }) == ErrorCode::BadN);
}

TEST_CASE("soft_threshold definition and properties") {
  auto out = soft_threshold(std::vector<double>{3.0, -0.5, -3.0}, 1.0);
  CHECK(out[0] == 2.0);
  CHECK(out[1] == 0.0);
  CHECK(out[2] == -2.0);
  CHECK(code_of([] { soft_threshold(std::vector<double>{1.0}, -0.1); }) ==
        ErrorCode::NegativeLambda);

  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    const double c = rng.uniform(-5, 5);
    const double lam = rng.uniform(0, 3);
    const auto pos = soft_threshold(std::vector<double>{c}, lam)[0];
    const auto neg = soft_threshold(std::vector<double>{-c}, lam)[0];
    CHECK(neg == -pos);
    CHECK(std::abs(pos) <= std::abs(c));
  }
}

TEST_CASE("denoise leaves clean signals alone") {
  std::vector<double> constant(256, 1.7);
  CHECK(max_abs_diff(denoise(constant), constant) < 1e-9);
  std::vector<double> zero(256, 0.0);
  CHECK(max_abs_diff(denoise(zero), zero) == 0.0);

  auto once = denoise(constant);
  CHECK(max_abs_diff(denoise(once), once) < 1e-6);
}

TEST_CASE("denoise reduces MSE of a noisy sinusoid for most seeds") {
  const std::size_t n = 256;
  std::vector<double> clean(n);
  for (std::size_t i = 0; i < n; ++i)
    clean[i] = std::sin(2.0 * std::numbers::pi * 4.0 * static_cast<double>(i) / n);
  int improved = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed + 100);
    std::vector<double> noisy(n);
    for (std::size_t i = 0; i < n; ++i) noisy[i] = clean[i] + 0.2 * rng.normal();
    auto den = denoise(noisy);
    double in_mse = 0.0, out_mse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      in_mse += (noisy[i] - clean[i]) * (noisy[i] - clean[i]);
      out_mse += (den[i] - clean[i]) * (den[i] - clean[i]);
    }
    if (out_mse < in_mse) ++improved;
  }
  CHECK(improved > 10);
}

TEST_CASE("make_windows tiling and normalization") {
  RawSignal s{random_signal(512, 5), "rec1"};
  auto w = make_windows(s, 1, 256, 256);
  REQUIRE(w.size() == 2);
  CHECK(w[1].source_id == "rec1");
  CHECK(w[0].label == 1);
  for (const auto& win : w) {
    const double mean = std::accumulate(win.samples.begin(), win.samples.end(), 0.0) / 256.0;
    double var = 0.0;
    for (double v : win.samples) var += (v - mean) * (v - mean);
    CHECK(std::abs(mean) < 1e-9);
    CHECK(std::abs(std::sqrt(var / 256.0) - 1.0) < 1e-6);
  }

  RawSignal s300{random_signal(300, 6), "r"};
  CHECK(make_windows(s300, 0, 256, 256).size() == 1);
  CHECK(make_windows(s300, 0, 256, 10).size() == 5);

  RawSignal flat{std::vector<double>(256, 4.0), "flat"};
  auto fw = make_windows(flat, 0, 256, 1);
  REQUIRE(fw.size() == 1);
  for (double v : fw[0].samples) CHECK(v == 0.0);

  CHECK(code_of([&] { make_windows(RawSignal{random_signal(100, 1), "x"}, 0, 256, 1); }) ==
        ErrorCode::WindowTooLong);
}

TEST_CASE("window CSV parse and errors") {
  EcgWindow w{std::vector<double>(256, 0.25), 1, "a"};
  w.samples[3] = -1e-7;
  std::vector<EcgWindow> ws{w, w};
  ws[1].label = 0;
  auto text = format_window_csv(ws);
  CHECK(text.rfind("label,s0,s1,", 0) == 0);
  auto back = parse_window_csv(text);
  REQUIRE(back.size() == 2);
  CHECK(back[0].samples == w.samples);
  CHECK(back[1].label == 0);

  auto bad = text;
  bad.replace(bad.find("\n0,") + 3, 4, "abc,");
  try {
    parse_window_csv(bad);
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    CHECK(std::string(e.what()).find("row 3") != std::string::npos);
  }
  CHECK(code_of([] { parse_window_csv("label,s0\n1,0.5\n"); }) == ErrorCode::ParseError);
}
