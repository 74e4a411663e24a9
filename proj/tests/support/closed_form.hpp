#pragma once

#include <cstddef>

namespace qkd::testing {

// Closed-form per-layer sizes, written out independently of the layer code.
inline std::size_t conv(std::size_t cin, std::size_t cout, std::size_t k) { return cout * cin * k + cout; }
inline std::size_t bn(std::size_t c) { return 2 * c; }
inline std::size_t dense(std::size_t in, std::size_t out) { return in * out + out; }

inline std::size_t cnn1d_formula(std::size_t w) {
  return conv(1, 16 * w, 5) + bn(16 * w) + conv(16 * w, 32 * w, 5) + bn(32 * w) +
         conv(32 * w, 64 * w, 5) + bn(64 * w) + conv(64 * w, 64 * w, 5) + bn(64 * w) +
         dense(64 * w, 32 * w) + dense(32 * w, 1);
}

inline std::size_t resnet1d_formula() {
  std::size_t n = conv(1, 64, 7) + bn(64);
  const std::size_t ch[4] = {64, 128, 256, 512};
  std::size_t cin = 64;
  for (std::size_t c : ch) {
    // First block of each stage (projection when the width changes).
    n += conv(cin, c, 3) + bn(c) + conv(c, c, 3) + bn(c);
    if (cin != c) n += conv(cin, c, 1) + bn(c);
    n += 2 * (conv(c, c, 3) + bn(c));
    cin = c;
  }
  return n + dense(512, 1);
}

inline std::size_t autoencoder_formula() {
  const std::size_t encoder = conv(1, 16, 5) + conv(16, 32, 5) + conv(32, 64, 5) + dense(256, 6);
  const std::size_t decoder = dense(6, 256) + conv(64, 32, 5) + conv(32, 16, 5) + conv(16, 1, 5);
  return encoder + decoder;
}

}  // namespace qkd::testing
