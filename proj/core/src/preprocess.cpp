#include "repcount/preprocess.hpp"

#include <cmath>
#include <string>

#include "repcount/error.hpp"

namespace repcount {

SensorSequence pad_to_length(const SensorSequence& x, std::size_t length) {
  if (x.length() > length) {
    throw InputError("pad_to_length: sample '" + x.id + "' has " + std::to_string(x.length()) +
                     " rows, longer than the padding length " + std::to_string(length));
  }
  SensorSequence out{x.id, x.rate_hz, Matrix(length, x.channels(), 0.0)};
  const auto src = x.values.data();
  std::copy(src.begin(), src.end(), out.values.data().begin());
  return out;
}

SensorSequence zscore_channels(const SensorSequence& x) {
  SensorSequence out = x;
  const std::size_t n = x.length();
  for (std::size_t c = 0; c < x.channels(); ++c) {
    double mean = 0.0;
    for (std::size_t t = 0; t < n; ++t) mean += x.values(t, c);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t t = 0; t < n; ++t) var += (x.values(t, c) - mean) * (x.values(t, c) - mean);
    var /= static_cast<double>(n);
    const double sd = std::sqrt(var);
    for (std::size_t t = 0; t < n; ++t) {
      out.values(t, c) = sd > 0.0 ? (x.values(t, c) - mean) / sd : 0.0;
    }
  }
  return out;
}

Matrix raw_windows(const Matrix& values, std::size_t w) {
  if (w == 0 || values.rows() % w != 0) {
    throw ShapeError("raw_windows: length " + std::to_string(values.rows()) + " not divisible by w=" +
                     std::to_string(w));
  }
  // Row-major storage already lays out consecutive rows contiguously.
  return Matrix(values.rows() / w, w * values.cols(), values.storage());
}

}  // namespace repcount
