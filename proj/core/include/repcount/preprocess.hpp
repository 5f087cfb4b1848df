#pragma once

#include <cstddef>

#include "repcount/matrix.hpp"
#include "repcount/types.hpp"

namespace repcount {

/// Zero-pads `x` at the end to exactly `length` rows. Throws InputError when x is longer.
SensorSequence pad_to_length(const SensorSequence& x, std::size_t length);

/// Per-channel standardization over time; constant channels become zero.
SensorSequence zscore_channels(const SensorSequence& x);

/// Reshapes an N x d sequence into (N / w) x (w * d) non-overlapping raw windows.
Matrix raw_windows(const Matrix& values, std::size_t w);

}  // namespace repcount
