#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>

#include "cwrf/data.hpp"

namespace cwrf {

// Mixed numeric/categorical binary task. Numeric features are standard
// normal, categorical ones uniform; the label thresholds a fixed random linear
// score over `informative` numeric features plus per-category offsets, then
// flips with probability `label_noise`.
struct SyntheticParams {
  std::size_t rows = 2000;
  std::size_t numeric = 8;
  std::size_t categorical = 3;
  std::size_t categories = 4;
  std::size_t informative = 4;
  double label_noise = 0.05;
  std::uint64_t seed = 1;
};

Dataset make_synthetic(const SyntheticParams& params);

// Header row of feature names plus the label column; categories and labels
// are written by name.
void write_dataset_csv(std::ostream& out, const Dataset& d);

}  // namespace cwrf
