#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sim2real/core/errors.hpp"
#include "sim2real/core/parallel.hpp"
#include "sim2real/imaging/png_io.hpp"
#include "sim2real/imaging/raster.hpp"
#include "sim2real/scenegen/manifest.hpp"

namespace sim2real::evalkit {

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;
};

/// Arithmetic mean and sample (n - 1) standard deviation; std is 0 for a single value.
inline Aggregate aggregate(const std::vector<double>& values) {
  if (values.empty()) throw ParameterError("aggregate: empty list");
  const double n = double(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  // Rounding in sum / n can step one ulp outside the data range for near-constant lists.
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double mean = std::clamp(sum / n, *lo, *hi);
  if (values.size() == 1) return {mean, 0.0};
  // Two-pass with compensation term keeps the result stable when the spread is tiny.
  double ss = 0.0, comp = 0.0;
  for (double v : values) {
    ss += (v - mean) * (v - mean);
    comp += v - mean;
  }
  const double var = (ss - comp * comp / n) / (n - 1.0);
  return {mean, std::sqrt(std::max(0.0, var))};
}

struct EvalFailure {
  std::size_t row = 0;
  std::string message;
};

/// Per-row outcome in manifest order. Rows that could not be evaluated hold NaN
/// and are listed in `failures`; they are excluded from aggregates but reported.
struct EvalResult {
  std::vector<double> ious;
  std::vector<EvalFailure> failures;
  std::size_t empty_mask_cases = 0;

  std::vector<double> valid_ious() const {
    std::vector<double> v;
    for (double x : ious)
      if (!std::isnan(x)) v.push_back(x);
    return v;
  }
};

/// Runs `predict_mask(image) -> BinaryMask` on every row and scores it against
/// the row's ground-truth mask. Rows are processed in parallel; results keep
/// manifest order.
template <typename Predictor>
EvalResult evaluate(const Predictor& predict_mask, const scenegen::DatasetManifest& manifest,
                    unsigned threads = default_threads()) {
  const std::size_t n = manifest.size();
  EvalResult r;
  r.ious.assign(n, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::string> errors(n);
  std::vector<char> empty(n, 0);
  parallel_for(
      n,
      [&](std::size_t i) {
        try {
          const auto image = imaging::read_image(manifest.image_path(i));
          const auto truth = imaging::read_mask(manifest.mask_path(i));
          const imaging::BinaryMask pred = predict_mask(image);
          empty[i] = truth.count() == 0;
          r.ious[i] = imaging::iou(pred, truth);
        } catch (const std::exception& e) {
          errors[i] = e.what();
          if (errors[i].empty()) errors[i] = "unknown error";
        }
      },
      threads);
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i].empty()) r.failures.push_back({i, errors[i]});
    r.empty_mask_cases += empty[i];
  }
  return r;
}

}  // namespace sim2real::evalkit
