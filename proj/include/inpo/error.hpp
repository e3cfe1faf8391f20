#pragma once

#include <stdexcept>
#include <string>

namespace inpo {

// Edge-list / feature-file parsing failures, carries the offending line.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Structural violations: self-loops, out-of-range node ids, bad splits.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor shape mismatches.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// NaN/Inf encountered, log of non-positive, diverging training.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad configuration keys/values, unknown ablation ids, missing influence map.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// API contract violations: non-scalar loss, empty edge sets, dim mismatches
// between model and data.
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Metric undefined for the given input (single-class AUC, no positives).
struct MetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Checkpoint file corrupt or incompatible with the requested config.
struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Filesystem failures.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace inpo
