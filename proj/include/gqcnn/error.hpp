#pragma once

#include <stdexcept>
#include <string>

namespace gqcnn {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents or ranks that do not fit an operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented precondition (non-scalar backward, empty input, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Invalid model, augmentation, training or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File contents that do not follow the expected binary/text layout.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Read/write failures, including truncated files.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Non-finite gradients or losses during optimization.
class TrainingError : public Error {
 public:
  using Error::Error;
};

class SplitError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

}  // namespace gqcnn
