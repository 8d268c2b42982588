#pragma once

#include <stdexcept>
#include <string>

namespace wsikit {

/// Base class for every recoverable failure raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An input violated a documented precondition (bad argument, empty set, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unreadable file content. Carries the file and byte offset when known.
class DataError : public Error {
 public:
  DataError(const std::string& file, long long offset, const std::string& what)
      : Error(file + (offset >= 0 ? " @ byte " + std::to_string(offset) : std::string()) + ": " + what),
        file_(file),
        offset_(offset) {}
  const std::string& file() const { return file_; }
  long long offset() const { return offset_; }

 private:
  std::string file_;
  long long offset_;
};

#define WSIKIT_DEFINE_ERROR(Name, Base) \
  class Name : public Base {            \
   public:                              \
    using Base::Base;                   \
  };

// stain_norm
WSIKIT_DEFINE_ERROR(InsufficientTissue, Error)
WSIKIT_DEFINE_ERROR(DegenerateStains, Error)
// slide_pipeline
WSIKIT_DEFINE_ERROR(ExtractionTooLarge, Error)
WSIKIT_DEFINE_ERROR(CropTooLarge, Error)
// embed_diag
WSIKIT_DEFINE_ERROR(InsufficientFeatures, Error)
WSIKIT_DEFINE_ERROR(SingleCluster, Error)
WSIKIT_DEFINE_ERROR(PerplexityTooLarge, Error)
WSIKIT_DEFINE_ERROR(TooManyPoints, Error)
// mini_dino / linear_probe
WSIKIT_DEFINE_ERROR(ShapeMismatch, Error)
WSIKIT_DEFINE_ERROR(DimensionMismatch, Error)
WSIKIT_DEFINE_ERROR(TooManySkipped, Error)
// synth_slides
WSIKIT_DEFINE_ERROR(InvalidSpec, Error)
// config / cli
WSIKIT_DEFINE_ERROR(UsageError, Error)

#undef WSIKIT_DEFINE_ERROR

}  // namespace wsikit
