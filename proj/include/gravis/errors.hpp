#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace gravis {

// Base class for all library failures. name() is the stable identifier the
// CLI prints on exit code 1; what() carries the full detail.
class Error : public std::runtime_error {
 public:
  Error(std::string name, const std::string& detail)
      : std::runtime_error(name + ": " + detail), name_(std::move(name)) {}

  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

#define GRAVIS_DEFINE_ERROR(NAME)                                         \
  class NAME : public Error {                                             \
   public:                                                                \
    explicit NAME(const std::string& detail) : Error(#NAME, detail) {}    \
  }

GRAVIS_DEFINE_ERROR(ZeroNormVector);
GRAVIS_DEFINE_ERROR(InvalidTemperature);
GRAVIS_DEFINE_ERROR(NotAPositivePair);
GRAVIS_DEFINE_ERROR(EmptyPositiveSet);
GRAVIS_DEFINE_ERROR(EmptyNegativeSet);
GRAVIS_DEFINE_ERROR(ShapeMismatch);
GRAVIS_DEFINE_ERROR(ImageTooSmall);
GRAVIS_DEFINE_ERROR(InvalidN);
GRAVIS_DEFINE_ERROR(StaleCache);
GRAVIS_DEFINE_ERROR(EpochOutOfRange);
GRAVIS_DEFINE_ERROR(CorruptCheckpoint);
GRAVIS_DEFINE_ERROR(VersionMismatch);
GRAVIS_DEFINE_ERROR(DatasetTooSmall);
GRAVIS_DEFINE_ERROR(NonFiniteLoss);
GRAVIS_DEFINE_ERROR(KTooLarge);
GRAVIS_DEFINE_ERROR(LabelMismatch);
GRAVIS_DEFINE_ERROR(OutOfRange);
GRAVIS_DEFINE_ERROR(IoFailure);
GRAVIS_DEFINE_ERROR(ConfigError);

#undef GRAVIS_DEFINE_ERROR

}  // namespace gravis
