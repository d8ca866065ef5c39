#pragma once

#include <stdexcept>
#include <string>

namespace advm {

enum class Errc {
  shape_mismatch,
  zero_gradient,
  placement_out_of_bounds,
  label_out_of_range,
  empty_dataset,
  corrupt_file,
  version_mismatch,
  bad_magic,
  length_mismatch,
  too_few,
  class_count_mismatch,
  unknown_parameter,
  invalid_argument,
  io,
};

inline const char* errc_name(Errc code) {
  switch (code) {
    case Errc::shape_mismatch: return "ShapeMismatch";
    case Errc::zero_gradient: return "ZeroGradient";
    case Errc::placement_out_of_bounds: return "PlacementOutOfBounds";
    case Errc::label_out_of_range: return "LabelOutOfRange";
    case Errc::empty_dataset: return "EmptyDataset";
    case Errc::corrupt_file: return "CorruptFile";
    case Errc::version_mismatch: return "VersionMismatch";
    case Errc::bad_magic: return "BadMagic";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::too_few: return "TooFew";
    case Errc::class_count_mismatch: return "ClassCountMismatch";
    case Errc::unknown_parameter: return "UnknownParameter";
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::io: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace advm
