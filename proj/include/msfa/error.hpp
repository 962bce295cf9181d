#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace msfa {

enum class Errc {
  invalid_argument,
  zero_dimension,
  unreadable_file,
  unsupported_bit_depth,
  too_small_input,
  unknown_descriptor,
  empty_dataset,
  schema_violation,
  unknown_category,
  malformed_record,
  undefined_correlation,
  space_mismatch,
  no_overlap,
  corrupt_header,
  payload_length_mismatch,
  duplicate_key,
  invalid_plan,
  io_error,
};

inline std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::zero_dimension: return "zero-dimension";
    case Errc::unreadable_file: return "unreadable-file";
    case Errc::unsupported_bit_depth: return "unsupported-bit-depth";
    case Errc::too_small_input: return "too-small-input";
    case Errc::unknown_descriptor: return "unknown-descriptor";
    case Errc::empty_dataset: return "empty-dataset";
    case Errc::schema_violation: return "schema-violation";
    case Errc::unknown_category: return "unknown-category";
    case Errc::malformed_record: return "malformed-record";
    case Errc::undefined_correlation: return "undefined-correlation";
    case Errc::space_mismatch: return "space-mismatch";
    case Errc::no_overlap: return "no-overlap";
    case Errc::corrupt_header: return "corrupt-header";
    case Errc::payload_length_mismatch: return "payload-length-mismatch";
    case Errc::duplicate_key: return "duplicate-key";
    case Errc::invalid_plan: return "invalid-plan";
    case Errc::io_error: return "io-error";
  }
  return "unknown";
}

// Toolkit failure with a machine-readable `code()`.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace msfa
