#pragma once

#include <stdexcept>
#include <string>

namespace topogrid {

// Caller broke a documented precondition (programming error, not bad data).
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

// Valid request that cannot be satisfied (empty candidate set, missing file, ...).
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed textual input; message carries file / row / column context.
struct ParseError : DomainError {
  using DomainError::DomainError;
};

// Malformed or incomplete binary payload.
struct FormatError : DomainError {
  using DomainError::DomainError;
};

// Binary payload readable but written by an incompatible format revision.
struct VersionError : FormatError {
  using FormatError::FormatError;
};

// Action whose substation configuration fails validation.
struct RejectedAction : DomainError {
  using DomainError::DomainError;
};

}  // namespace topogrid
