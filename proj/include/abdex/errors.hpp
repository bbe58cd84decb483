#pragma once

#include <stdexcept>
#include <string>

namespace abdex {

// Base for all engine errors. Every specific failure below maps to a
// rejected operation; callers may catch the base type at module borders.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct UnknownNodeError : Error {
    using Error::Error;
};
struct InvariantViolationError : Error {
    using Error::Error;
};
// Every edge-shape breach is also an invariant violation.
struct InvalidEdgeError : InvariantViolationError {
    using InvariantViolationError::InvariantViolationError;
};
struct UngroundedEvidenceError : Error {
    using Error::Error;
};
struct ConfidenceOutOfRangeError : Error {
    using Error::Error;
};
struct EmptyLevelError : Error {
    using Error::Error;
};
struct NotAHypothesisError : Error {
    using Error::Error;
};
struct ParseError : Error {
    using Error::Error;
};
struct EmptyInputError : Error {
    using Error::Error;
};
struct RefinementEmptyError : Error {
    using Error::Error;
};
struct UnmatchedHypothesisError : Error {
    using Error::Error;
};
struct ValidationError : Error {
    using Error::Error;
};
struct CorruptTraceError : Error {
    using Error::Error;
};
struct CognitionFailureError : Error {
    using Error::Error;
};

}  // namespace abdex
