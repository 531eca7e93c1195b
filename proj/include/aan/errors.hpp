#pragma once

#include <stdexcept>
#include <string>

namespace aan {

// Base of every error raised by the library. Callers that only care about
// "something in the pipeline failed" can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration value; the message names the offending field.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Tensor or vector dimensions disagree with what an operation expects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed corpus, trial list, report, or checkpoint file.
class ParseError : public Error {
 public:
  using Error::Error;
};

// A loss or gradient became non-finite.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Cosine similarity requested for a zero-norm vector.
class DegenerateVectorError : public Error {
 public:
  using Error::Error;
};

}  // namespace aan
