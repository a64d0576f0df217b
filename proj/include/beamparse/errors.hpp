#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace beamparse {

// Bad input data: malformed files, misaligned corpora, underivable trees.
// The CLI maps these to exit code 1.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConllParseError : public DataError {
 public:
  ConllParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class AlignmentError : public DataError {
 public:
  AlignmentError(std::size_t sentence, const std::string& what)
      : DataError("sentence " + std::to_string(sentence) + ": " + what),
        sentence_(sentence) {}

  std::size_t sentence() const { return sentence_; }

 private:
  std::size_t sentence_;
};

class OracleError : public DataError {
 public:
  using DataError::DataError;
};

class ModelFormatError : public DataError {
 public:
  using DataError::DataError;
};

// Raised when training produces NaN/Inf values.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace beamparse
