#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace subxfer {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad user input: missing files, inconsistent corpora, invalid parameters.
/// The command-line front end maps these to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A malformed artifact file. Carries the 1-based line number when known.
class FormatError : public ValidationError {
 public:
  FormatError(const std::string& what, std::size_t line = 0)
      : ValidationError(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A sub-word whose span straddles a word boundary, or a segmentation whose
/// word count disagrees with the word-level corpus.
class ProjectionError : public Error {
 public:
  using Error::Error;
};

}  // namespace subxfer
