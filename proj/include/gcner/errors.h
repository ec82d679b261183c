#ifndef GCNER_ERRORS_H_
#define GCNER_ERRORS_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gcner {

// Base of everything the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user configuration (missing inputs, inconsistent flags). CLI exit 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data. CLI exit 3.
class DataError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf detected during training. CLI exit 4.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A line of a text format that could not be read. `line` is 1-based.
class LineError : public DataError {
 public:
  LineError(const std::string& what, std::size_t line)
      : DataError(what + " (line " + std::to_string(line) + ")"),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class MalformedLine : public LineError {
 public:
  using LineError::LineError;
};

class ParseError : public LineError {
 public:
  using LineError::LineError;
};

class DimMismatch : public LineError {
 public:
  using LineError::LineError;
};

class BadHeadIndex : public LineError {
 public:
  using LineError::LineError;
};

class UnknownTag : public DataError {
 public:
  explicit UnknownTag(const std::string& label)
      : DataError("unknown tag '" + label + "'"), label_(label) {}
  const std::string& label() const { return label_; }

 private:
  std::string label_;
};

class CountMismatch : public DataError {
 public:
  using DataError::DataError;
};

class OverlapError : public DataError {
 public:
  using DataError::DataError;
};

class LengthMismatch : public DataError {
 public:
  using DataError::DataError;
};

class IndexOutOfRange : public DataError {
 public:
  using DataError::DataError;
};

class ShapeMismatch : public DataError {
 public:
  using DataError::DataError;
};

// Binary container errors (CTXE, GCNP, FUSE).
class BadMagic : public DataError {
 public:
  using DataError::DataError;
};

class BadVersion : public DataError {
 public:
  using DataError::DataError;
};

class TruncatedFile : public DataError {
 public:
  using DataError::DataError;
};

class InvalidContainer : public DataError {
 public:
  using DataError::DataError;
};

class MaskSumMismatch : public DataError {
 public:
  MaskSumMismatch(const std::string& what, long sent_id)
      : DataError(what), sent_id_(sent_id) {}
  long sent_id() const { return sent_id_; }

 private:
  long sent_id_;
};

}  // namespace gcner

#endif  // GCNER_ERRORS_H_
