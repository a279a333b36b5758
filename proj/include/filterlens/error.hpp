#pragma once

#include <stdexcept>
#include <string>

namespace filterlens {

// Base for every error raised by the library. Callers that only need a
// message can catch this; the subclasses exist so tests and the CLI can
// distinguish the failure kind.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Container is not a well-formed NFW file (magic, manifest JSON, offsets).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Byte length or element count disagrees with a declared shape.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or otherwise unusable numeric input.
class DataError : public Error {
 public:
  using Error::Error;
};

class EmptySelectionError : public Error {
 public:
  using Error::Error;
};

class KernelError : public Error {
 public:
  using Error::Error;
};

class AllSparseError : public Error {
 public:
  using Error::Error;
};

class SampleCountError : public Error {
 public:
  using Error::Error;
};

class BasisMismatchError : public Error {
 public:
  using Error::Error;
};

class EmptyPopulationError : public Error {
 public:
  using Error::Error;
};

class BinningError : public Error {
 public:
  using Error::Error;
};

}  // namespace filterlens
