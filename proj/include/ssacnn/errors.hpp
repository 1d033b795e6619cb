#pragma once

#include <stdexcept>
#include <string>

namespace ssacnn {

// Base for everything thrown by this library.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// I/O and format errors
class IoError : public Error {
public:
  using Error::Error;
};
class ParseError : public Error {
public:
  using Error::Error;
};
class ShapeError : public Error {
public:
  using Error::Error;
};

// Preprocessing
class DegenerateChannelError : public Error {
public:
  using Error::Error;
};
class NyquistError : public Error {
public:
  using Error::Error;
};
class EmptySegmentation : public Error {
public:
  using Error::Error;
};

// SSA
class WindowTooLarge : public Error {
public:
  using Error::Error;
};
class NumericError : public Error {
public:
  using Error::Error;
};
class DegenerateSpectrum : public Error {
public:
  using Error::Error;
};
class InvalidGroupCount : public Error {
public:
  using Error::Error;
};

// Spectral features
class NoDataError : public Error {
public:
  using Error::Error;
};

// Training / evaluation
class ClassImbalanceError : public Error {
public:
  using Error::Error;
};
class InvalidFolds : public Error {
public:
  using Error::Error;
};
class CacheError : public Error {
public:
  using Error::Error;
};

// Configuration / synthetic generator
class SpecError : public Error {
public:
  using Error::Error;
};

}  // namespace ssacnn
