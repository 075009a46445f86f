#pragma once

#include <stdexcept>
#include <string>

namespace spectra {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// An argument is outside its documented domain.
class ParameterError : public Error {
public:
  using Error::Error;
};

/// A dataset file is missing or cannot be decoded.
class LoadError : public Error {
public:
  using Error::Error;
};

/// Inputs disagree in shape (dimensions, counts).
class StructuralError : public Error {
public:
  using Error::Error;
};

/// The capture setup cannot support the requested computation.
class ConfigurationError : public Error {
public:
  using Error::Error;
};

} // namespace spectra
