#pragma once

#include <stdexcept>
#include <string>

namespace covilearn {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor extents that do not fit the operation.
class DimensionError : public Error {
public:
    using Error::Error;
};

// An argument outside its documented domain (non-positive stride, NaN, ...).
class ArgumentError : public Error {
public:
    using Error::Error;
};

// Malformed serialized data (weights container, DICOM-lite, CSV, images).
class FormatError : public Error {
public:
    using Error::Error;
};

// Well-formed input that uses a feature outside the supported subset.
class UnsupportedFeatureError : public Error {
public:
    using Error::Error;
};

// Filesystem failures: missing files, unwritable outputs.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace covilearn
