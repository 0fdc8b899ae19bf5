#pragma once

#include <stdexcept>
#include <string>

namespace modeshift {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

class InvalidParameter : public Error {
public:
    using Error::Error;
};

class InvalidCost : public Error {
public:
    using Error::Error;
};

class MissingZone : public Error {
public:
    using Error::Error;
};

class MissingAttributes : public Error {
public:
    using Error::Error;
};

class NoAvailableMode : public Error {
public:
    using Error::Error;
};

class UndefinedMetric : public Error {
public:
    using Error::Error;
};

class DegeneratePosterior : public Error {
public:
    using Error::Error;
};

class Divergence : public Error {
public:
    using Error::Error;
};

/// A mode with infinite attributes ended up chosen, or tables disagree in shape.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

// Data-file errors. Each class is distinct so callers can report precisely.
class DataError : public Error {
public:
    using Error::Error;
};

class MissingFile : public DataError {
public:
    using DataError::DataError;
};

class SchemaMismatch : public DataError {
public:
    using DataError::DataError;
};

class DanglingKey : public DataError {
public:
    using DataError::DataError;
};

class NegativeValue : public DataError {
public:
    using DataError::DataError;
};

}  // namespace modeshift
