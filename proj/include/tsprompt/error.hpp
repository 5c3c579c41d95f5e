#pragma once

#include <stdexcept>
#include <string>

namespace tsprompt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptyInput : public Error {
public:
    using Error::Error;
};

class InvalidSeries : public Error {
public:
    using Error::Error;
};

class SeriesTooShort : public Error {
public:
    using Error::Error;
};

class InvalidStats : public Error {
public:
    using Error::Error;
};

class UnknownFrequency : public Error {
public:
    using Error::Error;
};

} // namespace tsprompt
