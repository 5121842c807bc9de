#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lprobe {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad magic, unsupported version, malformed header.
class FormatError : public Error {
public:
    using Error::Error;
};

// Payload shorter or longer than the header declares.
class LengthError : public Error {
public:
    using Error::Error;
};

// Labels, catalogs or dimensions that contradict each other.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

class DegenerateInputError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Non-finite values met during optimization; carries the offending iterate.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, std::vector<double> iterate)
        : Error(what), iterate_(std::move(iterate)) {}

    const std::vector<double>& iterate() const noexcept { return iterate_; }

private:
    std::vector<double> iterate_;
};

}  // namespace lprobe
