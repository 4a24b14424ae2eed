#pragma once

#include <stdexcept>
#include <string>

namespace sfs {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class InvalidModel : public Error {
public:
    using Error::Error;
};

/// Raised when conditioning on an observation whose probability is at most kProbTol.
class ZeroProbabilityObservation : public Error {
public:
    using Error::Error;
};

class SingularCoreTests : public Error {
public:
    using Error::Error;
};

class EnumerationTooLarge : public Error {
public:
    using Error::Error;
};

class DegenerateMixture : public Error {
public:
    using Error::Error;
};

class InfeasibleTarget : public Error {
public:
    InfeasibleTarget(const std::string& what, double distance)
        : Error(what), distance_(distance) {}
    double distance() const { return distance_; }

private:
    double distance_;
};

class EmptySet : public Error {
public:
    using Error::Error;
};

class DimensionUnsupported : public Error {
public:
    using Error::Error;
};

}  // namespace sfs
