#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wfem {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class InvalidData : public Error {
public:
    using Error::Error;
};

class OutOfDomain : public Error {
public:
    using Error::Error;
};

class SingularPreconditioner : public Error {
public:
    using Error::Error;
};

/// Raised when the coefficient of u_tt stops being bounded away from zero.
class DegenerateState : public Error {
public:
    DegenerateState(const std::string& what, double margin)
        : Error(what), margin_(margin) {}
    double margin() const noexcept { return margin_; }

private:
    double margin_;
};

class FixedPointDivergence : public Error {
public:
    FixedPointDivergence(const std::string& what, std::size_t iterations, double last_change)
        : Error(what), iterations_(iterations), last_change_(last_change) {}
    std::size_t iterations() const noexcept { return iterations_; }
    double last_change() const noexcept { return last_change_; }

private:
    std::size_t iterations_;
    double last_change_;
};

class FitFailure : public Error {
public:
    FitFailure(const std::string& what, double residual) : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

}  // namespace wfem
