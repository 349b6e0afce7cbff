#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ecc {

// Numeric values double as CLI exit codes for the first four entries.
enum class ErrorCode : int {
    Generic = 1,
    InfeasibleBudget = 2,
    IterationLimit = 3,
    Oracle = 4,
    InvalidArgument = 5,
    Io = 6,
    Shape = 7,
    NonFinite = 8,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

class InvalidArgument : public Error {
public:
    explicit InvalidArgument(const std::string& what) : Error(ErrorCode::InvalidArgument, what) {}
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error(ErrorCode::Shape, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorCode::Io, what) {}
};

class NonFiniteError : public Error {
public:
    NonFiniteError(std::size_t layer, const std::string& what)
        : Error(ErrorCode::NonFinite, "layer " + std::to_string(layer) + ": " + what), layer_(layer) {}
    std::size_t layer() const noexcept { return layer_; }

private:
    std::size_t layer_;
};

class InfeasibleBudgetError : public Error {
public:
    InfeasibleBudgetError(double budget, double minimum)
        : Error(ErrorCode::InfeasibleBudget,
                "energy budget " + std::to_string(budget) + " J is below the minimal achievable estimate " +
                    std::to_string(minimum) + " J"),
          budget_(budget), minimum_(minimum) {}
    double budget() const noexcept { return budget_; }
    double minimum() const noexcept { return minimum_; }

private:
    double budget_;
    double minimum_;
};

}  // namespace ecc
