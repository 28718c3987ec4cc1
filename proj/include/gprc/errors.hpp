#pragma once

#include <stdexcept>
#include <string>

namespace gprc {

// Base class for all library errors.
class Error : public std::runtime_error {
  public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// A required function/derivative value (or frozen field) was not supplied.
class MissingFieldError : public Error {
  public:
    explicit MissingFieldError(const std::string& what_missing)
        : Error("missing field: " + what_missing) {}
};

// Point / operator / hyperparameter dimensions disagree.
class DimensionError : public Error {
  public:
    explicit DimensionError(const std::string& msg) : Error("dimension mismatch: " + msg) {}
};

// Requested derivative order exceeds the supported maximum.
class OrderError : public Error {
  public:
    explicit OrderError(const std::string& msg) : Error("derivative order: " + msg) {}
};

class ArgumentError : public Error {
  public:
    explicit ArgumentError(const std::string& msg) : Error(msg) {}
};

// Covariance factorization failed even after jitter.
class IllConditionedError : public Error {
  public:
    IllConditionedError(const std::string& msg, double smallest_pivot)
        : Error(msg + " (smallest pivot " + std::to_string(smallest_pivot) + ")"),
          smallest_pivot_(smallest_pivot) {}

    double smallest_pivot() const { return smallest_pivot_; }

  private:
    double smallest_pivot_;
};

// Every hyperparameter restart failed.
class TrainingError : public Error {
  public:
    explicit TrainingError(const std::string& msg) : Error("training failed: " + msg) {}
};

// Time integrator produced a non-finite state.
class SolverBlowupError : public Error {
  public:
    SolverBlowupError(const std::string& msg, std::size_t step_index)
        : Error(msg + " at step " + std::to_string(step_index)), step_index_(step_index) {}

    std::size_t step_index() const { return step_index_; }

  private:
    std::size_t step_index_;
};

// Field estimates do not share an evaluation grid.
class GridError : public Error {
  public:
    explicit GridError(const std::string& msg) : Error("grid mismatch: " + msg) {}
};

}  // namespace gprc
