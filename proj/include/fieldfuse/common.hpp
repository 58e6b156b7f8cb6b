#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fieldfuse {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Error taxonomy. The CLI maps the first group to exit code 2 and
// NumericalError / InfeasibleConstraintError to exit code 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class GeometryError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

// Rank-deficient H (operator construction).
class OperatorError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class InfeasibleConstraintError : public NumericalError {
public:
    InfeasibleConstraintError(const std::string& msg, std::string qoi)
        : NumericalError(msg), qoi_(std::move(qoi)) {}
    const std::string& qoi() const { return qoi_; }

private:
    std::string qoi_;
};

// Field with explicit missing markers.
using MaskedField = std::vector<std::optional<double>>;

MaskedField to_masked(const Vec& v);

}  // namespace fieldfuse

namespace fieldfuse {

struct FlightCondition {
    double mach = 0.0;
    double reynolds = 0.0;  // absolute, e.g. 5.7e6
    double alpha_deg = 0.0;
};

enum class Fidelity { Simulation, Measurement };

const char* fidelity_name(Fidelity f);

// Worker count for parallel loops; honours FIELDFUSE_THREADS.
int worker_threads();

}  // namespace fieldfuse

#include <functional>

namespace fieldfuse {

// Runs body(i) for i in [0, count) on up to worker_threads() threads.
// Each index is handled exactly once; callers write to disjoint slots.
void parallel_for(int count, const std::function<void(int)>& body);

}  // namespace fieldfuse
