#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace bn2mf {

// Dense row-major storage throughout; the data sizes of interest
// (up to ~10,000 x 100) fit comfortably in memory.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Raised when an iterate, objective, or responsibility stops being finite.
// The message names the offending term or entry.
class NumericalError : public std::runtime_error {
  public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace bn2mf
