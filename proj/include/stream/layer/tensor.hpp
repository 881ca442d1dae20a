#pragma once

#include <cstddef>
#include <string>

#include <Eigen/Dense>

namespace stream::layer {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Named view of one parameter tensor, row-major.
struct ParamRef {
  std::string name;
  double* data;
  std::size_t rows;
  std::size_t cols;

  std::size_t size() const { return rows * cols; }
};

inline ParamRef param_ref(std::string name, Matrix& m) {
  return {std::move(name), m.data(), static_cast<std::size_t>(m.rows()),
          static_cast<std::size_t>(m.cols())};
}

inline ParamRef param_ref(std::string name, Vector& v) {
  return {std::move(name), v.data(), static_cast<std::size_t>(v.size()), 1};
}

}  // namespace stream::layer
