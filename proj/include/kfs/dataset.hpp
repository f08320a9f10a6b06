#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace kfs {

/// Design matrix (rows are observations) and response. The response is
/// centered on construction; the removed mean is kept in `y_mean`.
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  double y_mean = 0.0;
  bool centered = false;

  Dataset() = default;

  Dataset(Eigen::MatrixXd features, Eigen::VectorXd response, bool center = true)
      : X(std::move(features)), y(std::move(response)) {
    if (X.rows() < 1 || X.cols() < 1) throw std::invalid_argument("dataset needs n >= 1 and p >= 1");
    if (y.size() != X.rows()) {
      throw std::invalid_argument("response length " + std::to_string(y.size()) +
                                  " does not match row count " + std::to_string(X.rows()));
    }
    if (!X.allFinite() || !y.allFinite()) throw std::invalid_argument("dataset contains non-finite values");
    if (center) {
      y_mean = y.mean();
      y.array() -= y_mean;
      centered = true;
    }
  }

  Eigen::Index n() const { return X.rows(); }
  Eigen::Index p() const { return X.cols(); }
};

}  // namespace kfs
