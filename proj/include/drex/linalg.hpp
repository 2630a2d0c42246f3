#pragma once

#include <Eigen/Dense>

#include "drex/common.hpp"

namespace drex {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

enum class Activation { kSigmoid, kTanh, kRelu };

// Numerically stable logistic; exact 0.0 / 1.0 in the saturated tails.
double sigmoid(double x);

// P^T x + b. Dimension mismatches throw with both shapes named.
Vec project(const Mat& p, const Vec& b, const Vec& x);

// Max-shifted softmax over a non-empty vector; entries land in (0, 1] and
// sum to 1 within roundoff. Non-finite inputs are rejected.
Vec softmax(const Vec& scores);

Mat elementwise(Activation kind, const Mat& x);

std::string shape_str(const Mat& m);

}  // namespace drex
