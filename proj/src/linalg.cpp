#include "drex/linalg.hpp"

#include <cmath>

namespace drex {

std::string shape_str(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Vec project(const Mat& p, const Vec& b, const Vec& x) {
  if (p.rows() != x.rows()) {
    throw DimensionError("project: matrix is " + shape_str(p) + " but input has length " +
                         std::to_string(x.rows()));
  }
  if (p.cols() != b.rows()) {
    throw DimensionError("project: matrix is " + shape_str(p) + " but bias has length " +
                         std::to_string(b.rows()));
  }
  return p.transpose() * x + b;
}

Vec softmax(const Vec& scores) {
  if (scores.size() == 0) throw ContractError("softmax: empty input");
  if (!scores.allFinite()) throw NumericError("softmax: non-finite input");
  const double m = scores.maxCoeff();
  Vec e = (scores.array() - m).exp();
  return e / e.sum();
}

Mat elementwise(Activation kind, const Mat& x) {
  if (!x.allFinite()) throw NumericError("elementwise: non-finite input");
  switch (kind) {
    case Activation::kSigmoid:
      return x.unaryExpr([](double v) { return sigmoid(v); });
    case Activation::kTanh:
      return x.unaryExpr([](double v) { return std::tanh(v); });
    case Activation::kRelu:
      return x.cwiseMax(0.0);
  }
  throw ContractError("elementwise: unknown activation");
}

}  // namespace drex
