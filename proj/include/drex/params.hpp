#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "drex/linalg.hpp"

namespace drex {

// Ordered collection of named dense tensors. Iteration follows insertion
// order so optimizer passes and serialization never depend on hash order.
class NamedTensors {
 public:
  Mat& add(const std::string& name, Mat value);
  Mat& at(const std::string& name);
  const Mat& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  bool empty() const { return names_.empty(); }

  void set_zero();
  NamedTensors zeros_like() const;
  // Same names, order, and shapes.
  bool congruent(const NamedTensors& other) const;
  std::size_t coefficient_count() const;

 private:
  std::size_t index_of(const std::string& name) const;

  std::vector<std::string> names_;
  std::vector<Mat> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace drex
