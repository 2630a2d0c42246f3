#include "drex/params.hpp"

namespace drex {

Mat& NamedTensors::add(const std::string& name, Mat value) {
  if (index_.count(name) != 0) throw ContractError("NamedTensors: duplicate tensor '" + name + "'");
  index_.emplace(name, names_.size());
  names_.push_back(name);
  tensors_.push_back(std::move(value));
  return tensors_.back();
}

std::size_t NamedTensors::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("NamedTensors: unknown tensor '" + name + "'");
  return it->second;
}

Mat& NamedTensors::at(const std::string& name) { return tensors_[index_of(name)]; }

const Mat& NamedTensors::at(const std::string& name) const { return tensors_[index_of(name)]; }

bool NamedTensors::contains(const std::string& name) const { return index_.count(name) != 0; }

void NamedTensors::set_zero() {
  for (Mat& t : tensors_) t.setZero();
}

NamedTensors NamedTensors::zeros_like() const {
  NamedTensors out;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    out.add(names_[i], Mat::Zero(tensors_[i].rows(), tensors_[i].cols()));
  }
  return out;
}

bool NamedTensors::congruent(const NamedTensors& other) const {
  if (names_ != other.names_) return false;
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (tensors_[i].rows() != other.tensors_[i].rows() ||
        tensors_[i].cols() != other.tensors_[i].cols()) {
      return false;
    }
  }
  return true;
}

std::size_t NamedTensors::coefficient_count() const {
  std::size_t n = 0;
  for (const Mat& t : tensors_) n += static_cast<std::size_t>(t.size());
  return n;
}

}  // namespace drex
