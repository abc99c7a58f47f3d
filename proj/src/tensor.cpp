#include "ssae/tensor.hpp"

#include <algorithm>
#include <stdexcept>

namespace ssae {

Tensor::Tensor(std::vector<std::size_t> shape_, double fill) : shape(std::move(shape_)) {
  data.assign(shape_numel(shape), fill);
}

void Tensor::fill(double v) { std::fill(data.begin(), data.end(), v); }

std::size_t shape_numel(std::span<const std::size_t> shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(std::span<const std::size_t> shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

void ParamSet::add(std::string name, Tensor t) {
  if (contains(name)) throw std::invalid_argument("ParamSet: duplicate parameter '" + name + "'");
  entries_.emplace_back(std::move(name), std::move(t));
}

Tensor& ParamSet::at(const std::string& name) {
  for (auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw std::out_of_range("ParamSet: no parameter '" + name + "'");
}

const Tensor& ParamSet::at(const std::string& name) const { return const_cast<ParamSet*>(this)->at(name); }

bool ParamSet::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == name; });
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out;
  for (const auto& [n, t] : entries_) out.add(n, Tensor(t.shape));
  return out;
}

bool ParamSet::same_layout(const ParamSet& other) const {
  if (size() != other.size()) return false;
  for (std::size_t i = 0; i < size(); ++i) {
    if (name(i) != other.name(i) || !(*this)[i].same_shape(other[i])) return false;
  }
  return true;
}

std::size_t ParamSet::total_scalars() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.numel();
  return n;
}

} // namespace ssae
