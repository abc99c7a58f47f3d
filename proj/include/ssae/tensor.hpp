#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ssae {

/// Allocator with 64-byte alignment. Vectorized reductions peel a prefix up to
/// the first aligned element, so a buffer's address would otherwise change the
/// summation order and make identical runs differ in the last bits.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept {
    return true;
  }
};

using RealBuffer = std::vector<double, AlignedAllocator<double>>;

/// Dense row-major array of 64-bit reals.
struct Tensor {
  std::vector<std::size_t> shape;
  RealBuffer data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape_, double fill = 0.0);
  Tensor(std::initializer_list<std::size_t> shape_, double fill = 0.0)
      : Tensor(std::vector<std::size_t>(shape_), fill) {}

  std::size_t numel() const { return data.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  std::size_t rank() const { return shape.size(); }

  std::span<double> span() { return data; }
  std::span<const double> span() const { return data; }

  void fill(double v);
  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool operator==(const Tensor&) const = default;
};

std::size_t shape_numel(std::span<const std::size_t> shape);
std::string shape_string(std::span<const std::size_t> shape);

/// Named trainable tensors with a fixed iteration order.
class ParamSet {
public:
  void add(std::string name, Tensor t);

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::string& name(std::size_t i) const { return entries_.at(i).first; }
  Tensor& operator[](std::size_t i) { return entries_.at(i).second; }
  const Tensor& operator[](std::size_t i) const { return entries_.at(i).second; }

  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  /// Same names and shapes, zero-filled.
  ParamSet zeros_like() const;
  bool same_layout(const ParamSet& other) const;
  std::size_t total_scalars() const;

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  bool operator==(const ParamSet&) const = default;

private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

} // namespace ssae
