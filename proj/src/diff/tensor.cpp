#include "nrm/diff/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "nrm/errors.hpp"

namespace nrm::diff {

namespace {

std::size_t element_count(const Shape &shape) {
  if (shape.empty() || shape.size() > 3)
    throw InputError("tensor rank must be 1, 2 or 3, got " + std::to_string(shape.size()));
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

} // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  data_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (element_count(shape_) != data_.size())
    throw InputError("tensor data does not match shape " + shape_string(shape_));
}

Tensor Tensor::row(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({1, n}, std::move(values));
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

double Tensor::item() const {
  if (data_.size() != 1)
    throw InputError("item() on a tensor of shape " + shape_string(shape_));
  return data_[0];
}

std::string shape_string(const Shape &shape) {
  std::string out = "[";
  for (std::size_t i = 0; i < shape.size(); ++i)
    out += (i ? "," : "") + std::to_string(shape[i]);
  return out + "]";
}

Parameter::Parameter(std::string name_, Tensor value_)
    : name(std::move(name_)), value(std::move(value_)), grad(value.shape()) {}

} // namespace nrm::diff
