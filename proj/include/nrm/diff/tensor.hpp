#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace nrm::diff {

using Shape = std::vector<std::size_t>;

/// Dense row-major array of doubles with one to three axes.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor({1, 1}, {v}); }
  static Tensor row(std::vector<double> values);

  [[nodiscard]] const Shape &shape() const noexcept { return shape_; }
  [[nodiscard]] std::size_t rank() const noexcept { return shape_.size(); }
  [[nodiscard]] std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  /// Length of the last axis.
  [[nodiscard]] std::size_t cols() const noexcept { return shape_.empty() ? 0 : shape_.back(); }
  /// Number of last-axis rows, i.e. size() / cols().
  [[nodiscard]] std::size_t rows() const noexcept { return cols() ? size() / cols() : 0; }

  double &operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double &at(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
  [[nodiscard]] double at(std::size_t r, std::size_t c) const noexcept {
    return data_[r * cols() + c];
  }
  double *data() noexcept { return data_.data(); }
  [[nodiscard]] const double *data() const noexcept { return data_.data(); }
  [[nodiscard]] const std::vector<double> &values() const noexcept { return data_; }
  std::vector<double> &values() noexcept { return data_; }

  void fill(double v);
  [[nodiscard]] bool all_finite() const noexcept;
  [[nodiscard]] double item() const;

  bool operator==(const Tensor &) const = default;

private:
  Shape shape_;
  std::vector<double> data_;
};

[[nodiscard]] std::string shape_string(const Shape &shape);

/// Trainable tensor with its gradient accumulator.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Tensor value);

  std::string name;
  Tensor value;
  Tensor grad;

  void zero_grad() { grad.fill(0.0); }
};

} // namespace nrm::diff
