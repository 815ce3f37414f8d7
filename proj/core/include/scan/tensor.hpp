#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace scan {

// Dense row-major tensor of doubles. The only numeric carrier in the
// library; shapes are immutable after construction.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape_, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape_, std::vector<double> data_);

  static Tensor scalar(double v);
  static Tensor vec(std::vector<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor zeros_like(const Tensor& t);
  static Tensor identity(std::size_t n);

  std::size_t numel() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }

  // Row-matrix view: a rank-1 tensor behaves as a single row. Throws for
  // rank > 2.
  std::size_t n_rows() const;
  std::size_t n_cols() const;

  double& at(std::size_t r, std::size_t c);
  double at(std::size_t r, std::size_t c) const;
  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
  std::string shape_str() const;  // e.g. "[3x4]"
};

}  // namespace scan
