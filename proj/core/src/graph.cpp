#include "scan/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "scan/error.hpp"

namespace scan {

namespace {

// d == 0 has no defined direction; use the zero subgradient there.
constexpr double kDistanceFloor = 1e-300;

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " +
                     b.shape_str());
}

// y = a . b for row-matrix views (rank-1 lhs acts as one row).
Tensor matmul_values(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rank() > 2 || b.rank() != 2)
    throw ShapeError(std::string(op) + ": unsupported ranks " + a.shape_str() + " vs " +
                     b.shape_str());
  const std::size_t m = a.n_rows(), k = a.n_cols();
  if (b.shape[0] != k)
    throw ShapeError(std::string(op) + ": inner extents differ, " + a.shape_str() + " vs " +
                     b.shape_str());
  const std::size_t n = b.shape[1];
  Tensor y = (a.rank() == 1) ? Tensor({n}) : Tensor({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a.data.data() + i * k;
    double* yrow = y.data.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b.data.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) yrow[j] += av * brow[j];
    }
  }
  return y;
}

}  // namespace

VarId Graph::push(Tensor value, BackFn fn) {
  nodes_.push_back(Node{std::move(value), Tensor{}, false, std::move(fn)});
  return static_cast<VarId>(nodes_.size() - 1);
}

const Graph::Node& Graph::node(VarId id) const {
  if (id >= nodes_.size()) throw ContractError("variable id out of range for this graph");
  return nodes_[id];
}

VarId Graph::leaf(Tensor value, bool trainable) {
  VarId id = push(std::move(value), nullptr);
  nodes_[id].trainable = trainable;
  return id;
}

VarId Graph::constant(Tensor value) { return push(std::move(value), nullptr); }

VarId Graph::add(VarId a, VarId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  check_same_shape(va, vb, "add");
  Tensor y = va;
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] += vb[i];
  return push(std::move(y), [a, b](Graph& g, const Tensor& dy) {
    Tensor& da = g.grad_mut(a);
    Tensor& db = g.grad_mut(b);
    for (std::size_t i = 0; i < dy.numel(); ++i) {
      da[i] += dy[i];
      db[i] += dy[i];
    }
  });
}

VarId Graph::sub(VarId a, VarId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  check_same_shape(va, vb, "sub");
  Tensor y = va;
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] -= vb[i];
  return push(std::move(y), [a, b](Graph& g, const Tensor& dy) {
    Tensor& da = g.grad_mut(a);
    Tensor& db = g.grad_mut(b);
    for (std::size_t i = 0; i < dy.numel(); ++i) {
      da[i] += dy[i];
      db[i] -= dy[i];
    }
  });
}

VarId Graph::mul(VarId a, VarId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  check_same_shape(va, vb, "mul");
  Tensor y = va;
  for (std::size_t i = 0; i < y.numel(); ++i) y[i] *= vb[i];
  return push(std::move(y), [a, b](Graph& g, const Tensor& dy) {
    const Tensor& va = g.value(a);
    const Tensor& vb = g.value(b);
    Tensor& da = g.grad_mut(a);
    Tensor& db = g.grad_mut(b);
    for (std::size_t i = 0; i < dy.numel(); ++i) {
      da[i] += dy[i] * vb[i];
      db[i] += dy[i] * va[i];
    }
  });
}

VarId Graph::scale(VarId a, double c) {
  Tensor y = value(a);
  for (double& v : y.data) v *= c;
  return push(std::move(y), [a, c](Graph& g, const Tensor& dy) {
    Tensor& da = g.grad_mut(a);
    for (std::size_t i = 0; i < dy.numel(); ++i) da[i] += c * dy[i];
  });
}

VarId Graph::add_scalar(VarId a, double c) {
  Tensor y = value(a);
  for (double& v : y.data) v += c;
  return push(std::move(y), [a](Graph& g, const Tensor& dy) {
    Tensor& da = g.grad_mut(a);
    for (std::size_t i = 0; i < dy.numel(); ++i) da[i] += dy[i];
  });
}

VarId Graph::add_rowvec(VarId m, VarId v) {
  const Tensor& vm = value(m);
  const Tensor& vv = value(v);
  if (vv.rank() != 1 || vm.n_cols() != vv.shape[0])
    throw ShapeError("add_rowvec: " + vm.shape_str() + " vs " + vv.shape_str());
  const std::size_t rows = vm.n_rows(), cols = vm.n_cols();
  Tensor y = vm;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) y.data[r * cols + c] += vv[c];
  return push(std::move(y), [m, v, rows, cols](Graph& g, const Tensor& dy) {
    Tensor& dm = g.grad_mut(m);
    Tensor& dv = g.grad_mut(v);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) {
        dm[r * cols + c] += dy[r * cols + c];
        dv[c] += dy[r * cols + c];
      }
  });
}

VarId Graph::mul_rowvec(VarId m, VarId v) {
  const Tensor& vm = value(m);
  const Tensor& vv = value(v);
  if (vv.rank() != 1 || vm.n_cols() != vv.shape[0])
    throw ShapeError("mul_rowvec: " + vm.shape_str() + " vs " + vv.shape_str());
  const std::size_t rows = vm.n_rows(), cols = vm.n_cols();
  Tensor y = vm;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) y.data[r * cols + c] *= vv[c];
  return push(std::move(y), [m, v, rows, cols](Graph& g, const Tensor& dy) {
    const Tensor& vm = g.value(m);
    const Tensor& vv = g.value(v);
    Tensor& dm = g.grad_mut(m);
    Tensor& dv = g.grad_mut(v);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) {
        dm[r * cols + c] += dy[r * cols + c] * vv[c];
        dv[c] += dy[r * cols + c] * vm[r * cols + c];
      }
  });
}

VarId Graph::matmul(VarId a, VarId b) {
  Tensor y = matmul_values(value(a), value(b), "matmul");
  return push(std::move(y), [a, b](Graph& g, const Tensor& dy) {
    const Tensor& va = g.value(a);
    const Tensor& vb = g.value(b);
    const std::size_t m = va.n_rows(), k = va.n_cols(), n = vb.shape[1];
    Tensor& da = g.grad_mut(a);
    Tensor& db = g.grad_mut(b);
    // dA = dY . B^T ; dB = A^T . dY
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t p = 0; p < k; ++p) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += dy[i * n + j] * vb[p * n + j];
        da[i * k + p] += acc;
      }
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) acc += va[i * k + p] * dy[i * n + j];
        db[p * n + j] += acc;
      }
  });
}

VarId Graph::transpose(VarId a) {
  const Tensor& va = value(a);
  if (va.rank() != 2) throw ShapeError("transpose needs rank 2, got " + va.shape_str());
  const std::size_t r = va.shape[0], c = va.shape[1];
  Tensor y({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y.data[j * r + i] = va.data[i * c + j];
  return push(std::move(y), [a, r, c](Graph& g, const Tensor& dy) {
    Tensor& da = g.grad_mut(a);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) da[i * c + j] += dy[j * r + i];
  });
}

VarId Graph::unary_map(VarId a, double (*fwd)(double), double (*dydx_from)(double, double)) {
  const Tensor& va = value(a);
  Tensor y = va;
  for (double& v : y.data) v = fwd(v);
  VarId self = push(std::move(y), nullptr);
  nodes_[self].backprop = [a, self, dydx_from](Graph& g, const Tensor& dy) {
    const Tensor& vx = g.value(a);
    const Tensor& vy = g.value(self);
    Tensor& da = g.grad_mut(a);
    for (std::size_t i = 0; i < dy.numel(); ++i) da[i] += dy[i] * dydx_from(vx[i], vy[i]);
  };
  return self;
}

VarId Graph::tanh(VarId a) {
  return unary_map(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

VarId Graph::sigmoid(VarId a) {
  return unary_map(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

VarId Graph::exp(VarId a) {
  return unary_map(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

VarId Graph::log(VarId a) {
  for (double v : value(a).data)
    if (!(v > 0.0))
      throw DomainError("log requires strictly positive input, got " + std::to_string(v));
  return unary_map(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

VarId Graph::relu(VarId a) {
  return unary_map(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

VarId Graph::sqrt(VarId a) {
  for (double v : value(a).data)
    if (v < 0.0) throw DomainError("sqrt requires nonnegative input, got " + std::to_string(v));
  return unary_map(
      a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

VarId Graph::softmax_rows(VarId a) {
  const Tensor& va = value(a);
  const std::size_t rows = va.n_rows(), cols = va.n_cols();
  Tensor y = va;
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = y.data.data() + r * cols;
    double mx = *std::max_element(row, row + cols);
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      row[c] = std::exp(row[c] - mx);
      sum += row[c];
    }
    for (std::size_t c = 0; c < cols; ++c) row[c] /= sum;
  }
  VarId self = push(std::move(y), nullptr);
  nodes_[self].backprop = [a, self, rows, cols](Graph& g, const Tensor& dy) {
    const Tensor& vy = g.value(self);
    Tensor& da = g.grad_mut(a);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += dy[r * cols + c] * vy[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c)
        da[r * cols + c] += vy[r * cols + c] * (dy[r * cols + c] - dot);
    }
  };
  return self;
}

VarId Graph::softmax_rows(VarId a, const std::vector<bool>& col_mask) {
  const Tensor& va = value(a);
  const std::size_t rows = va.n_rows(), cols = va.n_cols();
  if (col_mask.size() != cols)
    throw ShapeError("softmax mask length " + std::to_string(col_mask.size()) +
                     " does not match columns of " + va.shape_str());
  if (std::none_of(col_mask.begin(), col_mask.end(), [](bool b) { return b; }))
    throw DataError("softmax mask excludes every column");
  Tensor y(va.shape, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c)
      if (col_mask[c]) mx = std::max(mx, va[r * cols + c]);
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      if (!col_mask[c]) continue;
      double e = std::exp(va[r * cols + c] - mx);
      y.data[r * cols + c] = e;
      sum += e;
    }
    for (std::size_t c = 0; c < cols; ++c)
      if (col_mask[c]) y.data[r * cols + c] /= sum;
  }
  VarId self = push(std::move(y), nullptr);
  nodes_[self].backprop = [a, self, rows, cols, col_mask](Graph& g, const Tensor& dy) {
    const Tensor& vy = g.value(self);
    Tensor& da = g.grad_mut(a);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c)
        if (col_mask[c]) dot += dy[r * cols + c] * vy[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c)
        if (col_mask[c])
          da[r * cols + c] += vy[r * cols + c] * (dy[r * cols + c] - dot);
    }
  };
  return self;
}

VarId Graph::log_softmax_rows(VarId a) {
  const Tensor& va = value(a);
  const std::size_t rows = va.n_rows(), cols = va.n_cols();
  Tensor y = va;
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = y.data.data() + r * cols;
    double mx = *std::max_element(row, row + cols);
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) sum += std::exp(row[c] - mx);
    const double lse = mx + std::log(sum);
    for (std::size_t c = 0; c < cols; ++c) row[c] -= lse;
  }
  VarId self = push(std::move(y), nullptr);
  nodes_[self].backprop = [a, self, rows, cols](Graph& g, const Tensor& dy) {
    const Tensor& vy = g.value(self);
    Tensor& da = g.grad_mut(a);
    for (std::size_t r = 0; r < rows; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < cols; ++c) s += dy[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c)
        da[r * cols + c] += dy[r * cols + c] - std::exp(vy[r * cols + c]) * s;
    }
  };
  return self;
}

VarId Graph::layer_norm(VarId a, double epsilon) {
  const Tensor& va = value(a);
  const std::size_t rows = va.n_rows(), cols = va.n_cols();
  Tensor y = va;
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = y.data.data() + r * cols;
    double mean = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mean += row[c];
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double d = row[c] - mean;
      var += d * d;
    }
    var /= static_cast<double>(cols);  // population variance
    const double inv = 1.0 / std::sqrt(var + epsilon);
    inv_std[r] = inv;
    for (std::size_t c = 0; c < cols; ++c) row[c] = (row[c] - mean) * inv;
  }
  VarId self = push(std::move(y), nullptr);
  nodes_[self].backprop = [a, self, rows, cols, inv_std = std::move(inv_std)](
                              Graph& g, const Tensor& dy) {
    const Tensor& xhat = g.value(self);
    Tensor& da = g.grad_mut(a);
    const double n = static_cast<double>(cols);
    for (std::size_t r = 0; r < rows; ++r) {
      double mean_dy = 0.0, mean_dy_xhat = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        mean_dy += dy[r * cols + c];
        mean_dy_xhat += dy[r * cols + c] * xhat[r * cols + c];
      }
      mean_dy /= n;
      mean_dy_xhat /= n;
      for (std::size_t c = 0; c < cols; ++c)
        da[r * cols + c] +=
            inv_std[r] * (dy[r * cols + c] - mean_dy - xhat[r * cols + c] * mean_dy_xhat);
    }
  };
  return self;
}

VarId Graph::l2_normalize_rows(VarId a) {
  const Tensor& va = value(a);
  const std::size_t rows = va.n_rows(), cols = va.n_cols();
  Tensor y = va;
  std::vector<double> norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += va[r * cols + c] * va[r * cols + c];
    const double nrm = std::sqrt(s);
    norms[r] = nrm;
    if (nrm > kDistanceFloor)
      for (std::size_t c = 0; c < cols; ++c) y.data[r * cols + c] /= nrm;
    else
      for (std::size_t c = 0; c < cols; ++c) y.data[r * cols + c] = 0.0;
  }
  VarId self = push(std::move(y), nullptr);
  nodes_[self].backprop = [a, rows, cols, norms = std::move(norms)](Graph& g, const Tensor& dy) {
    const Tensor& vx = g.value(a);
    Tensor& da = g.grad_mut(a);
    for (std::size_t r = 0; r < rows; ++r) {
      const double nrm = norms[r];
      if (nrm <= kDistanceFloor) continue;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += dy[r * cols + c] * vx[r * cols + c];
      const double inv = 1.0 / nrm, inv3 = inv * inv * inv;
      for (std::size_t c = 0; c < cols; ++c)
        da[r * cols + c] += dy[r * cols + c] * inv - vx[r * cols + c] * dot * inv3;
    }
  };
  return self;
}

VarId Graph::concat(VarId a, VarId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (va.rank() == 1 && vb.rank() == 1) {
    Tensor y({va.shape[0] + vb.shape[0]});
    std::copy(va.data.begin(), va.data.end(), y.data.begin());
    std::copy(vb.data.begin(), vb.data.end(), y.data.begin() + va.shape[0]);
    const std::size_t na = va.shape[0], nb = vb.shape[0];
    return push(std::move(y), [a, b, na, nb](Graph& g, const Tensor& dy) {
      Tensor& da = g.grad_mut(a);
      Tensor& db = g.grad_mut(b);
      for (std::size_t i = 0; i < na; ++i) da[i] += dy[i];
      for (std::size_t i = 0; i < nb; ++i) db[i] += dy[na + i];
    });
  }
  if (va.rank() == 2 && vb.rank() == 2 && va.shape[0] == vb.shape[0]) {
    const std::size_t rows = va.shape[0], ca = va.shape[1], cb = vb.shape[1];
    Tensor y({rows, ca + cb});
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(va.data.begin() + r * ca, ca, y.data.begin() + r * (ca + cb));
      std::copy_n(vb.data.begin() + r * cb, cb, y.data.begin() + r * (ca + cb) + ca);
    }
    return push(std::move(y), [a, b, rows, ca, cb](Graph& g, const Tensor& dy) {
      Tensor& da = g.grad_mut(a);
      Tensor& db = g.grad_mut(b);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < ca; ++c) da[r * ca + c] += dy[r * (ca + cb) + c];
        for (std::size_t c = 0; c < cb; ++c) db[r * cb + c] += dy[r * (ca + cb) + ca + c];
      }
    });
  }
  throw ShapeError("concat: incompatible operands " + va.shape_str() + " vs " + vb.shape_str());
}

VarId Graph::stack_rows(std::span<const VarId> rows) {
  if (rows.empty()) throw DataError("stack_rows: empty row list");
  const std::size_t d = value(rows[0]).numel();
  for (VarId r : rows) {
    const Tensor& v = value(r);
    if (v.rank() != 1 || v.shape[0] != d)
      throw ShapeError("stack_rows: row shape " + v.shape_str() + " does not match length " +
                       std::to_string(d));
  }
  const std::size_t n = rows.size();
  Tensor y({n, d});
  for (std::size_t i = 0; i < n; ++i)
    std::copy(value(rows[i]).data.begin(), value(rows[i]).data.end(), y.data.begin() + i * d);
  std::vector<VarId> parents(rows.begin(), rows.end());
  return push(std::move(y), [parents = std::move(parents), d](Graph& g, const Tensor& dy) {
    for (std::size_t i = 0; i < parents.size(); ++i) {
      Tensor& dp = g.grad_mut(parents[i]);
      for (std::size_t c = 0; c < d; ++c) dp[c] += dy[i * d + c];
    }
  });
}

VarId Graph::row(VarId a, std::size_t r) {
  const Tensor& va = value(a);
  if (va.rank() != 2 || r >= va.shape[0])
    throw ShapeError("row " + std::to_string(r) + " out of range for " + va.shape_str());
  const std::size_t cols = va.shape[1];
  Tensor y({cols});
  std::copy_n(va.data.begin() + r * cols, cols, y.data.begin());
  return push(std::move(y), [a, r, cols](Graph& g, const Tensor& dy) {
    Tensor& da = g.grad_mut(a);
    for (std::size_t c = 0; c < cols; ++c) da[r * cols + c] += dy[c];
  });
}

VarId Graph::slice_cols(VarId a, std::size_t begin, std::size_t end) {
  const Tensor& va = value(a);
  const std::size_t rows = va.n_rows(), cols = va.n_cols();
  if (begin >= end || end > cols)
    throw ShapeError("slice_cols [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for " + va.shape_str());
  const std::size_t w = end - begin;
  Tensor y = (va.rank() == 1) ? Tensor({w}) : Tensor({rows, w});
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(va.data.begin() + r * cols + begin, w, y.data.begin() + r * w);
  return push(std::move(y), [a, begin, rows, cols, w](Graph& g, const Tensor& dy) {
    Tensor& da = g.grad_mut(a);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < w; ++c) da[r * cols + begin + c] += dy[r * w + c];
  });
}

VarId Graph::mean_rows(VarId a) {
  const Tensor& va = value(a);
  return mean_rows(a, std::vector<bool>(va.n_rows(), true));
}

VarId Graph::mean_rows(VarId a, const std::vector<bool>& row_mask) {
  const Tensor& va = value(a);
  const std::size_t rows = va.n_rows(), cols = va.n_cols();
  if (row_mask.size() != rows)
    throw ShapeError("mean_rows mask length " + std::to_string(row_mask.size()) +
                     " does not match rows of " + va.shape_str());
  const std::size_t k =
      static_cast<std::size_t>(std::count(row_mask.begin(), row_mask.end(), true));
  if (k == 0) throw DataError("mean_rows: every row is masked out");
  Tensor y({cols});
  for (std::size_t r = 0; r < rows; ++r) {
    if (!row_mask[r]) continue;
    for (std::size_t c = 0; c < cols; ++c) y.data[c] += va[r * cols + c];
  }
  for (std::size_t c = 0; c < cols; ++c) y.data[c] /= static_cast<double>(k);
  return push(std::move(y), [a, row_mask, rows, cols, k](Graph& g, const Tensor& dy) {
    Tensor& da = g.grad_mut(a);
    const double inv = 1.0 / static_cast<double>(k);
    for (std::size_t r = 0; r < rows; ++r) {
      if (!row_mask[r]) continue;
      for (std::size_t c = 0; c < cols; ++c) da[r * cols + c] += dy[c] * inv;
    }
  });
}

VarId Graph::row_sums(VarId a) {
  const Tensor& va = value(a);
  if (va.rank() != 2) throw ShapeError("row_sums needs rank 2, got " + va.shape_str());
  const std::size_t rows = va.shape[0], cols = va.shape[1];
  Tensor y({rows});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) y.data[r] += va[r * cols + c];
  return push(std::move(y), [a, rows, cols](Graph& g, const Tensor& dy) {
    Tensor& da = g.grad_mut(a);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) da[r * cols + c] += dy[r];
  });
}

VarId Graph::sum(VarId a) {
  const Tensor& va = value(a);
  double s = 0.0;
  for (double v : va.data) s += v;
  return push(Tensor::scalar(s), [a](Graph& g, const Tensor& dy) {
    Tensor& da = g.grad_mut(a);
    for (double& v : da.data) v += dy[0];
  });
}

VarId Graph::gather(VarId v, std::size_t index) {
  const Tensor& vv = value(v);
  if (vv.rank() != 1 || index >= vv.shape[0])
    throw ContractError("gather index " + std::to_string(index) + " out of range for " +
                        vv.shape_str());
  return push(Tensor::scalar(vv[index]), [v, index](Graph& g, const Tensor& dy) {
    g.grad_mut(v)[index] += dy[0];
  });
}

VarId Graph::select_entries(VarId m, std::vector<std::pair<std::size_t, std::size_t>> idx) {
  const Tensor& vm = value(m);
  if (vm.rank() != 2) throw ShapeError("select_entries needs rank 2, got " + vm.shape_str());
  const std::size_t rows = vm.shape[0], cols = vm.shape[1];
  Tensor y({idx.size()});
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto [r, c] = idx[i];
    if (r >= rows || c >= cols)
      throw ContractError("select_entries index (" + std::to_string(r) + ", " +
                          std::to_string(c) + ") out of range for " + vm.shape_str());
    y.data[i] = vm[r * cols + c];
  }
  return push(std::move(y), [m, idx = std::move(idx), cols](Graph& g, const Tensor& dy) {
    Tensor& dm = g.grad_mut(m);
    for (std::size_t i = 0; i < idx.size(); ++i)
      dm[idx[i].first * cols + idx[i].second] += dy[i];
  });
}

VarId Graph::l2_distance(VarId a, VarId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (va.rank() != 1 || vb.rank() != 1 || va.shape[0] != vb.shape[0])
    throw ShapeError("l2_distance: length mismatch " + va.shape_str() + " vs " + vb.shape_str());
  double s = 0.0;
  for (std::size_t i = 0; i < va.shape[0]; ++i) {
    const double d = va[i] - vb[i];
    s += d * d;
  }
  const double dist = std::sqrt(s);
  return push(Tensor::scalar(dist), [a, b, dist](Graph& g, const Tensor& dy) {
    if (dist <= kDistanceFloor) return;
    const Tensor& va = g.value(a);
    const Tensor& vb = g.value(b);
    Tensor& da = g.grad_mut(a);
    Tensor& db = g.grad_mut(b);
    const double s = dy[0] / dist;
    for (std::size_t i = 0; i < va.numel(); ++i) {
      const double d = (va[i] - vb[i]) * s;
      da[i] += d;
      db[i] -= d;
    }
  });
}

VarId Graph::pairwise_distances(VarId a, VarId b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (va.rank() != 2 || vb.rank() != 2 || va.shape[1] != vb.shape[1])
    throw ShapeError("pairwise_distances: incompatible " + va.shape_str() + " vs " +
                     vb.shape_str());
  const std::size_t m = va.shape[0], n = vb.shape[0], d = va.shape[1];
  Tensor y({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = va[i * d + c] - vb[j * d + c];
        s += diff * diff;
      }
      y.data[i * n + j] = std::sqrt(s);
    }
  VarId self = push(std::move(y), nullptr);
  nodes_[self].backprop = [a, b, self, m, n, d](Graph& g, const Tensor& dy) {
    const Tensor& va = g.value(a);
    const Tensor& vb = g.value(b);
    const Tensor& vd = g.value(self);
    Tensor& da = g.grad_mut(a);
    Tensor& db = g.grad_mut(b);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        const double dist = vd[i * n + j];
        const double gij = dy[i * n + j];
        if (gij == 0.0 || dist <= kDistanceFloor) continue;
        const double s = gij / dist;
        for (std::size_t c = 0; c < d; ++c) {
          const double diff = (va[i * d + c] - vb[j * d + c]) * s;
          da[i * d + c] += diff;
          db[j * d + c] -= diff;
        }
      }
  };
  return self;
}

VarId Graph::embed_rows(VarId table, const std::vector<std::uint32_t>& ids,
                        std::uint32_t padding_id) {
  const Tensor& vt = value(table);
  if (vt.rank() != 2) throw ShapeError("embed_rows: table must be rank 2, got " + vt.shape_str());
  if (ids.empty()) throw DataError("embed_rows: empty token sequence");
  const std::size_t vocab = vt.shape[0], d = vt.shape[1];
  for (std::uint32_t id : ids)
    if (id >= vocab)
      throw VocabError("token id " + std::to_string(id) + " outside vocabulary of size " +
                       std::to_string(vocab));
  Tensor y({ids.size(), d});
  for (std::size_t t = 0; t < ids.size(); ++t)
    std::copy_n(vt.data.begin() + static_cast<std::size_t>(ids[t]) * d, d,
                y.data.begin() + t * d);
  return push(std::move(y), [table, ids, padding_id, d](Graph& g, const Tensor& dy) {
    Tensor& dt = g.grad_mut(table);
    for (std::size_t t = 0; t < ids.size(); ++t) {
      if (ids[t] == padding_id) continue;
      for (std::size_t c = 0; c < d; ++c)
        dt[static_cast<std::size_t>(ids[t]) * d + c] += dy[t * d + c];
    }
  });
}

const Tensor& Graph::value(VarId id) const { return node(id).value; }

const Tensor& Graph::grad(VarId id) const {
  const Node& n = node(id);
  if (n.grad.numel() == 0) throw ContractError("gradient not available before backward()");
  return n.grad;
}

double Graph::scalar_value(VarId id) const {
  const Tensor& v = value(id);
  if (v.numel() != 1) throw ContractError("scalar_value on non-scalar " + v.shape_str());
  return v[0];
}

bool Graph::trainable(VarId id) const { return node(id).trainable; }

void Graph::backward(VarId root) {
  const Tensor& rv = value(root);
  if (rv.numel() != 1)
    throw ContractError("backward requires a scalar root, got " + rv.shape_str());
  if (backward_done_) throw ContractError("backward already ran on this graph");
  backward_done_ = true;
  for (Node& n : nodes_) n.grad = Tensor(n.value.shape, 0.0);
  nodes_[root].grad[0] = 1.0;
  backward_visits_ = 0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    ++backward_visits_;
    if (nodes_[i].backprop) nodes_[i].backprop(*this, nodes_[i].grad);
  }
}

}  // namespace scan
