#pragma once

#include <complex>
#include <cstddef>
#include <limits>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace tjm {

using cplx = std::complex<double>;
using Shape = std::vector<std::size_t>;
using RowMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense complex tensor stored in row-major order: the last axis varies
/// fastest. A rank-0 tensor holds one scalar.
class Tensor {
 public:
  Tensor() : data_(1, cplx{0.0}) {}
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<cplx> data);

  /// Entries drawn i.i.d. from a complex normal distribution.
  static Tensor random(Shape shape, std::mt19937_64& rng);
  static Tensor from_matrix(const RowMatrix& m);
  static Tensor from_matrix(const Eigen::MatrixXcd& m);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }

  cplx* data() noexcept { return data_.data(); }
  const cplx* data() const noexcept { return data_.data(); }
  std::span<const cplx> values() const noexcept { return data_; }

  template <typename... I>
  cplx& operator()(I... idx) {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }
  template <typename... I>
  const cplx& operator()(I... idx) const {
    return data_[offset({static_cast<std::size_t>(idx)...})];
  }

  /// Same data, new shape. The product of extents must not change.
  Tensor reshaped(Shape shape) const&;
  Tensor reshaped(Shape shape) &&;

  /// Axis permutation: result axis i is input axis perm[i].
  Tensor permuted(std::span<const std::size_t> perm) const;
  Tensor permuted(std::initializer_list<std::size_t> perm) const {
    return permuted(std::span<const std::size_t>(perm.begin(), perm.size()));
  }

  Tensor conj() const;
  double norm() const;
  bool all_finite() const;

  /// View as a rows x (size/rows) row-major matrix.
  Eigen::Map<RowMatrix> as_matrix(std::size_t rows);
  Eigen::Map<const RowMatrix> as_matrix(std::size_t rows) const;
  Eigen::Map<Eigen::VectorXcd> as_vector();
  Eigen::Map<const Eigen::VectorXcd> as_vector() const;

  Tensor& operator*=(cplx s);
  Tensor& operator+=(const Tensor& o);
  Tensor& operator-=(const Tensor& o);

 private:
  std::size_t offset(std::initializer_list<std::size_t> idx) const;

  Shape shape_;
  std::vector<cplx> data_;
};

Tensor operator*(cplx s, Tensor t);
Tensor operator+(Tensor a, const Tensor& b);
Tensor operator-(Tensor a, const Tensor& b);

/// Largest absolute entrywise difference; shapes must agree.
double max_abs_diff(const Tensor& a, const Tensor& b);

using AxisPairs = std::vector<std::pair<std::size_t, std::size_t>>;

/// Sums over each (axis of a, axis of b) pair. The result carries the free
/// axes of `a` in order, followed by the free axes of `b`.
Tensor contract(const Tensor& a, const Tensor& b, const AxisPairs& axis_pairs);

inline constexpr std::size_t unbounded_rank = std::numeric_limits<std::size_t>::max();

struct SvdSplit {
  Tensor u;                              ///< (left extents..., k), isometric
  std::vector<double> singular_values;   ///< k kept values, non-increasing
  Tensor vh;                             ///< (k, right extents...), co-isometric
  double discarded_weight = 0.0;         ///< sum of squared dropped values
};

/// SVD of the matricization (left_axes | remaining axes). `u` carries the
/// left axes in the given order, `vh` the remaining axes in their original
/// order. Kept rank is min(max_rank, #{s_i / s_1 > threshold}), at least 1.
SvdSplit svd_split(const Tensor& t, std::span<const std::size_t> left_axes,
                   std::size_t max_rank = unbounded_rank, double threshold = 0.0);

struct QrSplit {
  Tensor q;  ///< (left extents..., k), Q^dagger Q = identity
  Tensor r;  ///< (k, right extents...)
};

/// Thin QR of the matricization (left_axes | remaining axes), k = min(rows, cols).
/// The diagonal of R is made real and non-negative.
QrSplit qr_split(const Tensor& t, std::span<const std::size_t> left_axes);

inline SvdSplit svd_split(const Tensor& t, std::initializer_list<std::size_t> left_axes,
                          std::size_t max_rank = unbounded_rank, double threshold = 0.0) {
  return svd_split(t, std::span<const std::size_t>(left_axes.begin(), left_axes.size()),
                   max_rank, threshold);
}
inline QrSplit qr_split(const Tensor& t, std::initializer_list<std::size_t> left_axes) {
  return qr_split(t, std::span<const std::size_t>(left_axes.begin(), left_axes.size()));
}

/// Number of singular values kept under the relative-threshold / rank-cap rule.
std::size_t kept_rank(std::span<const double> s, std::size_t max_rank, double threshold);

}  // namespace tjm
