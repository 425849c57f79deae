#include "tjm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tjm/errors.hpp"

namespace tjm {

namespace {

std::size_t product(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ')';
  return os.str();
}

bool is_identity(std::span<const std::size_t> perm) {
  for (std::size_t i = 0; i < perm.size(); ++i)
    if (perm[i] != i) return false;
  return true;
}

// Split the axes of `t` into (left_axes, rest) and return the permutation
// together with the row/column extents of the resulting matricization.
struct Matricization {
  std::vector<std::size_t> perm;
  Shape left_shape;
  Shape right_shape;
  std::size_t rows = 1;
  std::size_t cols = 1;
};

Matricization matricize(const Tensor& t, std::span<const std::size_t> left_axes) {
  const std::size_t r = t.rank();
  if (left_axes.empty() || left_axes.size() >= r)
    throw DimensionError("split: left axes must be a non-empty proper subset of " +
                         std::to_string(r) + " axes");
  std::vector<bool> used(r, false);
  Matricization m;
  for (auto ax : left_axes) {
    if (ax >= r || used[ax]) throw DimensionError("split: invalid or repeated axis");
    used[ax] = true;
    m.perm.push_back(ax);
    m.left_shape.push_back(t.extent(ax));
    m.rows *= t.extent(ax);
  }
  for (std::size_t ax = 0; ax < r; ++ax) {
    if (used[ax]) continue;
    m.perm.push_back(ax);
    m.right_shape.push_back(t.extent(ax));
    m.cols *= t.extent(ax);
  }
  return m;
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(product(shape_), cplx{0.0}) {}

Tensor::Tensor(Shape shape, std::vector<cplx> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (product(shape_) != data_.size())
    throw DimensionError("tensor: shape " + shape_str(shape_) + " does not match " +
                         std::to_string(data_.size()) + " values");
}

Tensor Tensor::random(Shape shape, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Tensor t(std::move(shape));
  for (auto& x : t.data_) {
    const double re = gauss(rng);
    const double im = gauss(rng);
    x = cplx(re, im);
  }
  return t;
}

Tensor Tensor::from_matrix(const RowMatrix& m) {
  Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  t.as_matrix(m.rows()) = m;
  return t;
}

Tensor Tensor::from_matrix(const Eigen::MatrixXcd& m) {
  Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  t.as_matrix(m.rows()) = m;
  return t;
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> idx) const {
  std::size_t off = 0;
  std::size_t ax = 0;
  for (auto i : idx) {
    off = off * shape_[ax] + i;
    ++ax;
  }
  return off;
}

Tensor Tensor::reshaped(Shape shape) const& {
  Tensor copy(*this);
  return std::move(copy).reshaped(std::move(shape));
}

Tensor Tensor::reshaped(Shape shape) && {
  if (product(shape) != data_.size())
    throw DimensionError("reshape: " + shape_str(shape_) + " -> " + shape_str(shape));
  shape_ = std::move(shape);
  return std::move(*this);
}

Tensor Tensor::permuted(std::span<const std::size_t> perm) const {
  const std::size_t r = rank();
  if (perm.size() != r) throw DimensionError("permute: wrong permutation length");
  if (is_identity(perm)) return *this;

  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t ax = r; ax-- > 1;) in_strides[ax - 1] = in_strides[ax] * shape_[ax];

  Shape out_shape(r);
  std::vector<std::size_t> stride(r);
  for (std::size_t i = 0; i < r; ++i) {
    if (perm[i] >= r) throw DimensionError("permute: axis out of range");
    out_shape[i] = shape_[perm[i]];
    stride[i] = in_strides[perm[i]];
  }
  Tensor out(out_shape);
  if (out.data_.empty()) return out;

  // Odometer over output indices; the innermost axis is copied in a tight loop.
  const std::size_t inner = out_shape[r - 1];
  const std::size_t inner_stride = stride[r - 1];
  std::vector<std::size_t> idx(r, 0);
  std::size_t in_off = 0;
  cplx* dst = out.data_.data();
  const cplx* src = data_.data();
  const std::size_t outer = out.data_.size() / inner;
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t k = 0; k < inner; ++k) dst[k] = src[in_off + k * inner_stride];
    dst += inner;
    for (std::size_t ax = r - 1; ax-- > 0;) {
      ++idx[ax];
      in_off += stride[ax];
      if (idx[ax] < out_shape[ax]) break;
      in_off -= stride[ax] * idx[ax];
      idx[ax] = 0;
    }
  }
  return out;
}

Tensor Tensor::conj() const {
  Tensor out(*this);
  for (auto& x : out.data_) x = std::conj(x);
  return out;
}

double Tensor::norm() const {
  double s = 0.0;
  for (const auto& x : data_) s += std::norm(x);
  return std::sqrt(s);
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](const cplx& x) { return std::isfinite(x.real()) && std::isfinite(x.imag()); });
}

Eigen::Map<RowMatrix> Tensor::as_matrix(std::size_t rows) {
  const std::size_t cols = rows ? data_.size() / rows : 0;
  return {data_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

Eigen::Map<const RowMatrix> Tensor::as_matrix(std::size_t rows) const {
  const std::size_t cols = rows ? data_.size() / rows : 0;
  return {data_.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

Eigen::Map<Eigen::VectorXcd> Tensor::as_vector() {
  return {data_.data(), static_cast<Eigen::Index>(data_.size())};
}

Eigen::Map<const Eigen::VectorXcd> Tensor::as_vector() const {
  return {data_.data(), static_cast<Eigen::Index>(data_.size())};
}

Tensor& Tensor::operator*=(cplx s) {
  for (auto& x : data_) x *= s;
  return *this;
}

Tensor& Tensor::operator+=(const Tensor& o) {
  if (o.shape_ != shape_) throw DimensionError("add: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& o) {
  if (o.shape_ != shape_) throw DimensionError("subtract: shape mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

Tensor operator*(cplx s, Tensor t) { return std::move(t *= s); }
Tensor operator+(Tensor a, const Tensor& b) { return std::move(a += b); }
Tensor operator-(Tensor a, const Tensor& b) { return std::move(a -= b); }

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw DimensionError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

Tensor contract(const Tensor& a, const Tensor& b, const AxisPairs& axis_pairs) {
  std::vector<bool> a_used(a.rank(), false);
  std::vector<bool> b_used(b.rank(), false);
  std::vector<std::size_t> a_perm;
  std::vector<std::size_t> b_perm;
  std::size_t k = 1;
  for (auto [ia, ib] : axis_pairs) {
    if (ia >= a.rank() || ib >= b.rank() || a_used[ia] || b_used[ib])
      throw DimensionError("contract: invalid axis pair");
    if (a.extent(ia) != b.extent(ib))
      throw DimensionError("contract: extent mismatch " + std::to_string(a.extent(ia)) + " vs " +
                           std::to_string(b.extent(ib)) + " for shapes " + shape_str(a.shape()) +
                           " and " + shape_str(b.shape()));
    a_used[ia] = b_used[ib] = true;
    k *= a.extent(ia);
  }

  Shape out_shape;
  std::size_t rows = 1;
  for (std::size_t ax = 0; ax < a.rank(); ++ax) {
    if (a_used[ax]) continue;
    a_perm.push_back(ax);
    out_shape.push_back(a.extent(ax));
    rows *= a.extent(ax);
  }
  for (auto [ia, ib] : axis_pairs) {
    a_perm.push_back(ia);
    b_perm.push_back(ib);
  }
  std::size_t cols = 1;
  for (std::size_t ax = 0; ax < b.rank(); ++ax) {
    if (b_used[ax]) continue;
    b_perm.push_back(ax);
    out_shape.push_back(b.extent(ax));
    cols *= b.extent(ax);
  }

  Tensor out(out_shape);
  if (rows == 0 || cols == 0) return out;
  const auto ei = [](std::size_t n) { return static_cast<Eigen::Index>(n); };

  // Avoid copying operands whose axes are already in GEMM order.
  const Tensor* pa = &a;
  const Tensor* pb = &b;
  Tensor ta, tb;
  if (!is_identity(a_perm)) {
    ta = a.permuted(a_perm);
    pa = &ta;
  }
  if (!is_identity(b_perm)) {
    tb = b.permuted(b_perm);
    pb = &tb;
  }
  Eigen::Map<const RowMatrix> ma(pa->data(), ei(rows), ei(k));
  Eigen::Map<const RowMatrix> mb(pb->data(), ei(k), ei(cols));
  Eigen::Map<RowMatrix> mo(out.data(), ei(rows), ei(cols));
  mo.noalias() = ma * mb;
  return out;
}

std::size_t kept_rank(std::span<const double> s, std::size_t max_rank, double threshold) {
  if (s.empty()) return 0;
  std::size_t keep = 0;
  const double s1 = s.front();
  for (double v : s) {
    if (s1 > 0.0 && v / s1 > threshold) ++keep;
  }
  keep = std::min(keep, max_rank);
  return std::max<std::size_t>(keep, 1);
}

SvdSplit svd_split(const Tensor& t, std::span<const std::size_t> left_axes, std::size_t max_rank,
                   double threshold) {
  if (threshold < 0.0) throw DimensionError("svd_split: negative threshold");
  if (max_rank == 0) throw DimensionError("svd_split: max_rank must be positive");
  const Matricization m = matricize(t, left_axes);
  const Tensor p = t.permuted(m.perm);
  const Eigen::MatrixXcd mat = p.as_matrix(m.rows);

  Eigen::BDCSVD<Eigen::MatrixXcd> svd(mat, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success)
    throw NumericError("svd_split: SVD did not converge for shape " + shape_str(t.shape()));

  const auto& sv = svd.singularValues();
  std::vector<double> s(sv.data(), sv.data() + sv.size());
  const std::size_t keep = kept_rank(s, max_rank, threshold);

  SvdSplit out;
  for (std::size_t i = keep; i < s.size(); ++i) out.discarded_weight += s[i] * s[i];
  s.resize(keep);
  out.singular_values = std::move(s);

  const auto ki = static_cast<Eigen::Index>(keep);
  Shape u_shape = m.left_shape;
  u_shape.push_back(keep);
  out.u = Tensor(u_shape);
  out.u.as_matrix(m.rows) = svd.matrixU().leftCols(ki);

  Shape v_shape{keep};
  v_shape.insert(v_shape.end(), m.right_shape.begin(), m.right_shape.end());
  out.vh = Tensor(v_shape);
  out.vh.as_matrix(keep) = svd.matrixV().leftCols(ki).adjoint();

  if (!out.u.all_finite() || !out.vh.all_finite())
    throw NumericError("svd_split: non-finite factors for shape " + shape_str(t.shape()));
  return out;
}

QrSplit qr_split(const Tensor& t, std::span<const std::size_t> left_axes) {
  const Matricization m = matricize(t, left_axes);
  const Tensor p = t.permuted(m.perm);
  const Eigen::MatrixXcd mat = p.as_matrix(m.rows);
  const auto rows = static_cast<Eigen::Index>(m.rows);
  const auto cols = static_cast<Eigen::Index>(m.cols);
  const Eigen::Index k = std::min(rows, cols);

  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(mat);
  Eigen::MatrixXcd q = qr.householderQ() * Eigen::MatrixXcd::Identity(rows, k);
  Eigen::MatrixXcd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();

  // Fix the gauge so that diag(R) >= 0.
  for (Eigen::Index i = 0; i < k; ++i) {
    const cplx d = r(i, i);
    const double a = std::abs(d);
    if (a == 0.0) continue;
    const cplx phase = d / a;
    q.col(i) *= phase;
    r.row(i) *= std::conj(phase);
  }

  QrSplit out;
  Shape q_shape = m.left_shape;
  q_shape.push_back(static_cast<std::size_t>(k));
  out.q = Tensor(q_shape);
  out.q.as_matrix(m.rows) = q;
  Shape r_shape{static_cast<std::size_t>(k)};
  r_shape.insert(r_shape.end(), m.right_shape.begin(), m.right_shape.end());
  out.r = Tensor(r_shape);
  out.r.as_matrix(static_cast<std::size_t>(k)) = r;
  if (!out.q.all_finite() || !out.r.all_finite())
    throw NumericError("qr_split: non-finite factors for shape " + shape_str(t.shape()));
  return out;
}

}  // namespace tjm
