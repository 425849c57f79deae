#include "tjm/operators.hpp"

namespace tjm::ops {

LocalOp identity(std::size_t d) {
  return LocalOp::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
}

LocalOp pauli_x() {
  LocalOp m(2, 2);
  m << 0.0, 1.0, 1.0, 0.0;
  return m;
}

LocalOp pauli_y() {
  LocalOp m(2, 2);
  m << 0.0, cplx(0.0, -1.0), cplx(0.0, 1.0), 0.0;
  return m;
}

LocalOp pauli_z() {
  LocalOp m(2, 2);
  m << 1.0, 0.0, 0.0, -1.0;
  return m;
}

LocalOp lowering() {
  LocalOp m(2, 2);
  m << 0.0, 1.0, 0.0, 0.0;
  return m;
}

LocalOp raising() {
  LocalOp m(2, 2);
  m << 0.0, 0.0, 1.0, 0.0;
  return m;
}

}  // namespace tjm::ops
