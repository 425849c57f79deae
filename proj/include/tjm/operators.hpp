#pragma once

#include "tjm/mps.hpp"

namespace tjm::ops {

// Spin-1/2 single-site matrices in the basis |0> = (1,0), |1> = (0,1).

LocalOp identity(std::size_t d = 2);
LocalOp pauli_x();
LocalOp pauli_y();
LocalOp pauli_z();
/// [[0,1],[0,0]]: maps |1> to |0>.
LocalOp lowering();
/// [[0,0],[1,0]]: maps |0> to |1>.
LocalOp raising();

}  // namespace tjm::ops
