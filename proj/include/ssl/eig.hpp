#pragma once

#include "ssl/mat.hpp"

#include <vector>

namespace ssl {

// Eigendecomposition of a Hermitian matrix by cyclic two-sided Jacobi
// rotations in double precision. Eigenvalues come back in descending order;
// if vectors is non-null it receives the matching eigenvectors as columns.
std::vector<double> hermitian_eigenvalues(const CMatrix<double>& a,
                                          CMatrix<double>* vectors = nullptr);

} // namespace ssl
