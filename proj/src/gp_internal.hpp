#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ehub/gp.hpp"

namespace ehub::detail {

// K(A, B) without the noise term; rows of A and B are points.
Eigen::MatrixXd cross_kernel(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                             const KernelHyperparameters& hp, const std::vector<int>& linear_dims);

// k(x, x) for each row of A.
Eigen::VectorXd self_kernel(const Eigen::MatrixXd& A, const KernelHyperparameters& hp,
                            const std::vector<int>& linear_dims);

// Gram + noise with the jitter ladder; fills L (lower) and the jitter used.
// Returns false when the ladder tops out.
bool try_chol_gram(const Eigen::MatrixXd& X, const KernelHyperparameters& hp,
                   const std::vector<int>& linear_dims, Eigen::MatrixXd* L, double* jitter);

int hyperparameter_count(const KernelHyperparameters& hp);
Eigen::VectorXd pack_log(const KernelHyperparameters& hp);
KernelHyperparameters unpack_log(const Eigen::VectorXd& theta, int dim, int linear_count);

} // namespace ehub::detail
