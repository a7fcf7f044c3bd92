#include <cmath>
#include <stdexcept>

#include "gp_internal.hpp"

namespace ehub {

void KernelHyperparameters::validate(int dim, int linear_count) const {
  if (!(rbf_signal_variance > 0.0) || !(noise_variance > 0.0))
    throw std::invalid_argument("kernel variances must be positive");
  if (rbf_lengthscales.size() != dim)
    throw std::invalid_argument("expected " + std::to_string(dim) + " lengthscales, got " +
                                std::to_string(rbf_lengthscales.size()));
  if (linear_variance.size() != linear_count)
    throw std::invalid_argument("expected " + std::to_string(linear_count) +
                                " linear variances, got " + std::to_string(linear_variance.size()));
  if ((rbf_lengthscales.array() <= 0.0).any() || (linear_variance.array() < 0.0).any())
    throw std::invalid_argument("lengthscales must be positive, linear variances non-negative");
}

KernelHyperparameters KernelHyperparameters::standard_init(DemandKind kind) {
  KernelHyperparameters hp;
  hp.rbf_signal_variance = 1.0;
  hp.rbf_lengthscales = Eigen::VectorXd::Constant(feature_dim(kind), 1.0);
  hp.linear_variance =
      Eigen::VectorXd::Constant(static_cast<int>(default_linear_dims(kind).size()), 0.1);
  hp.noise_variance = 0.1;
  return hp;
}

double kernel_eval(const Eigen::VectorXd& x, const Eigen::VectorXd& xp,
                   const KernelHyperparameters& hp, const std::vector<int>& linear_dims) {
  double d2 = 0.0;
  for (int d = 0; d < x.size(); ++d) {
    double u = (x[d] - xp[d]) / hp.rbf_lengthscales[d];
    d2 += u * u;
  }
  double k = hp.rbf_signal_variance * std::exp(-0.5 * d2);
  for (size_t i = 0; i < linear_dims.size(); ++i)
    k += hp.linear_variance[static_cast<int>(i)] * x[linear_dims[i]] * xp[linear_dims[i]];
  return k;
}

namespace detail {

Eigen::MatrixXd cross_kernel(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                             const KernelHyperparameters& hp,
                             const std::vector<int>& linear_dims) {
  Eigen::VectorXd inv_l = hp.rbf_lengthscales.cwiseInverse();
  Eigen::MatrixXd Za = A * inv_l.asDiagonal();
  Eigen::MatrixXd Zb = B * inv_l.asDiagonal();
  Eigen::VectorXd sa = Za.rowwise().squaredNorm();
  Eigen::VectorXd sb = Zb.rowwise().squaredNorm();
  Eigen::MatrixXd D2 = sa.replicate(1, B.rows()) + sb.transpose().replicate(A.rows(), 1) -
                       2.0 * (Za * Zb.transpose());
  Eigen::MatrixXd K =
      hp.rbf_signal_variance * (-0.5 * D2.cwiseMax(0.0).array()).exp().matrix();
  for (size_t i = 0; i < linear_dims.size(); ++i) {
    int d = linear_dims[i];
    K.noalias() += hp.linear_variance[static_cast<int>(i)] * (A.col(d) * B.col(d).transpose());
  }
  return K;
}

Eigen::VectorXd self_kernel(const Eigen::MatrixXd& A, const KernelHyperparameters& hp,
                            const std::vector<int>& linear_dims) {
  Eigen::VectorXd k = Eigen::VectorXd::Constant(A.rows(), hp.rbf_signal_variance);
  for (size_t i = 0; i < linear_dims.size(); ++i)
    k.array() += hp.linear_variance[static_cast<int>(i)] * A.col(linear_dims[i]).array().square();
  return k;
}

bool try_chol_gram(const Eigen::MatrixXd& X, const KernelHyperparameters& hp,
                   const std::vector<int>& linear_dims, Eigen::MatrixXd* L, double* jitter) {
  Eigen::MatrixXd Kn = cross_kernel(X, X, hp, linear_dims);
  Kn.diagonal().array() += hp.noise_variance;
  int n = static_cast<int>(X.rows());
  if (n == 0) {
    *L = Eigen::MatrixXd(0, 0);
    *jitter = 0.0;
    return true;
  }
  double scale = Kn.trace() / n;
  double j = 0.0;
  for (;;) {
    Eigen::MatrixXd Kj = Kn;
    if (j > 0.0) Kj.diagonal().array() += j;
    Eigen::LLT<Eigen::MatrixXd> llt(Kj);
    if (llt.info() == Eigen::Success) {
      *L = llt.matrixL();
      *jitter = j;
      return true;
    }
    if (j == 0.0)
      j = 1e-10 * scale;
    else
      j *= 2.0;
    if (j > 1e-4 * scale) return false;
  }
}

int hyperparameter_count(const KernelHyperparameters& hp) {
  return 2 + static_cast<int>(hp.rbf_lengthscales.size()) +
         static_cast<int>(hp.linear_variance.size());
}

Eigen::VectorXd pack_log(const KernelHyperparameters& hp) {
  Eigen::VectorXd theta(hyperparameter_count(hp));
  int p = 0;
  theta[p++] = std::log(hp.rbf_signal_variance);
  for (int d = 0; d < hp.rbf_lengthscales.size(); ++d)
    theta[p++] = std::log(hp.rbf_lengthscales[d]);
  for (int i = 0; i < hp.linear_variance.size(); ++i)
    theta[p++] = std::log(std::max(hp.linear_variance[i], 1e-12));
  theta[p] = std::log(hp.noise_variance);
  return theta;
}

KernelHyperparameters unpack_log(const Eigen::VectorXd& theta, int dim, int linear_count) {
  KernelHyperparameters hp;
  int p = 0;
  hp.rbf_signal_variance = std::exp(theta[p++]);
  hp.rbf_lengthscales = theta.segment(p, dim).array().exp();
  p += dim;
  hp.linear_variance = theta.segment(p, linear_count).array().exp();
  p += linear_count;
  hp.noise_variance = std::exp(theta[p]);
  return hp;
}

} // namespace detail

Eigen::MatrixXd chol_gram(const Eigen::MatrixXd& X, const KernelHyperparameters& hp,
                          const std::vector<int>& linear_dims, double* jitter_out) {
  Eigen::MatrixXd L;
  double jitter = 0.0;
  if (!detail::try_chol_gram(X, hp, linear_dims, &L, &jitter))
    throw std::runtime_error("kernel matrix is not positive definite even with maximum jitter");
  if (jitter_out) *jitter_out = jitter;
  return L;
}

} // namespace ehub
