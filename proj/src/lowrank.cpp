#include "icepred/lowrank.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "icepred/errors.hpp"
#include "icepred/random.hpp"

namespace icepred {

void GevdConfig::validate() const {
  if (r_max < 1 || oversample < 0 || power_iters < 0) throw ConfigError("GEVD sizes out of range");
  if (!std::isfinite(threshold)) throw ConfigError("GEVD threshold must be finite");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

namespace {

Eigen::MatrixXd apply_columns(const BasalOperator& op, const Eigen::MatrixXd& x, int threads) {
  Eigen::MatrixXd out(x.rows(), x.cols());
  const int n = static_cast<int>(x.cols());
  if (threads <= 1 || n <= 1) {
    for (int j = 0; j < n; ++j) out.col(j) = op(x.col(j));
    return out;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (int j = next++; j < n; j = next++) {
      try {
        out.col(j) = op(x.col(j));
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min(threads, n); ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

// Columns of Y orthonormalized in the B inner product; B Q is returned too.
void b_orthonormalize(Eigen::MatrixXd& Q, Eigen::MatrixXd& BQ, const PriorModel& prior) {
  const int n = static_cast<int>(Q.cols());
  BQ.resize(Q.rows(), n);
  for (int pass = 0; pass < 2; ++pass) {
    for (int j = 0; j < n; ++j) {
      BQ.col(j) = prior.precision_apply(Q.col(j));
      for (int i = 0; i < j; ++i) {
        const double c = BQ.col(i).dot(Q.col(j));
        Q.col(j) -= c * Q.col(i);
        BQ.col(j) -= c * BQ.col(i);
      }
      const double nrm = std::sqrt(std::max(Q.col(j).dot(BQ.col(j)), 0.0));
      if (!(nrm > 0.0)) throw NumericError("randomized GEVD: sketch lost rank");
      Q.col(j) /= nrm;
      BQ.col(j) /= nrm;
    }
  }
}

}  // namespace

GevdResult randomized_gevd(const BasalOperator& hessian, const PriorModel& prior, const GevdConfig& cfg,
                           std::mt19937_64& rng) {
  cfg.validate();
  const int n = prior.size();
  const int k = cfg.r_max + cfg.oversample;
  if (k > n) throw InvalidArgument("randomized GEVD: r_max + oversample exceeds the parameter dimension");
  GevdResult res;
  Eigen::MatrixXd Y = apply_columns(hessian, standard_normal(rng, n, k), cfg.threads);
  res.hessian_actions += k;
  for (int j = 0; j < k; ++j) Y.col(j) = prior.covariance_apply(Y.col(j));
  Eigen::MatrixXd BQ;
  for (int q = 0; q < cfg.power_iters; ++q) {
    b_orthonormalize(Y, BQ, prior);
    Y = apply_columns(hessian, Y, cfg.threads);
    res.hessian_actions += k;
    for (int j = 0; j < k; ++j) Y.col(j) = prior.covariance_apply(Y.col(j));
  }
  Eigen::MatrixXd Q = std::move(Y);
  b_orthonormalize(Q, BQ, prior);
  const Eigen::MatrixXd HQ = apply_columns(hessian, Q, cfg.threads);
  res.hessian_actions += k;
  Eigen::MatrixXd T = Q.transpose() * HQ;
  T = 0.5 * (T + T.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(T);
  if (eig.info() != Eigen::Success) throw NumericError("randomized GEVD: projected eigenproblem failed");
  res.ritz_values = eig.eigenvalues().reverse();
  res.ritz_vectors = Q * eig.eigenvectors().rowwise().reverse();

  const double lam1 = res.ritz_values.size() > 0 ? res.ritz_values[0] : 0.0;
  for (Eigen::Index i = 0; i < res.ritz_values.size(); ++i)
    if (res.ritz_values[i] < -1e-8 * std::abs(lam1)) ++res.negative_ritz;
  int r = 0;
  while (r < cfg.r_max && res.ritz_values[r] >= cfg.threshold) ++r;
  res.spectrum_exhausted = !(r == cfg.r_max && r < n);
  res.lambda = res.ritz_values.head(r);
  res.W = res.ritz_vectors.leftCols(r);
  return res;
}

LowRankPosterior::LowRankPosterior(const PriorModel& prior, Eigen::VectorXd beta_map, Eigen::VectorXd lambda,
                                   Eigen::MatrixXd W)
    : prior_(&prior), beta_map_(std::move(beta_map)), lambda_(std::move(lambda)), W_(std::move(W)) {
  if (beta_map_.size() != prior.size() || W_.rows() != prior.size() || W_.cols() != lambda_.size())
    throw InvalidArgument("low-rank posterior: inconsistent sizes");
  for (Eigen::Index i = 0; i < lambda_.size(); ++i)
    if (!(lambda_[i] > -1.0)) throw NumericError("low-rank posterior: eigenvalue <= -1");
  V_.resize(W_.rows(), W_.cols());
  for (Eigen::Index i = 0; i < W_.cols(); ++i) V_.col(i) = prior.precision_apply(W_.col(i));
}

Eigen::VectorXd LowRankPosterior::d() const {
  return lambda_.unaryExpr([](double l) { return l / (1.0 + l); });
}

namespace {

Eigen::VectorXd inv_one_plus(const Eigen::VectorXd& lambda) {
  return lambda.unaryExpr([](double l) { return 1.0 / (1.0 + l); });
}

}  // namespace

Eigen::VectorXd LowRankPosterior::covariance_apply(const Eigen::VectorXd& w) const {
  const Eigen::VectorXd a = W_.transpose() * w;
  const Eigen::VectorXd z = w - V_ * a;
  return prior_->covariance_apply(z) + W_ * inv_one_plus(lambda_).cwiseProduct(a);
}

double LowRankPosterior::quadratic_form(const Eigen::VectorXd& w) const {
  const Eigen::VectorXd a = W_.transpose() * w;
  const Eigen::VectorXd z = w - V_ * a;
  return z.dot(prior_->covariance_apply(z)) + a.cwiseAbs2().dot(inv_one_plus(lambda_));
}

double LowRankPosterior::prior_quadratic_form(const Eigen::VectorXd& w) const {
  const Eigen::VectorXd a = W_.transpose() * w;
  const Eigen::VectorXd z = w - V_ * a;
  return z.dot(prior_->covariance_apply(z)) + a.squaredNorm();
}

Eigen::VectorXd LowRankPosterior::pointwise_variance() const {
  const int n = prior_->size();
  const Eigen::VectorXd s = inv_one_plus(lambda_);
  Eigen::VectorXd var(n);
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd z = -V_ * W_.row(j).transpose();
    z[j] += 1.0;
    var[j] = z.dot(prior_->covariance_apply(z)) + W_.row(j).cwiseAbs2().dot(s);
    if (!(var[j] > 0.0)) throw Error(ErrorKind::internal, "posterior variance is not positive");
  }
  return var;
}

Eigen::VectorXd LowRankPosterior::sample(std::mt19937_64& rng) const {
  const Eigen::VectorXd y = prior_->sample_zero_mean(rng);
  const Eigen::VectorXd s = lambda_.unaryExpr([](double l) { return 1.0 - 1.0 / std::sqrt(1.0 + l); });
  return beta_map_ + y - W_ * s.cwiseProduct(V_.transpose() * y);
}

Eigen::MatrixXd LowRankPosterior::dense_covariance() const {
  const int n = prior_->size();
  const Eigen::MatrixXd Z = Eigen::MatrixXd::Identity(n, n) - V_ * W_.transpose();
  Eigen::MatrixXd cz(n, n);
  for (int j = 0; j < n; ++j) cz.col(j) = prior_->covariance_apply(Z.col(j));
  Eigen::MatrixXd c = Z.transpose() * cz + W_ * inv_one_plus(lambda_).asDiagonal() * W_.transpose();
  return 0.5 * (c + c.transpose());
}

void write_spectrum_csv(const std::filesystem::path& path, const Eigen::VectorXd& lambda) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "index,lambda\n" << std::setprecision(17);
  for (Eigen::Index i = 0; i < lambda.size(); ++i) out << i << ',' << lambda[i] << '\n';
}

Eigen::VectorXd read_spectrum_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "index,lambda") throw IoError(path.string() + ": bad header");
  std::vector<double> vals;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError(path.string() + ": malformed row");
    if (std::stoi(line.substr(0, comma)) != static_cast<int>(vals.size()))
      throw IoError(path.string() + ": rows out of order");
    vals.push_back(std::stod(line.substr(comma + 1)));
  }
  return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

}  // namespace icepred
