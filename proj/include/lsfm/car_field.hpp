#pragma once

#include "lsfm/mouth_graph.hpp"
#include "lsfm/stochastic.hpp"
#include "lsfm/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

namespace lsfm {

// Largest admissible spatial association; rho = 1 is the improper ICAR.
inline constexpr double kRhoMax = 1.0 - 1e-8;

/// CAR structure Q(rho) = M - rho D on a fixed graph.
///
/// The spectrum of M^{-1/2} D M^{-1/2} is computed once at construction so
/// log det Q(rho) = sum log m(s) + sum log(1 - rho lambda_k) costs O(S).
template <typename Scalar = double>
class CarStructure {
 public:
  using Vec = VectorX<Scalar>;
  using Mat = MatrixX<Scalar>;

  CarStructure(int n_sites, std::vector<Edge> edges) : edges_(std::move(edges)) {
    degrees_ = Vec::Zero(n_sites);
    adjacency_ = Mat::Zero(n_sites, n_sites);
    for (const auto& [a, b] : edges_) {
      if (a == b || a < 0 || b < 0 || a >= n_sites || b >= n_sites)
        throw std::invalid_argument("CarStructure: invalid edge");
      adjacency_(a, b) = adjacency_(b, a) = Scalar(1);
    }
    degrees_ = adjacency_.rowwise().sum();
    for (int s = 0; s < n_sites; ++s)
      if (degrees_(s) < Scalar(1))
        throw std::invalid_argument("CarStructure: site " + std::to_string(s) + " is isolated");

    const Vec inv_sqrt = degrees_.array().rsqrt();
    const Mat scaled = inv_sqrt.asDiagonal() * adjacency_ * inv_sqrt.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Mat> eig(scaled, Eigen::EigenvaluesOnly);
    eigenvalues_ = eig.eigenvalues();
    sum_log_degree_ = degrees_.array().log().sum();
    total_degree_ = degrees_.sum();
  }

  explicit CarStructure(const MouthGraph& graph) : CarStructure(graph.n_sites(), graph.edges()) {}

  int size() const { return static_cast<int>(degrees_.size()); }
  const Vec& degrees() const { return degrees_; }
  const Mat& adjacency() const { return adjacency_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const Vec& eigenvalues() const { return eigenvalues_; }
  Scalar sum_log_degree() const { return sum_log_degree_; }
  // 1' M 1, which also equals 1' D 1.
  Scalar total_degree() const { return total_degree_; }

  static void check_rho(Scalar rho) {
    if (!(rho >= Scalar(0)) || !(rho < Scalar(1)))
      throw std::domain_error("CAR rho must lie in [0, 1), got " +
                              std::to_string(static_cast<double>(rho)));
  }

  Mat precision(Scalar rho) const {
    check_rho(rho);
    Mat q = -rho * adjacency_;
    q.diagonal() += degrees_;
    return q;
  }

  // Q(rho) r by edge traversal.
  Vec multiply(const Vec& r, Scalar rho) const {
    if (r.size() != size()) throw std::invalid_argument("CAR multiply: dimension mismatch");
    Vec out = degrees_.cwiseProduct(r);
    for (const auto& [a, b] : edges_) {
      out(a) -= rho * r(b);
      out(b) -= rho * r(a);
    }
    return out;
  }

  Scalar quadratic_form(const Vec& r, Scalar rho) const {
    if (r.size() != size()) throw std::invalid_argument("CAR quadratic form: dimension mismatch");
    Scalar cross = 0;
    for (const auto& [a, b] : edges_) cross += r(a) * r(b);
    return degrees_.dot(r.cwiseAbs2()) - Scalar(2) * rho * cross;
  }

  Scalar log_det(Scalar rho) const {
    check_rho(rho);
    Scalar acc = sum_log_degree_;
    for (Index k = 0; k < eigenvalues_.size(); ++k) {
      const Scalar v = Scalar(1) - rho * eigenvalues_(k);
      if (!(v > Scalar(0)))
        throw std::domain_error("CAR log det: 1 - rho*lambda is not positive");
      acc += std::log(v);
    }
    return acc;
  }

 private:
  std::vector<Edge> edges_;
  Vec degrees_;
  Mat adjacency_;
  Vec eigenvalues_;
  Scalar sum_log_degree_ = 0;
  Scalar total_degree_ = 0;
};

template <typename Scalar>
MatrixX<Scalar> car_precision(const CarStructure<Scalar>& car, Scalar rho) {
  return car.precision(rho);
}

template <typename Scalar>
Scalar quadratic_form(const VectorX<Scalar>& r, Scalar rho, const CarStructure<Scalar>& car) {
  return car.quadratic_form(r, rho);
}

/// log N(r; 0, tau2 Q(rho)^{-1}).
template <typename Scalar>
Scalar car_log_density(const VectorX<Scalar>& r, Scalar rho, Scalar tau2,
                       const CarStructure<Scalar>& car) {
  if (!(tau2 > Scalar(0))) throw std::domain_error("CAR log density: tau2 must be positive");
  const Scalar n = static_cast<Scalar>(car.size());
  return -Scalar(0.5) * n * std::log(Scalar(2) * std::numbers::pi_v<Scalar> * tau2) +
         Scalar(0.5) * car.log_det(rho) - car.quadratic_form(r, rho) / (Scalar(2) * tau2);
}

/// Canonical-form Gaussian N(Q^{-1} b, Q^{-1}).
template <typename Scalar = double>
struct PrecisionGaussian {
  MatrixX<Scalar> precision;
  VectorX<Scalar> shift;
};

namespace detail {

template <typename Scalar>
std::string cholesky_diagnostics(const MatrixX<Scalar>& q) {
  std::ostringstream os;
  os << "Cholesky of " << q.rows() << "x" << q.cols() << " precision failed";
  if (q.size() > 0) {
    os << "; diag range [" << q.diagonal().minCoeff() << ", " << q.diagonal().maxCoeff()
       << "], asymmetry " << (q - q.transpose()).cwiseAbs().maxCoeff();
    if (!q.allFinite()) os << ", non-finite entries";
  }
  return os.str();
}

}  // namespace detail

/// Draw x with E[x] = Q^{-1} b and Cov[x] = Q^{-1}:
/// Q = L L', mean by two triangular solves, noise L'^{-1} z.
template <typename Scalar>
VectorX<Scalar> sample_precision_gaussian(const PrecisionGaussian<Scalar>& g, RngStream& rng) {
  const Index n = g.precision.rows();
  if (g.precision.cols() != n || g.shift.size() != n)
    throw std::invalid_argument("sample_precision_gaussian: dimension mismatch");
  Eigen::LLT<MatrixX<Scalar>> llt(g.precision);
  if (llt.info() != Eigen::Success || !g.precision.allFinite())
    throw NumericalError("precision_gaussian", detail::cholesky_diagnostics(g.precision));
  VectorX<Scalar> x = llt.solve(g.shift);
  VectorX<Scalar> z(n);
  for (Index k = 0; k < n; ++k) z(k) = static_cast<Scalar>(rng.normal());
  llt.matrixU().solveInPlace(z);
  x += z;
  return x;
}

}  // namespace lsfm
