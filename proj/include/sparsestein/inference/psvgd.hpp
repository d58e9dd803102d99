#pragma once

// Projected SVGD: transport in the span of the dominant generalized
// eigenvectors of the misfit Hessian, complement filled from the prior.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "sparsestein/error.hpp"
#include "sparsestein/inference/density.hpp"
#include "sparsestein/inference/svgd.hpp"

namespace sparsestein::inference {

struct EigenDecomposition {
  Eigen::VectorXd values;   // descending
  Eigen::MatrixXd vectors;  // matching columns
};

/// Cyclic Jacobi rotations on a dense symmetric matrix.
inline EigenDecomposition jacobi_eigen(Eigen::MatrixXd A, double tol = 1e-24, std::size_t max_sweeps = 60) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n) throw std::invalid_argument("jacobi_eigen: matrix must be square");
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, A.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("jacobi_eigen: matrix must be symmetric");
  A = 0.5 * (A + A.transpose()).eval();
  Eigen::MatrixXd V = Eigen::MatrixXd::Identity(n, n);
  const double scale = A.squaredNorm();
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index q = 0; q < n; ++q)
      for (Eigen::Index p = 0; p < q; ++p) off += 2.0 * A(p, q) * A(p, q);
    if (off <= tol * scale || scale == 0.0) break;
    for (Eigen::Index q = 1; q < n; ++q) {
      for (Eigen::Index p = 0; p < q; ++p) {
        const double apq = A(p, q);
        if (apq == 0.0) continue;
        const double app = A(p, p), aqq = A(q, q);
        if (std::abs(apq) < 1e-300 || std::abs(apq) <= 1e-18 * std::sqrt(std::abs(app * aqq))) {
          A(p, q) = A(q, p) = 0.0;
          continue;
        }
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        double* colp = A.col(p).data();
        double* colq = A.col(q).data();
        for (Eigen::Index k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = colp[k], akq = colq[k];
          colp[k] = c * akp - s * akq;
          colq[k] = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          A(p, k) = colp[k];
          A(q, k) = colq[k];
        }
        A(p, p) = app - t * apq;
        A(q, q) = aqq + t * apq;
        A(p, q) = A(q, p) = 0.0;
        double* vp = V.col(p).data();
        double* vq = V.col(q).data();
        for (Eigen::Index k = 0; k < n; ++k) {
          const double a = vp[k], b = vq[k];
          vp[k] = c * a - s * b;
          vq[k] = s * a + c * b;
        }
      }
    }
  }
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return A(a, a) > A(b, b); });
  EigenDecomposition out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = A(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
    out.vectors.col(k) = V.col(order[static_cast<std::size_t>(k)]);
  }
  return out;
}

struct SubspaceProjector {
  Eigen::MatrixXd basis;         // P x r, orthonormal columns
  Eigen::VectorXd eigenvalues;   // leading r, descending
  Eigen::VectorXd spectrum;      // all generalized eigenvalues, floored at 0
  Eigen::VectorXd anchor;        // MAP point
  Eigen::VectorXd prior_variance;

  Eigen::Index rank() const { return basis.cols(); }
  Eigen::VectorXd reduce(const Eigen::Ref<const Eigen::VectorXd>& theta) const {
    return basis.transpose() * (theta - anchor);
  }
  Eigen::VectorXd lift(const Eigen::Ref<const Eigen::VectorXd>& reduced) const { return anchor + basis * reduced; }
  Eigen::VectorXd complement(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return x - basis * (basis.transpose() * x);
  }
};

/// Dominant eigenpairs of H psi = lambda Sigma0^{-1} psi for diagonal Sigma0,
/// keeping the smallest r whose cumulative share reaches `threshold`.
inline SubspaceProjector active_subspace(const Eigen::MatrixXd& H, const Eigen::VectorXd& prior_variance,
                                         const Eigen::VectorXd& anchor, double threshold = 0.99) {
  const Eigen::Index n = H.rows();
  if (prior_variance.size() != n || anchor.size() != n) throw std::invalid_argument("active_subspace: shape mismatch");
  if (!(threshold > 0.0 && threshold <= 1.0)) throw std::invalid_argument("threshold must lie in (0, 1]");
  if ((prior_variance.array() <= 0.0).any()) throw std::invalid_argument("prior variances must be positive");
  const Eigen::VectorXd root = prior_variance.cwiseSqrt();
  const Eigen::MatrixXd A = root.asDiagonal() * H * root.asDiagonal();
  const EigenDecomposition eig = jacobi_eigen(A);
  const Eigen::VectorXd lam = eig.values.cwiseMax(0.0);
  const double total = lam.sum();
  if (!(total > 0.0)) throw DegenerateSpectrum("Hessian spectrum is identically zero");
  Eigen::Index r = 0;
  double cum = 0.0;
  while (r < n) {
    cum += lam(r);
    ++r;
    if (cum / total >= threshold - 1e-12) break;
  }
  SubspaceProjector proj;
  proj.spectrum = lam;
  proj.eigenvalues = lam.head(r);
  proj.anchor = anchor;
  proj.prior_variance = prior_variance;
  // Sigma0^{1/2} W, re-orthonormalized (twice-applied modified Gram-Schmidt).
  Eigen::MatrixXd B = root.asDiagonal() * eig.vectors.leftCols(r);
  for (int pass = 0; pass < 2; ++pass)
    for (Eigen::Index k = 0; k < r; ++k) {
      for (Eigen::Index j = 0; j < k; ++j) B.col(k) -= B.col(j).dot(B.col(k)) * B.col(j);
      B.col(k).normalize();
    }
  proj.basis = std::move(B);
  return proj;
}

/// log pi restricted to anchor + basis * x.
template <LogDensity D>
class ReducedDensity {
 public:
  ReducedDensity(const D& full, const SubspaceProjector& proj) : full_(full), proj_(proj) {}

  std::size_t dimension() const { return static_cast<std::size_t>(proj_.rank()); }

  double log_density(std::span<const double> x, std::span<double> grad) const {
    const Eigen::Map<const Eigen::VectorXd> xr(x.data(), static_cast<Eigen::Index>(x.size()));
    const Eigen::VectorXd theta = proj_.lift(xr);
    Eigen::VectorXd g(theta.size());
    const double v = full_.log_density({theta.data(), static_cast<std::size_t>(theta.size())},
                                       grad.empty() ? std::span<double>() : std::span<double>(g.data(), g.size()));
    if (!grad.empty()) Eigen::Map<Eigen::VectorXd>(grad.data(), static_cast<Eigen::Index>(grad.size())) = proj_.basis.transpose() * g;
    return v;
  }

 private:
  const D& full_;
  const SubspaceProjector& proj_;
};

/// SVGD in reduced coordinates; samples are reconstructed once at the end as
/// anchor + basis x + (I - basis basis^T) xi with xi ~ N(0, prior covariance).
template <LogDensity D>
PosteriorSamples psvgd_run(const D& density, const SubspaceProjector& proj, const Eigen::MatrixXd& init,
                           const SvgdConfig& cfg, std::uint64_t seed) {
  if (init.rows() != proj.anchor.size()) throw std::invalid_argument("psvgd: particles have wrong dimension");
  Eigen::MatrixXd reduced(proj.rank(), init.cols());
  for (Eigen::Index i = 0; i < init.cols(); ++i) reduced.col(i) = proj.reduce(init.col(i));
  const ReducedDensity<D> rd(density, proj);
  PosteriorSamples out = svgd_run(rd, std::move(reduced), cfg, seed);
  out.method = "psvgd";

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::VectorXd sd = proj.prior_variance.cwiseSqrt();
  Eigen::MatrixXd full(init.rows(), init.cols());
  for (Eigen::Index i = 0; i < init.cols(); ++i) {
    Eigen::VectorXd xi(init.rows());
    for (Eigen::Index k = 0; k < xi.size(); ++k) xi(k) = sd(k) * normal(rng);
    full.col(i) = proj.lift(out.particles.col(i)) + proj.complement(xi);
    apply_constraint(density, {full.col(i).data(), static_cast<std::size_t>(full.rows())});
  }
  out.particles = std::move(full);
  return out;
}

}  // namespace sparsestein::inference
