#pragma once

// Social contact matrices coupling age groups in the epidemic component:
// non-negative G x G weights with a spectral power transform C^kappa and row
// normalization to a transition matrix.

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

namespace epicast {

class ContactMatrix {
  public:
    ContactMatrix(Eigen::MatrixXd weights, std::vector<std::string> labels)
        : weights_(std::move(weights)), labels_(std::move(labels)) {
        if (weights_.rows() != weights_.cols()) throw std::invalid_argument("ContactMatrix: must be square");
        if (weights_.rows() < 1) throw std::invalid_argument("ContactMatrix: empty matrix");
        if (static_cast<Eigen::Index>(labels_.size()) != weights_.rows())
            throw std::invalid_argument("ContactMatrix: label length mismatch");
        if ((weights_.array() < 0.0).any())
            throw std::invalid_argument("ContactMatrix: entries must be non-negative");
    }

    Eigen::Index groups() const { return weights_.rows(); }
    const Eigen::MatrixXd& weights() const { return weights_; }
    const std::vector<std::string>& labels() const { return labels_; }

    static ContactMatrix identity(Eigen::Index g, std::vector<std::string> labels) {
        return ContactMatrix(Eigen::MatrixXd::Identity(g, g), std::move(labels));
    }

    static ContactMatrix homogeneous(Eigen::Index g, std::vector<std::string> labels) {
        return ContactMatrix(Eigen::MatrixXd::Ones(g, g), std::move(labels));
    }

  private:
    Eigen::MatrixXd weights_;
    std::vector<std::string> labels_;
};

namespace detail {

// Eigendecomposition with the validity checks the power transform needs:
// symmetry and non-negative spectrum (tiny negatives within tolerance are
// clamped to zero).
inline void checked_contact_eigen(const Eigen::MatrixXd& w, Eigen::MatrixXd& q, Eigen::VectorXd& lambda) {
    const double scale = std::max(1.0, w.cwiseAbs().maxCoeff());
    if ((w - w.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw std::domain_error("power_transform: contact matrix must be symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w);
    if (es.info() != Eigen::Success) throw std::domain_error("power_transform: eigendecomposition failed");
    lambda = es.eigenvalues();
    const double tol = 1e-8 * std::max(1.0, lambda.cwiseAbs().maxCoeff());
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        if (lambda(i) < -tol)
            throw std::domain_error("power_transform: contact matrix has a negative eigenvalue");
        lambda(i) = std::max(lambda(i), 0.0);
    }
    q = es.eigenvectors();
}

}  // namespace detail

/// C^kappa with its elementwise derivative d(C^kappa)/d kappa, both after
/// clipping negative recomposition entries to 0 (clipped entries have zero
/// derivative).
struct PowerTransformResult {
    Eigen::MatrixXd matrix;
    Eigen::MatrixXd derivative;
    bool clipped = false;
};

inline PowerTransformResult power_transform_with_derivative(const ContactMatrix& c, double kappa) {
    Eigen::MatrixXd q;
    Eigen::VectorXd lambda;
    detail::checked_contact_eigen(c.weights(), q, lambda);
    Eigen::VectorXd powered(lambda.size()), powered_dk(lambda.size());
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        powered(i) = std::pow(lambda(i), kappa);
        powered_dk(i) = (lambda(i) > 0.0) ? powered(i) * std::log(lambda(i)) : 0.0;
    }
    if (!powered.allFinite())
        throw std::domain_error("power_transform: Lambda^kappa is not finite (zero eigenvalue, kappa < 0?)");
    PowerTransformResult res;
    res.matrix = q * powered.asDiagonal() * q.transpose();
    res.matrix = 0.5 * (res.matrix + res.matrix.transpose());
    res.derivative = q * powered_dk.asDiagonal() * q.transpose();
    res.derivative = 0.5 * (res.derivative + res.derivative.transpose());
    for (Eigen::Index i = 0; i < res.matrix.rows(); ++i) {
        for (Eigen::Index j = 0; j < res.matrix.cols(); ++j) {
            if (res.matrix(i, j) < 0.0) {
                res.matrix(i, j) = 0.0;
                res.derivative(i, j) = 0.0;
                res.clipped = true;
            }
        }
    }
    return res;
}

/// Spectral power C^kappa = Q Lambda^kappa Q'. Requires a symmetric matrix
/// with non-negative eigenvalues (tiny negatives within -1e-8 * max|lambda|
/// are clamped to zero). Negative entries produced by the recomposition are
/// clipped to 0; *clipped reports when that happened.
inline ContactMatrix power_transform(const ContactMatrix& c, double kappa, bool* clipped = nullptr) {
    PowerTransformResult res = power_transform_with_derivative(c, kappa);
    if (clipped) *clipped = res.clipped;
    return ContactMatrix(std::move(res.matrix), c.labels());
}

/// Divides each row by its sum, yielding a transition matrix.
inline ContactMatrix row_normalize(const ContactMatrix& c) {
    Eigen::MatrixXd w = c.weights();
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
        const double s = w.row(i).sum();
        if (!(s > 0.0)) throw std::domain_error("row_normalize: row " + std::to_string(i) + " sums to zero");
        w.row(i) /= s;
    }
    return ContactMatrix(std::move(w), c.labels());
}

}  // namespace epicast
