#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <string>
#include <vector>

#include "geofuse/dataset.hpp"
#include "geofuse/errors.hpp"

namespace geofuse {

// Task-agnostic similarity between two embedding tables: mean canonical
// correlation and linear centered kernel alignment. Both center internally,
// so constant row offsets never matter.

struct SimilarityReport {
    std::string model_a;
    std::string model_b;
    double cca_mean = 0.0;  // in [0, 1]
    double cka = 0.0;       // in [0, 1]
};

namespace detail {

inline Eigen::MatrixXd center_columns(const Eigen::MatrixXd& x) {
    return x.rowwise() - x.colwise().mean();
}

// Inverse square root of a symmetric PSD matrix with a ridge on the diagonal.
inline Eigen::MatrixXd inverse_sqrt_psd(const Eigen::MatrixXd& m, double epsilon) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
    if (eig.info() != Eigen::Success)
        throw numeric_error("similarity: eigendecomposition failed");
    Eigen::VectorXd inv_sqrt = eig.eigenvalues();
    for (Eigen::Index i = 0; i < inv_sqrt.size(); ++i) {
        const double v = std::max(inv_sqrt[i], 0.0) + epsilon;
        inv_sqrt[i] = 1.0 / std::sqrt(v);
    }
    return eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace detail

// Mean canonical correlation: singular values of the whitened cross-covariance
// (Sxx+eI)^{-1/2} Sxy (Syy+eI)^{-1/2}, clipped to [0,1], averaged over the
// top min(D1, D2) values. Covariances use divisor N; the factor cancels.
inline double cca_mean_correlation(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                   double epsilon = 1e-8) {
    if (x.rows() != y.rows()) throw input_error("cca: row count mismatch");
    if (x.rows() < 2) throw input_error("cca: need at least 2 rows");
    if (!x.allFinite() || !y.allFinite()) throw numeric_error("cca: non-finite inputs");
    const auto n = static_cast<double>(x.rows());
    const Eigen::MatrixXd xc = detail::center_columns(x);
    const Eigen::MatrixXd yc = detail::center_columns(y);
    const Eigen::MatrixXd sxx = xc.transpose() * xc / n;
    const Eigen::MatrixXd syy = yc.transpose() * yc / n;
    const Eigen::MatrixXd sxy = xc.transpose() * yc / n;
    const Eigen::MatrixXd m = detail::inverse_sqrt_psd(sxx, epsilon) * sxy *
                              detail::inverse_sqrt_psd(syy, epsilon);
    const Eigen::BDCSVD<Eigen::MatrixXd> svd(m);
    const Eigen::VectorXd sv = svd.singularValues();
    const Eigen::Index k = std::min(x.cols(), y.cols());
    double sum = 0.0;
    for (Eigen::Index i = 0; i < k; ++i) {
        const double v = i < sv.size() ? sv[i] : 0.0;
        sum += std::clamp(v, 0.0, 1.0);
    }
    return sum / static_cast<double>(k);
}

// Linear CKA: ||Yc'Xc||_F^2 / (||Xc'Xc||_F * ||Yc'Yc||_F). Invariant to
// orthogonal transforms and isotropic scaling of either argument.
inline double linear_cka(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    if (x.rows() != y.rows()) throw input_error("cka: row count mismatch");
    if (x.rows() < 2) throw input_error("cka: need at least 2 rows");
    if (!x.allFinite() || !y.allFinite()) throw numeric_error("cka: non-finite inputs");
    const Eigen::MatrixXd xc = detail::center_columns(x);
    const Eigen::MatrixXd yc = detail::center_columns(y);
    const double xx = (xc.transpose() * xc).norm();
    const double yy = (yc.transpose() * yc).norm();
    if (xx == 0.0 || yy == 0.0)
        throw input_error("cka: an input is constant (zero variance after centering)");
    const double xy = (yc.transpose() * xc).squaredNorm();
    return xy / (xx * yy);
}

// One report per unordered pair of tables (i < j), in pair-index order.
inline std::vector<SimilarityReport> pairwise_similarity(
    const std::vector<EmbeddingTable>& embeddings, double epsilon = 1e-8) {
    if (embeddings.size() < 2)
        throw input_error("pairwise_similarity: need at least 2 embeddings");
    for (std::size_t i = 1; i < embeddings.size(); ++i)
        if (embeddings[i].location_ids != embeddings[0].location_ids)
            throw input_error("pairwise_similarity: embeddings are not aligned");
    std::vector<SimilarityReport> out;
    for (std::size_t i = 0; i < embeddings.size(); ++i) {
        for (std::size_t j = i + 1; j < embeddings.size(); ++j) {
            SimilarityReport r;
            r.model_a = embeddings[i].model_name;
            r.model_b = embeddings[j].model_name;
            r.cca_mean = cca_mean_correlation(embeddings[i].matrix, embeddings[j].matrix, epsilon);
            r.cka = linear_cka(embeddings[i].matrix, embeddings[j].matrix);
            out.push_back(std::move(r));
        }
    }
    return out;
}

}  // namespace geofuse
