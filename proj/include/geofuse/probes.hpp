#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "geofuse/dataset.hpp"
#include "geofuse/errors.hpp"
#include "geofuse/stats.hpp"

namespace geofuse {

// Shallow L2-regularized probes measuring embedding quality: a closed-form
// ridge probe for regression targets and a multinomial logistic probe for
// classification, both scored under a FoldPlan.

// ---------------------------------------------------------------------------
// Ridge probe
// ---------------------------------------------------------------------------

// No intercept: both sides are standardized before fitting.
struct RidgeModel {
    Eigen::MatrixXd weights;  // D x T
    double lambda = 1.0;
};

namespace detail {

inline void require_finite(const Eigen::MatrixXd& m, const std::string& what) {
    if (!m.allFinite()) throw numeric_error(what + ": non-finite entries");
}

}  // namespace detail

// Solves (X'X + lambda I) W = X'Y by LDLT; the shifted Gram matrix is
// symmetric positive-definite for any lambda > 0.
inline RidgeModel ridge_fit(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double lambda) {
    if (x.rows() != y.rows()) throw input_error("ridge_fit: row count mismatch");
    if (x.rows() < 1) throw input_error("ridge_fit: empty training set");
    if (!(lambda > 0.0)) throw input_error("ridge_fit: lambda must be positive");
    detail::require_finite(x, "ridge_fit X");
    detail::require_finite(y, "ridge_fit Y");
    Eigen::MatrixXd gram = x.transpose() * x;
    gram.diagonal().array() += lambda;
    RidgeModel model;
    model.lambda = lambda;
    model.weights = gram.ldlt().solve(x.transpose() * y);
    detail::require_finite(model.weights, "ridge_fit weights");
    return model;
}

inline Eigen::MatrixXd ridge_predict(const RidgeModel& model, const Eigen::MatrixXd& x) {
    if (x.cols() != model.weights.rows())
        throw input_error("ridge_predict: feature dimension mismatch");
    return x * model.weights;
}

// Max-norm of the stationarity residual X'(XW - Y) + lambda W; near zero at
// the ridge optimum.
inline double ridge_kkt_residual(const RidgeModel& model, const Eigen::MatrixXd& x,
                                 const Eigen::MatrixXd& y) {
    const Eigen::MatrixXd r =
        x.transpose() * (x * model.weights - y) + model.lambda * model.weights;
    return r.cwiseAbs().maxCoeff();
}

// ---------------------------------------------------------------------------
// Multinomial logistic probe
// ---------------------------------------------------------------------------

struct LogisticModel {
    Eigen::MatrixXd weights;  // D x C
    Eigen::VectorXd bias;     // C
    double lambda = 1.0;
    bool converged = false;
    int iterations = 0;
    std::vector<double> objective_trace;  // objective value per accepted iterate
};

// Row-wise softmax probabilities for inputs X under a fitted model.
inline Eigen::MatrixXd logistic_probabilities(const LogisticModel& model,
                                              const Eigen::MatrixXd& x) {
    if (x.cols() != model.weights.rows())
        throw input_error("logistic_probabilities: feature dimension mismatch");
    Eigen::MatrixXd z = (x * model.weights).rowwise() + model.bias.transpose();
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double zmax = z.row(i).maxCoeff();
        z.row(i) = (z.row(i).array() - zmax).exp();
        z.row(i) /= z.row(i).sum();
    }
    return z;
}

inline std::vector<int> logistic_predict(const LogisticModel& model, const Eigen::MatrixXd& x) {
    const Eigen::MatrixXd p = logistic_probabilities(model, x);
    std::vector<int> labels(static_cast<std::size_t>(p.rows()));
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        Eigen::Index best = 0;
        p.row(i).maxCoeff(&best);
        labels[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return labels;
}

namespace detail {

// Objective and gradient of the summed multinomial negative log-likelihood
// plus (lambda/2)*||W||^2; the bias column is not penalized. Parameters are
// packed as [vec(W); b] in one flat vector.
struct LogisticProblem {
    const Eigen::MatrixXd& x;       // N x D
    const std::vector<int>& labels; // values in [0, C)
    int num_classes;
    double lambda;

    Eigen::Index dim() const { return x.cols() * num_classes + num_classes; }

    double eval(const Eigen::VectorXd& theta, Eigen::VectorXd& grad) const {
        const Eigen::Index n = x.rows();
        const Eigen::Index d = x.cols();
        const int c = num_classes;
        const Eigen::Map<const Eigen::MatrixXd> w(theta.data(), d, c);
        const Eigen::Map<const Eigen::VectorXd> b(theta.data() + d * c, c);

        Eigen::MatrixXd z = (x * w).rowwise() + b.transpose();
        double nll = 0.0;
        // Softmax residual P - onehot(labels), computed stably per row.
        Eigen::MatrixXd resid(n, c);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double zmax = z.row(i).maxCoeff();
            const Eigen::ArrayXd e = (z.row(i).transpose().array() - zmax).exp();
            const double sum = e.sum();
            nll += std::log(sum) + zmax - z(i, labels[static_cast<std::size_t>(i)]);
            resid.row(i) = (e / sum).matrix().transpose();
            resid(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
        }
        const double objective = nll + 0.5 * lambda * w.squaredNorm();

        grad.resize(theta.size());
        Eigen::Map<Eigen::MatrixXd> gw(grad.data(), d, c);
        Eigen::Map<Eigen::VectorXd> gb(grad.data() + d * c, c);
        gw = x.transpose() * resid + lambda * w;
        gb = resid.colwise().sum().transpose();
        return objective;
    }
};

}  // namespace detail

// Minimizes the regularized multinomial objective with L-BFGS (memory 10) and
// a monotone Armijo backtracking line search, from all-zero initialization.
// Stops when the gradient max-norm falls below `tol` or after `max_iter`
// accepted iterations; `converged` records which.
inline LogisticModel logistic_fit(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                                  int num_classes, double lambda, double tol = 1e-6,
                                  int max_iter = 1000) {
    if (static_cast<std::size_t>(x.rows()) != labels.size())
        throw input_error("logistic_fit: row count mismatch");
    if (num_classes < 2) throw input_error("logistic_fit: need at least 2 classes");
    if (!(lambda > 0.0)) throw input_error("logistic_fit: lambda must be positive");
    detail::require_finite(x, "logistic_fit X");
    for (const int l : labels)
        if (l < 0 || l >= num_classes)
            throw input_error("logistic_fit: label outside [0, C)");

    const detail::LogisticProblem problem{x, labels, num_classes, lambda};
    const Eigen::Index dim = problem.dim();
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd grad(dim);
    double f = problem.eval(theta, grad);

    LogisticModel model;
    model.lambda = lambda;
    model.objective_trace.push_back(f);

    constexpr std::size_t memory = 10;
    std::deque<Eigen::VectorXd> s_hist, y_hist;
    std::deque<double> rho_hist;

    int iter = 0;
    while (grad.cwiseAbs().maxCoeff() >= tol && iter < max_iter) {
        // Two-loop recursion for the L-BFGS direction.
        Eigen::VectorXd q = grad;
        std::vector<double> alpha(s_hist.size());
        for (std::size_t i = s_hist.size(); i-- > 0;) {
            alpha[i] = rho_hist[i] * s_hist[i].dot(q);
            q -= alpha[i] * y_hist[i];
        }
        if (!s_hist.empty()) {
            const double gamma =
                s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
            q *= gamma;
        }
        for (std::size_t i = 0; i < s_hist.size(); ++i) {
            const double beta = rho_hist[i] * y_hist[i].dot(q);
            q += (alpha[i] - beta) * s_hist[i];
        }
        Eigen::VectorXd direction = -q;
        double dir_dot_grad = direction.dot(grad);
        if (!(dir_dot_grad < 0.0)) {  // not a descent direction: reset to steepest
            direction = -grad;
            dir_dot_grad = -grad.squaredNorm();
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }

        // Armijo backtracking keeps the objective monotonically decreasing.
        constexpr double c1 = 1e-4;
        double step = 1.0;
        Eigen::VectorXd theta_new(dim), grad_new(dim);
        double f_new = f;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            theta_new = theta + step * direction;
            f_new = problem.eval(theta_new, grad_new);
            if (std::isfinite(f_new) && f_new <= f + c1 * step * dir_dot_grad) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // no decrease possible at machine precision

        const Eigen::VectorXd s = theta_new - theta;
        const Eigen::VectorXd yv = grad_new - grad;
        const double sy = s.dot(yv);
        if (sy > 1e-12) {
            s_hist.push_back(s);
            y_hist.push_back(yv);
            rho_hist.push_back(1.0 / sy);
            if (s_hist.size() > memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        theta = std::move(theta_new);
        grad = std::move(grad_new);
        f = f_new;
        model.objective_trace.push_back(f);
        ++iter;
    }

    model.iterations = iter;
    model.converged = grad.cwiseAbs().maxCoeff() < tol;
    const Eigen::Index d = x.cols();
    model.weights = Eigen::Map<const Eigen::MatrixXd>(theta.data(), d, num_classes);
    model.bias = theta.segment(d * num_classes, num_classes);
    return model;
}

// Objective value of a parameter setting; exposed for optimizer cross-checks.
inline double logistic_objective(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                                 int num_classes, double lambda, const Eigen::MatrixXd& weights,
                                 const Eigen::VectorXd& bias) {
    Eigen::VectorXd theta(weights.size() + bias.size());
    Eigen::Map<Eigen::MatrixXd>(theta.data(), weights.rows(), weights.cols()) = weights;
    theta.tail(bias.size()) = bias;
    const detail::LogisticProblem problem{x, labels, num_classes, lambda};
    Eigen::VectorXd grad;
    return problem.eval(theta, grad);
}

// ---------------------------------------------------------------------------
// Scoring
// ---------------------------------------------------------------------------

// Per-column R^2 against the test-fold column-mean baseline, averaged over
// columns and scaled to percent. Columns whose true values are all identical
// in the fold carry no signal and are excluded; excluding every column is an
// error. May be negative when predictions are worse than the mean baseline.
enum class R2Baseline { test_mean, train_mean };

inline double score_r2(const Eigen::MatrixXd& y_true, const Eigen::MatrixXd& y_pred,
                       const Eigen::VectorXd* baseline_means = nullptr) {
    if (y_true.rows() != y_pred.rows() || y_true.cols() != y_pred.cols())
        throw input_error("score_r2: shape mismatch");
    if (y_true.rows() < 2) throw input_error("score_r2: need at least 2 rows");
    double sum = 0.0;
    int used = 0;
    for (Eigen::Index t = 0; t < y_true.cols(); ++t) {
        const double col_min = y_true.col(t).minCoeff();
        const double col_max = y_true.col(t).maxCoeff();
        if (col_min == col_max) continue;  // zero-variance column: excluded
        const double base =
            baseline_means ? (*baseline_means)[t] : y_true.col(t).mean();
        const double ss_res = (y_true.col(t) - y_pred.col(t)).squaredNorm();
        const double ss_tot = (y_true.col(t).array() - base).matrix().squaredNorm();
        sum += 1.0 - ss_res / ss_tot;
        ++used;
    }
    if (used == 0) throw input_error("score_r2: every target column has zero variance");
    return 100.0 * sum / static_cast<double>(used);
}

inline double score_accuracy(const std::vector<int>& labels_true,
                             const std::vector<int>& labels_pred) {
    if (labels_true.size() != labels_pred.size())
        throw input_error("score_accuracy: length mismatch");
    if (labels_true.empty()) throw input_error("score_accuracy: empty input");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels_true.size(); ++i)
        if (labels_true[i] == labels_pred[i]) ++hits;
    return 100.0 * static_cast<double>(hits) / static_cast<double>(labels_true.size());
}

// ---------------------------------------------------------------------------
// Cross-validated evaluation
// ---------------------------------------------------------------------------

// fold_scores holds R^2 in percent (regression) or accuracy in percent
// (classification), one entry per fold in fold order. per_location_error is
// filled for regression only: each location's MSE in standardized target
// space, recorded when that location sat in the test fold.
struct EvaluationReport {
    std::string embedding_name;
    std::string task_name;
    std::vector<double> fold_scores;
    double mean = 0.0;
    double sem = 0.0;
    std::vector<double> per_location_error;
    bool has_per_location = false;
};

enum class ZscoreMode { per_fold, global };

struct EvaluateOptions {
    double lambda = 1.0;
    ZscoreMode zscore = ZscoreMode::per_fold;  // fit scalers on training rows only
    R2Baseline r2_baseline = R2Baseline::test_mean;
};

// Runs the probe over every fold: standardize (per options), fit on training
// rows, score on test rows; aggregates mean and SEM over fold scores.
inline EvaluationReport evaluate(const EmbeddingTable& embedding, const TaskTable& task,
                                 const FoldPlan& folds, const EvaluateOptions& options = {}) {
    if (embedding.location_ids != task.location_ids)
        throw input_error("evaluate: embedding and task are not aligned");
    const std::size_t n = embedding.size();

    EvaluationReport report;
    report.embedding_name = embedding.model_name;
    report.task_name = task.task_name;
    report.fold_scores.reserve(folds.k);
    const bool regression = task.kind == TaskKind::regression;
    if (regression) {
        report.per_location_error.assign(n, 0.0);
        report.has_per_location = true;
    }

    // Global mode fits one scaler pair on the whole dataset up front.
    Standardizer x_global, y_global;
    if (options.zscore == ZscoreMode::global) {
        const auto rows = all_rows(n);
        x_global = fit_standardizer(embedding.matrix, rows);
        if (regression) y_global = fit_standardizer(task.targets, rows);
    }

    const auto select_rows = [](const Eigen::MatrixXd& m, const std::vector<std::size_t>& rows) {
        Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
        for (std::size_t i = 0; i < rows.size(); ++i)
            out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
        return out;
    };

    for (std::size_t f = 0; f < folds.k; ++f) {
        const std::vector<std::size_t>& test_rows = folds.test_index_sets[f];
        const std::vector<std::size_t> train_rows = training_rows(folds, f, n);
        if (test_rows.empty() || train_rows.empty())
            throw input_error("evaluate: fold " + std::to_string(f) + " is empty");

        const Eigen::MatrixXd x_train_raw = select_rows(embedding.matrix, train_rows);
        const Eigen::MatrixXd x_test_raw = select_rows(embedding.matrix, test_rows);

        const Standardizer x_scaler = options.zscore == ZscoreMode::global
                                          ? x_global
                                          : fit_standardizer(x_train_raw, all_rows(train_rows.size()));
        const Eigen::MatrixXd x_train = x_scaler.apply(x_train_raw);
        const Eigen::MatrixXd x_test = x_scaler.apply(x_test_raw);

        if (regression) {
            const Eigen::MatrixXd y_train_raw = select_rows(task.targets, train_rows);
            const Eigen::MatrixXd y_test_raw = select_rows(task.targets, test_rows);
            const Standardizer y_scaler =
                options.zscore == ZscoreMode::global
                    ? y_global
                    : fit_standardizer(y_train_raw, all_rows(train_rows.size()));
            const Eigen::MatrixXd y_train = y_scaler.apply(y_train_raw);
            const Eigen::MatrixXd y_test = y_scaler.apply(y_test_raw);

            const RidgeModel model = ridge_fit(x_train, y_train, options.lambda);
            const Eigen::MatrixXd y_hat = ridge_predict(model, x_test);

            if (options.r2_baseline == R2Baseline::train_mean) {
                const Eigen::VectorXd base = y_train.colwise().mean();
                report.fold_scores.push_back(score_r2(y_test, y_hat, &base));
            } else {
                report.fold_scores.push_back(score_r2(y_test, y_hat));
            }
            for (std::size_t i = 0; i < test_rows.size(); ++i) {
                const auto row = static_cast<Eigen::Index>(i);
                report.per_location_error[test_rows[i]] =
                    (y_test.row(row) - y_hat.row(row)).squaredNorm() /
                    static_cast<double>(y_test.cols());
            }
        } else {
            std::vector<int> labels_train(train_rows.size()), labels_test(test_rows.size());
            for (std::size_t i = 0; i < train_rows.size(); ++i)
                labels_train[i] = static_cast<int>(task.targets(
                    static_cast<Eigen::Index>(train_rows[i]), 0));
            for (std::size_t i = 0; i < test_rows.size(); ++i)
                labels_test[i] = static_cast<int>(task.targets(
                    static_cast<Eigen::Index>(test_rows[i]), 0));
            const LogisticModel model =
                logistic_fit(x_train, labels_train, task.num_classes, options.lambda);
            report.fold_scores.push_back(
                score_accuracy(labels_test, logistic_predict(model, x_test)));
        }
    }

    report.mean = geofuse::mean(report.fold_scores);
    report.sem = geofuse::sem(report.fold_scores);
    return report;
}

}  // namespace geofuse
