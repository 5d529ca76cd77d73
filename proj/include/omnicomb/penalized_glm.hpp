#pragma once

// Ridge- and lasso-penalized logistic regression with an optional per-sample
// offset. The objective is the summed log-likelihood minus lambda * pen(beta),
// so lambda lives on the sum scale. Features are standardized inside the fit
// and the stored coefficients refer to the standardized columns; prediction
// re-applies the stored standardization.

#include "omnicomb/types.hpp"

#include <optional>
#include <span>
#include <vector>

namespace omnicomb {

struct FeatureStats {
    double mean = 0.0;
    double sd = 0.0;  // 0 marks a constant column
};

struct Standardized {
    Eigen::MatrixXd values;
    std::vector<FeatureStats> stats;
};

/// Centers and scales every column to mean 0 and sample sd 1 (divisor n-1).
/// Constant columns become all-zero with sd recorded as 0.
Standardized standardize(const Eigen::MatrixXd& X);

/// Applies previously computed column stats to new rows.
Eigen::MatrixXd apply_standardization(const Eigen::MatrixXd& X, std::span<const FeatureStats> stats);

double logistic(double eta);

/// logistic(eta) clipped to [kProbEps, 1 - kProbEps].
double clipped_probability(double eta);

/// log(p'/(1-p')) with p' = clamp(p, eps, 1-eps).
double logit_clip(double p, double eps = kProbEps);
Eigen::VectorXd logit_clip(const Eigen::VectorXd& p, double eps = kProbEps);

/// Unpenalized log-likelihood sum_i y_i log p_i + (1-y_i) log(1-p_i).
double log_likelihood(const Eigen::VectorXd& y, const Eigen::VectorXd& p);

/// Maximum-likelihood intercept of the intercept-only model with the given
/// offset. An empty offset means all zeros, for which the closed form
/// logit(mean(y)) is returned.
double null_intercept(const Eigen::VectorXd& y, const Eigen::VectorXd& offset);

/// Smallest lambda for which the lasso solution is all-zero:
/// max_j |x_j^T (y - mu0)| with mu0 the intercept-only fit (mean(y) when the
/// offset is empty or zero). Xs must be standardized.
double lambda_max(const Eigen::MatrixXd& Xs, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& offset = {});

/// Descending log-spaced lambda values. Lasso spans [lambda_max * min_ratio,
/// lambda_max]; ridge spans [lambda_max * min_ratio, lambda_max * 100].
/// Rejects X whose non-constant columns are not centered.
std::vector<double> lambda_grid(const Eigen::MatrixXd& Xs, const Eigen::VectorXd& y,
                                PenaltyKind kind, int n_values, double min_ratio,
                                const Eigen::VectorXd& offset = {});

struct FitOptions {
    int max_iter = 200;
    double rel_objective_tol = 1e-8;
    double coefficient_tol = 1e-7;
    bool fit_intercept = true;

    struct WarmStart {
        double intercept = 0.0;
        Eigen::VectorXd coefficients;  // standardized scale, length p
    };
    std::optional<WarmStart> warm_start;
};

struct FitResult {
    double intercept = 0.0;
    Eigen::VectorXd coefficients;  // standardized scale, 0 for constant columns
    PenaltySpec penalty;
    std::vector<FeatureStats> standardization;
    bool fit_intercept = true;
    bool converged = false;
    int iterations = 0;
    double objective = 0.0;  // penalized log-likelihood at the solution

    Eigen::VectorXd fitted;                // training probabilities at the solution
    std::vector<double> objective_trace;   // start point, then every accepted step

    Eigen::Index n_features() const { return coefficients.size(); }
};

/// Maximizes sum_i [y_i log p_i + (1-y_i) log(1-p_i)] - lambda * pen(beta)
/// with logit(p_i) = intercept + offset_i + x_i^T beta. Ridge uses damped
/// Newton steps; lasso uses coordinate descent on the IRLS quadratic with a
/// backtracking step. Non-convergence is reported through `converged`.
/// An empty offset means all zeros.
FitResult fit_penalized_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& offset, const PenaltySpec& penalty,
                                 const FitOptions& options = {});

/// Fits a descending lambda sequence, warm-starting each fit from the previous one.
std::vector<FitResult> fit_path(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& offset, PenaltyKind kind,
                                std::span<const double> lambdas, const FitOptions& options = {});

/// Class-1 probabilities clipped to [kProbEps, 1-kProbEps].
Eigen::VectorXd predict_proba(const FitResult& fit, const Eigen::MatrixXd& X,
                              const Eigen::VectorXd& offset = {});

/// Largest violation of the optimality conditions of the penalized objective.
double kkt_max_violation(const FitResult& fit, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const Eigen::VectorXd& offset = {});

/// Penalized objective for the given parameters on the standardized scale.
double penalized_objective(const FitResult& fit, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& offset = {});

struct RawCoefficients {
    double intercept = 0.0;
    Eigen::VectorXd coefficients;
};

/// Coefficients mapped back to the unstandardized feature scale.
RawCoefficients raw_coefficients(const FitResult& fit);

}  // namespace omnicomb
