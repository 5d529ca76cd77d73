#pragma once

#include "omnicomb/folds.hpp"
#include "omnicomb/penalized_glm.hpp"

#include <cstdint>
#include <vector>

namespace omnicomb {

struct CvSettings {
    int outer_folds = 10;
    int inner_folds = 10;
    int n_lambda = 20;
    double lambda_min_ratio = 1e-2;
    std::uint64_t seed = 42;
    bool stratified = true;
};

struct LambdaScore {
    double lambda = 0.0;
    double deviance = 0.0;  // summed over inner held-out folds
    bool converged = true;  // every inner fit at this lambda converged
};

struct LambdaSelection {
    double lambda = 0.0;
    std::size_t index = 0;
    std::vector<LambdaScore> scores;
};

/// Index of the smallest deviance among converged entries; ties go to the
/// earliest entry, which is the largest lambda for a descending grid.
/// Throws if nothing converged.
std::size_t choose_lambda(const std::vector<LambdaScore>& scores);

/// Inner K-fold cross-validated deviance over the grid (descending). The
/// inner plan is stratified and seeded with `seed`.
LambdaSelection select_lambda_inner(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& offset, PenaltyKind kind,
                                    const std::vector<double>& grid, int inner_folds,
                                    std::uint64_t seed);

/// Model trained on one outer training set: grid from the training rows,
/// inner selection, final fit.
struct TrainedModel {
    FitResult fit;
    LambdaSelection selection;
};

TrainedModel train_with_inner_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& offset, PenaltyKind kind,
                                 const CvSettings& settings, std::uint64_t seed);

struct DoubleCvResult {
    Eigen::VectorXd oof_probs;
    std::vector<double> chosen_lambda;                 // per outer fold
    std::vector<std::vector<LambdaScore>> inner_scores;  // per outer fold
    PenaltyKind penalty_kind = PenaltyKind::Ridge;
    FoldPlan plan;
};

/// Double cross-validation with an explicit outer plan. Outer fold j uses
/// derive_seed(settings.seed, j) for its inner plan. An empty offset means zeros.
DoubleCvResult double_cv_predict(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& offset, PenaltyKind kind, const FoldPlan& plan,
                                 const CvSettings& settings);

/// Same, with the outer plan built by make_folds(y, outer_folds, seed, stratified).
DoubleCvResult double_cv_predict(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& offset, PenaltyKind kind,
                                 const CvSettings& settings);

/// Rows of X (or entries of v) at the given indices.
Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X, const std::vector<Eigen::Index>& rows);
Eigen::VectorXd take(const Eigen::VectorXd& v, const std::vector<Eigen::Index>& rows);

}  // namespace omnicomb
