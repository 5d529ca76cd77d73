#include "omnicomb/cross_validation.hpp"

#include "omnicomb/evaluation.hpp"
#include "omnicomb/parallel.hpp"

#include <sstream>

namespace omnicomb {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd take_rows(const MatrixXd& X, const std::vector<Index>& rows) {
    MatrixXd out(static_cast<Index>(rows.size()), X.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) out.row(static_cast<Index>(k)) = X.row(rows[k]);
    return out;
}

VectorXd take(const VectorXd& v, const std::vector<Index>& rows) {
    if (v.size() == 0) return {};
    VectorXd out(static_cast<Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) out[static_cast<Index>(k)] = v[rows[k]];
    return out;
}

std::size_t choose_lambda(const std::vector<LambdaScore>& scores) {
    std::size_t best = scores.size();
    for (std::size_t l = 0; l < scores.size(); ++l) {
        if (!scores[l].converged) continue;
        if (best == scores.size() || scores[l].deviance < scores[best].deviance) best = l;
    }
    if (best == scores.size()) {
        std::ostringstream msg;
        msg << "no lambda in the grid converged on every inner fold";
        if (!scores.empty()) msg << " (grid " << scores.front().lambda << " .. " << scores.back().lambda << ")";
        throw Error(msg.str());
    }
    return best;
}

LambdaSelection select_lambda_inner(const MatrixXd& X, const VectorXd& y, const VectorXd& offset,
                                    PenaltyKind kind, const std::vector<double>& grid, int inner_folds,
                                    std::uint64_t seed) {
    if (grid.empty()) throw Error("select_lambda_inner: empty lambda grid");
    const FoldPlan plan = make_folds(y, inner_folds, seed, true);
    const std::size_t L = grid.size();

    std::vector<std::vector<double>> dev(static_cast<std::size_t>(inner_folds), std::vector<double>(L));
    std::vector<std::vector<char>> ok(static_cast<std::size_t>(inner_folds), std::vector<char>(L));
    parallel_for(static_cast<std::size_t>(inner_folds), [&](std::size_t k) {
        const auto train = plan.complement(static_cast<int>(k));
        const auto test = plan.members(static_cast<int>(k));
        const MatrixXd Xte = take_rows(X, test);
        const VectorXd yte = take(y, test);
        const VectorXd ote = take(offset, test);
        const auto fits = fit_path(take_rows(X, train), take(y, train), take(offset, train), kind, grid);
        for (std::size_t l = 0; l < L; ++l) {
            dev[k][l] = deviance(yte, predict_proba(fits[l], Xte, ote));
            ok[k][l] = fits[l].converged ? 1 : 0;
        }
    });

    LambdaSelection sel;
    sel.scores.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
        sel.scores[l].lambda = grid[l];
        for (std::size_t k = 0; k < dev.size(); ++k) {
            sel.scores[l].deviance += dev[k][l];
            if (!ok[k][l]) sel.scores[l].converged = false;
        }
    }
    sel.index = choose_lambda(sel.scores);
    sel.lambda = grid[sel.index];
    return sel;
}

TrainedModel train_with_inner_cv(const MatrixXd& X, const VectorXd& y, const VectorXd& offset, PenaltyKind kind,
                                 const CvSettings& settings, std::uint64_t seed) {
    const Standardized st = standardize(X);
    const std::vector<double> grid =
        lambda_grid(st.values, y, kind, settings.n_lambda, settings.lambda_min_ratio, offset);
    TrainedModel model;
    model.selection = select_lambda_inner(X, y, offset, kind, grid, settings.inner_folds, seed);
    const std::span<const double> prefix(grid.data(), model.selection.index + 1);
    auto fits = fit_path(X, y, offset, kind, prefix);
    model.fit = std::move(fits.back());
    return model;
}

DoubleCvResult double_cv_predict(const MatrixXd& X, const VectorXd& y, const VectorXd& offset, PenaltyKind kind,
                                 const FoldPlan& plan, const CvSettings& settings) {
    if (y.size() != X.rows()) throw Error("double_cv_predict: outcome length does not match design rows");
    if (plan.size() != static_cast<std::size_t>(y.size())) throw Error("double_cv_predict: fold plan does not match outcome");
    if (offset.size() != 0 && offset.size() != y.size()) throw Error("double_cv_predict: offset length mismatch");

    const auto J = static_cast<std::size_t>(plan.folds);
    std::vector<VectorXd> fold_probs(J);
    std::vector<std::vector<Index>> fold_rows(J);
    DoubleCvResult result;
    result.penalty_kind = kind;
    result.plan = plan;
    result.chosen_lambda.resize(J);
    result.inner_scores.resize(J);

    parallel_for(J, [&](std::size_t j) {
        const int fold = static_cast<int>(j);
        const auto train = plan.complement(fold);
        const auto test = plan.members(fold);
        if (test.empty()) throw Error("outer fold " + std::to_string(j) + " is empty");
        const TrainedModel model = train_with_inner_cv(take_rows(X, train), take(y, train), take(offset, train), kind,
                                                       settings, derive_seed(settings.seed, j));
        fold_probs[j] = predict_proba(model.fit, take_rows(X, test), take(offset, test));
        fold_rows[j] = test;
        result.chosen_lambda[j] = model.selection.lambda;
        result.inner_scores[j] = model.selection.scores;
    });

    result.oof_probs.resize(y.size());
    for (std::size_t j = 0; j < J; ++j) {
        for (std::size_t k = 0; k < fold_rows[j].size(); ++k)
            result.oof_probs[fold_rows[j][k]] = fold_probs[j][static_cast<Index>(k)];
    }
    return result;
}

DoubleCvResult double_cv_predict(const MatrixXd& X, const VectorXd& y, const VectorXd& offset, PenaltyKind kind,
                                 const CvSettings& settings) {
    const FoldPlan plan = make_folds(y, settings.outer_folds, settings.seed, settings.stratified);
    return double_cv_predict(X, y, offset, kind, plan, settings);
}

}  // namespace omnicomb
