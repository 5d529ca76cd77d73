#include "omnicomb/combiners.hpp"

#include "omnicomb/evaluation.hpp"
#include "omnicomb/parallel.hpp"

#include <cmath>
#include <numeric>

namespace omnicomb {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string_view to_string(CombineMethod method) {
    switch (method) {
        case CombineMethod::Naive: return "naive";
        case CombineMethod::Average: return "average";
        case CombineMethod::Mixture: return "mixture";
        case CombineMethod::ModelBased: return "model_based";
        case CombineMethod::Recalibrated: return "recalibrated";
        case CombineMethod::Sequential: return "sequential";
    }
    return "unknown";
}

CombinedPrediction mix(const VectorXd& p1, const VectorXd& p2, double w) {
    if (p1.size() != p2.size()) throw Error("mix: length mismatch");
    if (!(w >= 0.0 && w <= 1.0)) throw Error("mix: weight must lie in [0,1]");
    CombinedPrediction out;
    out.method = w == 0.5 ? CombineMethod::Average : CombineMethod::Mixture;
    out.label = std::string(to_string(out.method));
    out.probs = w * p1 + (1.0 - w) * p2;
    out.parameters["w"] = w;
    return out;
}

MixtureSearch search_mixture_weight(const VectorXd& p1, const VectorXd& p2, const VectorXd& y, MixCriterion criterion,
                                    double grid_step) {
    if (p1.size() != p2.size() || p1.size() != y.size()) throw Error("search_mixture_weight: length mismatch");
    require_binary(y, "search_mixture_weight");
    require_both_classes(y, "search_mixture_weight");
    if (!(grid_step > 0.0 && grid_step <= 1.0)) throw Error("search_mixture_weight: grid step must lie in (0,1]");
    const double steps = std::round(1.0 / grid_step);
    if (std::abs(steps * grid_step - 1.0) > 1e-9) throw Error("search_mixture_weight: grid step must divide 1");
    const int K = static_cast<int>(steps);

    auto score = [&](double w) {
        const VectorXd pc = w * p1 + (1.0 - w) * p2;
        return criterion == MixCriterion::Deviance ? deviance(y, pc) : press(y, pc);
    };

    MixtureSearch out;
    std::size_t best = 0;
    for (int k = 0; k <= K; ++k) {
        const double w = static_cast<double>(k) / K;
        out.weights.push_back(w);
        out.criterion.push_back(score(w));
        const std::size_t cur = out.weights.size() - 1;
        const double tol = 1e-12 * std::abs(out.criterion[best]);
        if (out.criterion[cur] < out.criterion[best] - tol) {
            best = cur;
        } else if (std::abs(out.criterion[cur] - out.criterion[best]) <= tol &&
                   std::abs(w - 0.5) < std::abs(out.weights[best] - 0.5)) {
            best = cur;
        }
    }
    out.weight = out.weights[best];
    out.flat_maximum = score(0.5) <= 1.05 * out.criterion[best];
    out.combined = mix(p1, p2, out.weight);
    out.combined.parameters["in_sample_weight"] = 1.0;
    out.combined.parameters["flat_maximum"] = out.flat_maximum ? 1.0 : 0.0;
    return out;
}

CombinedPrediction logistic_combination_loo(const std::vector<VectorXd>& sources, const VectorXd& y) {
    if (sources.empty()) throw Error("logistic combination needs at least one prediction vector");
    const Index n = y.size();
    for (const auto& s : sources)
        if (s.size() != n) throw Error("logistic combination: prediction length does not match outcome");
    require_binary(y, "logistic combination");
    if (n < 3) throw Error("logistic combination needs at least 3 samples");

    MatrixXd Z(n, static_cast<Index>(sources.size()));
    for (std::size_t k = 0; k < sources.size(); ++k) Z.col(static_cast<Index>(k)) = logit_clip(sources[k]);

    CombinedPrediction out;
    out.probs.resize(n);
    out.loo_coefficients.resize(static_cast<std::size_t>(n));
    const PenaltySpec stabilizer{PenaltyKind::Ridge, kCombinerStabilizer};

    parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
        std::vector<Index> rows;
        rows.reserve(static_cast<std::size_t>(n - 1));
        for (Index r = 0; r < n; ++r)
            if (r != static_cast<Index>(i)) rows.push_back(r);
        const FitResult fit = fit_penalized_logistic(take_rows(Z, rows), take(y, rows), {}, stabilizer);
        if (!fit.converged)
            throw Error("logistic combination did not converge with sample " + std::to_string(i) + " left out");
        out.probs[static_cast<Index>(i)] = predict_proba(fit, Z.row(static_cast<Index>(i)))[0];
        const RawCoefficients raw = raw_coefficients(fit);
        VectorXd coef(raw.coefficients.size() + 1);
        coef << raw.intercept, raw.coefficients;
        out.loo_coefficients[i] = coef;
    });

    VectorXd mean_coef = VectorXd::Zero(Z.cols() + 1);
    for (const auto& c : out.loo_coefficients) mean_coef += c;
    mean_coef /= static_cast<double>(n);
    out.parameters["alpha_mean"] = mean_coef[0];
    for (Index k = 0; k < Z.cols(); ++k) out.parameters["beta" + std::to_string(k + 1) + "_mean"] = mean_coef[k + 1];
    return out;
}

CombinedPrediction stack_logistic_loo(const VectorXd& p1, const VectorXd& p2, const VectorXd& y) {
    CombinedPrediction out = logistic_combination_loo({p1, p2}, y);
    out.method = CombineMethod::ModelBased;
    out.label = "model_based";
    return out;
}

CombinedPrediction recalibrate_loo(const VectorXd& pk, const VectorXd& y) {
    CombinedPrediction out = logistic_combination_loo({pk}, y);
    out.method = CombineMethod::Recalibrated;
    out.label = "recalibrated";
    return out;
}

CombinedPrediction sequential_offset(const VectorXd& p1, const MatrixXd& X2, const VectorXd& y, PenaltyKind kind,
                                     const FoldPlan& outer_plan, const CvSettings& settings) {
    if (p1.size() != y.size() || X2.rows() != y.size()) throw Error("sequential_offset: inputs are not aligned");
    CombinedPrediction out;
    out.method = CombineMethod::Sequential;
    out.label = "sequential";
    DoubleCvResult cv = double_cv_predict(X2, y, logit_clip(p1), kind, outer_plan, settings);
    out.probs = cv.oof_probs;
    const double lambda_sum = std::accumulate(cv.chosen_lambda.begin(), cv.chosen_lambda.end(), 0.0);
    out.parameters["lambda_mean"] = lambda_sum / static_cast<double>(cv.chosen_lambda.size());
    out.cv = std::move(cv);
    return out;
}

DesignMatrix concat_sources(const DesignMatrix& X1, std::string_view name1, const DesignMatrix& X2,
                            std::string_view name2) {
    if (X1.rows() != X2.rows()) throw Error("naive stack: sources have different sample counts");
    if (X1.sample_ids != X2.sample_ids) throw Error("naive stack: sources are not aligned on sample ids");
    DesignMatrix out;
    out.sample_ids = X1.sample_ids;
    out.values.resize(X1.rows(), X1.cols() + X2.cols());
    out.values << X1.values, X2.values;
    out.feature_names.reserve(static_cast<std::size_t>(out.values.cols()));
    for (const auto& f : X1.feature_names) out.feature_names.push_back(std::string(name1) + ":" + f);
    for (const auto& f : X2.feature_names) out.feature_names.push_back(std::string(name2) + ":" + f);
    return out;
}

CombinedPrediction naive_stack(const DesignMatrix& X1, const DesignMatrix& X2, const VectorXd& y, PenaltyKind kind,
                               const FoldPlan& plan, const CvSettings& settings) {
    const DesignMatrix joint = concat_sources(X1, "1", X2, "2");
    CombinedPrediction out;
    out.method = CombineMethod::Naive;
    out.label = "naive";
    DoubleCvResult cv = double_cv_predict(joint.values, y, {}, kind, plan, settings);
    out.probs = cv.oof_probs;
    out.cv = std::move(cv);
    return out;
}

}  // namespace omnicomb
