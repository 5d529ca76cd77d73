#include "omnicomb/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace omnicomb {

namespace {

void require_same_length(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const char* what) {
    if (a.size() != b.size())
        throw Error(std::string(what) + ": length mismatch (" + std::to_string(a.size()) + " vs " +
                    std::to_string(b.size()) + ")");
}

}  // namespace

Eigen::VectorXd null_probs_cv(const Eigen::VectorXd& y, const FoldPlan& plan) {
    if (plan.size() != static_cast<std::size_t>(y.size())) throw Error("null_probs_cv: plan does not match outcome");
    std::vector<double> fold_ones(static_cast<std::size_t>(plan.folds), 0.0);
    std::vector<double> fold_count(static_cast<std::size_t>(plan.folds), 0.0);
    for (std::size_t i = 0; i < plan.size(); ++i) {
        const auto f = static_cast<std::size_t>(plan.fold_of[i]);
        fold_ones[f] += y[static_cast<Eigen::Index>(i)];
        fold_count[f] += 1.0;
    }
    const double total_ones = y.sum();
    const auto n = static_cast<double>(y.size());
    Eigen::VectorXd p0(y.size());
    for (std::size_t i = 0; i < plan.size(); ++i) {
        const auto f = static_cast<std::size_t>(plan.fold_of[i]);
        const double prevalence = (total_ones - fold_ones[f]) / (n - fold_count[f]);
        p0[static_cast<Eigen::Index>(i)] = std::clamp(prevalence, kProbEps, 1.0 - kProbEps);
    }
    return p0;
}

double press(const Eigen::VectorXd& y, const Eigen::VectorXd& p) {
    require_same_length(y, p, "press");
    return (y - p).squaredNorm();
}

double cvss(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
    require_same_length(p, q, "cvss");
    return (p - q).squaredNorm();
}

double q2(const Eigen::VectorXd& y, const Eigen::VectorXd& p, const Eigen::VectorXd& p0) {
    require_same_length(y, p, "q2");
    require_same_length(y, p0, "q2");
    const double denom = press(y, p0);
    if (!(denom > 0.0)) throw Error("q2: PRESS of the null predictor is zero");
    return cvss(p, p0) / denom;
}

double deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& p) {
    require_same_length(y, p, "deviance");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) sum += std::log(1.0 - std::abs(y[i] - p[i]));
    return -2.0 * sum;
}

double deviance_loglik_form(const Eigen::VectorXd& y, const Eigen::VectorXd& p) {
    require_same_length(y, p, "deviance");
    double sum = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) sum += y[i] * std::log(p[i]) + (1.0 - y[i]) * std::log(1.0 - p[i]);
    return -2.0 * sum;
}

double c_index(const Eigen::VectorXd& y, const Eigen::VectorXd& p) {
    require_same_length(y, p, "c_index");
    require_binary(y, "c_index");
    const auto n = static_cast<std::size_t>(y.size());
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return p[static_cast<Eigen::Index>(a)] < p[static_cast<Eigen::Index>(b)];
    });

    // Walk tie groups in increasing p; every case in a group beats all
    // controls seen in earlier groups and ties with controls in its own.
    double concordant = 0.0;
    double controls_below = 0.0;
    double cases = 0.0;
    for (std::size_t start = 0; start < n;) {
        std::size_t end = start;
        double group_cases = 0.0;
        double group_controls = 0.0;
        const double value = p[static_cast<Eigen::Index>(order[start])];
        while (end < n && p[static_cast<Eigen::Index>(order[end])] == value) {
            if (y[static_cast<Eigen::Index>(order[end])] == 1.0) group_cases += 1.0;
            else group_controls += 1.0;
            ++end;
        }
        concordant += group_cases * controls_below + 0.5 * group_cases * group_controls;
        controls_below += group_controls;
        cases += group_cases;
        start = end;
    }
    const double controls = static_cast<double>(n) - cases;
    if (cases < 1.0 || controls < 1.0) throw Error("c_index: outcome must contain both classes");
    return concordant / (cases * controls);
}

MetricsRow metrics_row(std::string label, const Eigen::VectorXd& y, const Eigen::VectorXd& p,
                       const Eigen::VectorXd& p0) {
    MetricsRow row;
    row.label = std::move(label);
    row.n = y.size();
    row.brier_sum = press(y, p);
    row.brier_mean = row.brier_sum / static_cast<double>(y.size());
    row.deviance = deviance(y, p);
    row.q2 = q2(y, p, p0);
    row.c_index = c_index(y, p);
    return row;
}

}  // namespace omnicomb
