#include "doctest.h"
#include "oracle.hpp"

#include "omnicomb/combiners.hpp"
#include "omnicomb/data_io.hpp"
#include "omnicomb/evaluation.hpp"

#include <cmath>

using namespace omnicomb;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd vec(std::initializer_list<double> v) {
    VectorXd out(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

/// Two noisy probability vectors that share a latent score with y.
struct PairedPredictions {
    VectorXd y, p1, p2, latent;
};

PairedPredictions paired(std::uint64_t seed, Index n, double noise1, double noise2) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u;
    PairedPredictions out{VectorXd(n), VectorXd(n), VectorXd(n), VectorXd(n)};
    for (Index i = 0; i < n; ++i) {
        const double z = 1.5 * g(rng) - 0.5;
        out.latent[i] = z;
        out.y[i] = u(rng) < logistic(z) ? 1.0 : 0.0;
        out.p1[i] = logistic(z + noise1 * g(rng));
        out.p2[i] = logistic(z + noise2 * g(rng));
    }
    out.y[0] = 1.0;
    out.y[1] = 0.0;
    return out;
}

VectorXd loo_prevalence(const VectorXd& y) {
    const double s = y.sum();
    const double n = static_cast<double>(y.size());
    return ((s - y.array()) / (n - 1.0)).matrix();
}

CvSettings small_settings(int outer, int inner) {
    CvSettings s;
    s.outer_folds = outer;
    s.inner_folds = inner;
    s.n_lambda = 10;
    s.seed = 5;
    return s;
}

}  // namespace

TEST_CASE("mix arithmetic, endpoints and symmetry") {
    const VectorXd p1 = vec({0.2, 0.8});
    const VectorXd p2 = vec({0.4, 0.6});
    const CombinedPrediction avg = mix(p1, p2, 0.5);
    CHECK(avg.probs[0] == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(avg.probs[1] == doctest::Approx(0.7).epsilon(1e-15));
    CHECK(avg.method == CombineMethod::Average);
    CHECK(avg.parameters.at("w") == 0.5);
    CHECK((mix(p1, p2, 1.0).probs.array() == p1.array()).all());
    CHECK((mix(p1, p2, 0.0).probs.array() == p2.array()).all());
    CHECK(mix(p1, p2, 0.3).method == CombineMethod::Mixture);
    CHECK_THROWS_AS(mix(p1, vec({0.1}), 0.5), Error);
    CHECK_THROWS_AS(mix(p1, p2, 1.5), Error);

    const auto pp = paired(3, 50, 0.5, 1.0);
    for (double w : {0.0, 0.13, 0.5, 0.77, 1.0}) {
        const VectorXd a = mix(pp.p1, pp.p2, w).probs;
        const VectorXd b = mix(pp.p2, pp.p1, 1.0 - w).probs;
        CHECK((a - b).cwiseAbs().maxCoeff() < 1e-15);
        for (Index i = 0; i < a.size(); ++i) {
            CHECK(a[i] >= std::min(pp.p1[i], pp.p2[i]) - 1e-15);
            CHECK(a[i] <= std::max(pp.p1[i], pp.p2[i]) + 1e-15);
        }
    }
}

TEST_CASE("mix at the endpoints keeps the c-index under a common increasing transform") {
    const auto pp = paired(4, 60, 0.5, 1.0);
    const VectorXd t1 = pp.p1.array().cube();
    const VectorXd t2 = pp.p2.array().cube();
    for (double w : {0.0, 1.0})
        CHECK(c_index(pp.y, mix(t1, t2, w).probs) == c_index(pp.y, mix(pp.p1, pp.p2, w).probs));
}

TEST_CASE("weight search: dominant predictor, identical inputs, flags") {
    const auto pp = paired(5, 80, 0.5, 1.0);
    const VectorXd exact = pp.y.cwiseMax(1e-6).cwiseMin(1.0 - 1e-6);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    VectorXd noise(80);
    for (auto& v : noise) v = u(rng);
    for (MixCriterion crit : {MixCriterion::Deviance, MixCriterion::Brier}) {
        CHECK(search_mixture_weight(exact, noise, pp.y, crit).weight == 1.0);
        CHECK(search_mixture_weight(noise, exact, pp.y, crit).weight == 0.0);
        const MixtureSearch same = search_mixture_weight(pp.p1, pp.p1, pp.y, crit);
        CHECK(same.weight == 0.5);
        CHECK(same.flat_maximum);
    }
    const MixtureSearch s = search_mixture_weight(pp.p1, pp.p2, pp.y);
    CHECK(s.weights.size() == 101);
    CHECK(s.combined.parameters.at("in_sample_weight") == 1.0);
    CHECK(s.criterion[static_cast<std::size_t>(std::lround(s.weight * 100))] ==
          *std::min_element(s.criterion.begin(), s.criterion.end()));
    CHECK_THROWS_AS(search_mixture_weight(pp.p1, pp.p2, pp.y, MixCriterion::Deviance, 0.3), Error);
    CHECK_THROWS_AS(search_mixture_weight(pp.p1, pp.p2, VectorXd::Ones(80)), Error);
    CHECK_THROWS_AS(search_mixture_weight(pp.p1, pp.p2.head(10), pp.y), Error);
}

TEST_CASE("highly correlated predictions show a flat maximum") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto pp = paired(40 + seed, 300, 0.1, 0.15);
        REQUIRE(Eigen::Map<const VectorXd>(pp.p1.data(), 300).size() == 300);
        const double r = ((pp.p1.array() - pp.p1.mean()) * (pp.p2.array() - pp.p2.mean())).sum() /
                         std::sqrt((pp.p1.array() - pp.p1.mean()).square().sum() *
                                   (pp.p2.array() - pp.p2.mean()).square().sum());
        REQUIRE(r > 0.95);
        const MixtureSearch s = search_mixture_weight(pp.p1, pp.p2, pp.y);
        CHECK(s.flat_maximum);
        CHECK(s.criterion[50] <= 1.05 * s.criterion[static_cast<std::size_t>(std::lround(s.weight * 100))]);
    }
}

TEST_CASE("model-based stacking reductions") {
    const auto pp = paired(6, 60, 0.5, 1.0);
    const CombinedPrediction both = stack_logistic_loo(pp.p1, pp.p1, pp.y);
    const CombinedPrediction one = recalibrate_loo(pp.p1, pp.y);
    CHECK((both.probs - one.probs).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(both.method == CombineMethod::ModelBased);
    CHECK(one.method == CombineMethod::Recalibrated);

    const VectorXd half = VectorXd::Constant(60, 0.5);
    const CombinedPrediction flat = stack_logistic_loo(half, half, pp.y);
    CHECK((flat.probs - loo_prevalence(pp.y)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("model-based stacking gives positive weights to informative sources") {
    // Each source sees a different half of the signal.
    std::mt19937_64 rng(7);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u;
    PairedPredictions pp{VectorXd(200), VectorXd(200), VectorXd(200), VectorXd(200)};
    for (Index i = 0; i < 200; ++i) {
        const double z1 = g(rng);
        const double z2 = g(rng);
        pp.y[i] = u(rng) < logistic(1.5 * (z1 + z2) - 0.5) ? 1.0 : 0.0;
        pp.p1[i] = logistic(1.5 * z1 + 0.3 * g(rng));
        pp.p2[i] = logistic(1.5 * z2 + 0.3 * g(rng));
    }
    const CombinedPrediction s = stack_logistic_loo(pp.p1, pp.p2, pp.y);
    REQUIRE(s.loo_coefficients.size() == 200);
    for (const auto& c : s.loo_coefficients) {
        REQUIRE(c.size() == 3);
        CHECK(c[1] > 0.0);
        CHECK(c[2] > 0.0);
    }
    CHECK(s.parameters.count("alpha_mean") == 1);
    CHECK(s.parameters.count("beta1_mean") == 1);
    CHECK(s.parameters.count("beta2_mean") == 1);
    // Each refit is an ordinary logistic regression on the other n-1 pairs.
    MatrixXd Z(200, 2);
    Z << logit_clip(pp.p1), logit_clip(pp.p2);
    std::vector<Index> rows;
    for (Index r = 1; r < 200; ++r) rows.push_back(r);
    MatrixXd Zr(199, 2);
    VectorXd yr(199);
    for (Index k = 0; k < 199; ++k) {
        Zr.row(k) = Z.row(rows[static_cast<std::size_t>(k)]);
        yr[k] = pp.y[rows[static_cast<std::size_t>(k)]];
    }
    const auto ref = oracle::maximize(Zr, yr, {}, false, kCombinerStabilizer);
    double alpha = ref.intercept;
    for (Index k = 0; k < 2; ++k) {
        const double mean = Zr.col(k).mean();
        const double sd = std::sqrt((Zr.col(k).array() - mean).square().sum() / 198.0);
        const double beta = ref.beta[k] / sd;
        alpha -= beta * mean;
        CHECK(s.loo_coefficients[0][k + 1] == doctest::Approx(beta).epsilon(1e-4));
    }
    CHECK(s.loo_coefficients[0][0] == doctest::Approx(alpha).epsilon(1e-4));
    const double eta = s.loo_coefficients[0][0] + s.loo_coefficients[0][1] * Z(0, 0) + s.loo_coefficients[0][2] * Z(0, 1);
    CHECK(s.probs[0] == doctest::Approx(logistic(eta)).epsilon(1e-12));
}

TEST_CASE("leave-one-out combiners ignore the left-out label") {
    const auto pp = paired(8, 40, 0.5, 1.0);
    const CombinedPrediction base = stack_logistic_loo(pp.p1, pp.p2, pp.y);
    const CombinedPrediction rbase = recalibrate_loo(pp.p2, pp.y);
    for (Index i : {Index{3}, Index{17}, Index{39}}) {
        VectorXd y2 = pp.y;
        y2[i] = 1.0 - y2[i];
        const CombinedPrediction s = stack_logistic_loo(pp.p1, pp.p2, y2);
        const CombinedPrediction r = recalibrate_loo(pp.p2, y2);
        CHECK(s.probs[i] == base.probs[i]);
        CHECK(r.probs[i] == rbase.probs[i]);
        CHECK((s.loo_coefficients[static_cast<std::size_t>(i)].array() ==
               base.loo_coefficients[static_cast<std::size_t>(i)].array())
                  .all());
        // Perturbing the left-out covariates changes nothing the i-th model saw.
        VectorXd q1 = pp.p1;
        q1[i] = 0.5 * q1[i] + 0.25;
        const CombinedPrediction moved = stack_logistic_loo(q1, pp.p2, pp.y);
        CHECK((moved.loo_coefficients[static_cast<std::size_t>(i)].array() ==
               base.loo_coefficients[static_cast<std::size_t>(i)].array())
                  .all());
    }
}

TEST_CASE("recalibration reductions") {
    const auto pp = paired(9, 50, 0.5, 1.0);
    const CombinedPrediction flat = recalibrate_loo(VectorXd::Constant(50, 0.37), pp.y);
    CHECK((flat.probs - loo_prevalence(pp.y)).cwiseAbs().maxCoeff() < 1e-9);

    // A vector that is a deterministic function of the left-out label separates
    // the data: the refits stay finite and rank perfectly.
    const VectorXd prev = loo_prevalence(pp.y);
    const CombinedPrediction sep = recalibrate_loo(prev, pp.y);
    CHECK(sep.probs.minCoeff() >= 1e-6);
    CHECK(sep.probs.maxCoeff() <= 1.0 - 1e-6);
    for (const auto& c : sep.loo_coefficients) CHECK(c[1] < 0.0);
    CHECK(c_index(pp.y, sep.probs) == 1.0);
}

TEST_CASE("recalibrating an anti-calibrated predictor flips the slope") {
    const auto pp = paired(10, 150, 0.5, 1.0);
    const VectorXd anti = (1.0 - pp.p1.array()).matrix();
    const CombinedPrediction r = recalibrate_loo(anti, pp.y);
    for (const auto& c : r.loo_coefficients) CHECK(c[1] < 0.0);
    // One shared negative slope is a decreasing map of 1 - q, so ranks match exactly.
    const FitResult full = fit_penalized_logistic(logit_clip(anti), pp.y, {}, {PenaltyKind::Ridge, kCombinerStabilizer});
    REQUIRE(full.coefficients[0] < 0.0);
    CHECK(c_index(pp.y, predict_proba(full, logit_clip(anti))) == c_index(pp.y, pp.p1));
    // Leave-one-out refits move the intercept against the left-out label, which
    // costs a little concordance among near ties.
    CHECK(std::abs(c_index(pp.y, r.probs) - c_index(pp.y, pp.p1)) <= 0.02);
}

TEST_CASE("logistic combination errors") {
    CHECK_THROWS_AS(logistic_combination_loo({}, vec({1, 0, 1})), Error);
    CHECK_THROWS_AS(recalibrate_loo(vec({0.2, 0.4}), vec({1, 0, 1})), Error);
    CHECK_THROWS_AS(recalibrate_loo(vec({0.2, 0.4}), vec({1, 0})), Error);
}

TEST_CASE("sequential offset with an uninformative second source recalibrates the intercept") {
    const auto pp = paired(11, 60, 0.5, 1.0);
    const MatrixXd X2 = MatrixXd::Constant(60, 3, 1.0);
    const FoldPlan plan = make_folds(pp.y, 6, 2, true);
    const CombinedPrediction seq =
        sequential_offset(pp.p1, X2, pp.y, PenaltyKind::Lasso, plan, small_settings(6, 3));
    const VectorXd off = logit_clip(pp.p1);
    for (int f = 0; f < plan.folds; ++f) {
        const auto tr = plan.complement(f);
        const double a = null_intercept(take(pp.y, tr), take(off, tr));
        for (Index i : plan.members(f)) CHECK(std::abs(seq.probs[i] - logistic(off[i] + a)) <= 1e-8);
    }
    CHECK(seq.method == CombineMethod::Sequential);
}

TEST_CASE("sequential offset with a flat primary equals single-source double CV") {
    const auto prob = oracle::random_problem(12, 90, 10);
    const FoldPlan plan = make_folds(prob.y, 5, 3, true);
    const CvSettings cv = small_settings(5, 4);
    for (PenaltyKind kind : {PenaltyKind::Ridge, PenaltyKind::Lasso}) {
        const CombinedPrediction seq =
            sequential_offset(VectorXd::Constant(90, 0.5), prob.X, prob.y, kind, plan, cv);
        const DoubleCvResult single = double_cv_predict(prob.X, prob.y, {}, kind, plan, cv);
        CHECK((seq.probs.array() == single.oof_probs.array()).all());
    }
}

TEST_CASE("sequential offset under leave-one-out ignores the left-out label") {
    const auto prob = oracle::random_problem(13, 36, 4);
    const auto pp = paired(14, 36, 0.7, 1.0);
    const FoldPlan loo = leave_one_out_plan(36);
    const CvSettings cv = small_settings(36, 3);
    const CombinedPrediction base = sequential_offset(pp.p1, prob.X, prob.y, PenaltyKind::Ridge, loo, cv);
    for (Index i : {Index{2}, Index{20}}) {
        VectorXd y2 = prob.y;
        y2[i] = 1.0 - y2[i];
        // Keep the inner stratification feasible.
        if (y2.sum() < 3 || y2.sum() > 33) continue;
        const CombinedPrediction s = sequential_offset(pp.p1, prob.X, y2, PenaltyKind::Ridge, loo, cv);
        CHECK(s.probs[i] == base.probs[i]);
        MatrixXd X2 = prob.X;
        X2.row(i).setConstant(100.0);
        VectorXd q = pp.p1;
        q[i] = 0.99;
        const CombinedPrediction moved = sequential_offset(q, X2, prob.y, PenaltyKind::Ridge, loo, cv);
        REQUIRE(moved.cv.has_value());
        CHECK(moved.cv->chosen_lambda[static_cast<std::size_t>(i)] ==
              base.cv->chosen_lambda[static_cast<std::size_t>(i)]);
    }
}

TEST_CASE("sequential offset gains from an orthogonal second source") {
    SyntheticConfig cfg;
    cfg.n = 300;
    cfg.p1 = 20;
    cfg.p2 = 30;
    const SyntheticData data = generate_synthetic(cfg);
    const VectorXd& y = data.bundle.outcome.labels;
    const CvSettings cv = small_settings(5, 5);
    const FoldPlan plan = make_folds(y, 5, 42, true);
    const VectorXd p1 =
        double_cv_predict(data.bundle.sources[0].matrix.values, y, {}, PenaltyKind::Ridge, plan, cv).oof_probs;
    const CombinedPrediction seq =
        sequential_offset(p1, data.bundle.sources[1].matrix.values, y, PenaltyKind::Ridge, plan, cv);
    CHECK(c_index(y, seq.probs) > c_index(y, p1));
}

TEST_CASE("naive stacking concatenates sources") {
    const auto a = oracle::random_problem(15, 50, 3);
    const auto b = oracle::random_problem(16, 50, 2);
    DesignMatrix X1{a.X, {"f1", "f2", "f3"}, {}};
    DesignMatrix X2{b.X, {"g1", "g2"}, {}};
    for (int i = 0; i < 50; ++i) {
        X1.sample_ids.push_back("s" + std::to_string(i));
        X2.sample_ids.push_back("s" + std::to_string(i));
    }
    const DesignMatrix joint = concat_sources(X1, "1", X2, "2");
    CHECK(joint.cols() == 5);
    CHECK(joint.feature_names == std::vector<std::string>{"1:f1", "1:f2", "1:f3", "2:g1", "2:g2"});
    CHECK(joint.values.leftCols(3) == a.X);
    CHECK(joint.values.rightCols(2) == b.X);

    DesignMatrix empty{MatrixXd(50, 0), {}, X1.sample_ids};
    const FoldPlan plan = make_folds(a.y, 5, 1, true);
    const CvSettings cv = small_settings(5, 3);
    const CombinedPrediction naive = naive_stack(X1, empty, a.y, PenaltyKind::Lasso, plan, cv);
    const DoubleCvResult single = double_cv_predict(a.X, a.y, {}, PenaltyKind::Lasso, plan, cv);
    CHECK((naive.probs.array() == single.oof_probs.array()).all());
    CHECK(naive.method == CombineMethod::Naive);

    DesignMatrix shuffled = X2;
    std::swap(shuffled.sample_ids[0], shuffled.sample_ids[1]);
    CHECK_THROWS_AS(concat_sources(X1, "1", shuffled, "2"), Error);
    CHECK_THROWS_AS(concat_sources(X1, "1", DesignMatrix{MatrixXd(10, 1), {"x"}, {}}, "2"), Error);
}

TEST_CASE("naive stacking dilutes a small informative source") {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> u;
    const Index n = 200;
    DesignMatrix X1{MatrixXd(n, 5), {}, {}};
    DesignMatrix X2{MatrixXd(n, 150), {}, {}};
    VectorXd y(n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < 5; ++j) X1.values(i, j) = g(rng);
        for (Index j = 0; j < 150; ++j) X2.values(i, j) = g(rng);
        y[i] = u(rng) < logistic(X1.values.row(i).sum() * 0.6) ? 1.0 : 0.0;
        X1.sample_ids.push_back(std::to_string(i));
    }
    X2.sample_ids = X1.sample_ids;
    for (int j = 0; j < 5; ++j) X1.feature_names.push_back("a" + std::to_string(j));
    for (int j = 0; j < 150; ++j) X2.feature_names.push_back("b" + std::to_string(j));
    const FoldPlan plan = make_folds(y, 5, 3, true);
    const CvSettings cv = small_settings(5, 5);
    const double single =
        c_index(y, double_cv_predict(X1.values, y, {}, PenaltyKind::Ridge, plan, cv).oof_probs);
    const double naive = c_index(y, naive_stack(X1, X2, y, PenaltyKind::Ridge, plan, cv).probs);
    CHECK(naive <= single + 0.02);
}
