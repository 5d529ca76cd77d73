#include "omnicomb/penalized_glm.hpp"

#include <algorithm>
#include <cmath>

namespace omnicomb {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

bool is_constant(double mean, double sd) {
    return sd == 0.0 || sd <= 1e-12 * std::abs(mean);
}

FeatureStats column_stats(const Eigen::Ref<const VectorXd>& col) {
    const auto n = static_cast<double>(col.size());
    FeatureStats s;
    s.mean = col.sum() / n;
    const double ss = (col.array() - s.mean).square().sum();
    s.sd = n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    if (is_constant(s.mean, s.sd)) s.sd = 0.0;
    return s;
}

void standardize_column(const Eigen::Ref<const VectorXd>& col, const FeatureStats& s,
                        Eigen::Ref<VectorXd> out) {
    if (s.sd == 0.0) {
        out.setZero();
    } else {
        out = (col.array() - s.mean) / s.sd;
    }
}

std::vector<Index> active_columns(std::span<const FeatureStats> stats) {
    std::vector<Index> cols;
    for (std::size_t j = 0; j < stats.size(); ++j) {
        if (stats[j].sd > 0.0) cols.push_back(static_cast<Index>(j));
    }
    return cols;
}

// Standardized copy of the non-constant columns only.
MatrixXd active_design(const MatrixXd& X, std::span<const FeatureStats> stats,
                       const std::vector<Index>& cols) {
    MatrixXd Xa(X.rows(), static_cast<Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
        standardize_column(X.col(cols[k]), stats[static_cast<std::size_t>(cols[k])], Xa.col(static_cast<Index>(k)));
    }
    return Xa;
}

bool is_zero_offset(const VectorXd& offset) {
    return offset.size() == 0 || (offset.array() == 0.0).all();
}

VectorXd linear_predictor(const MatrixXd& Xa, double intercept, const VectorXd& b, const VectorXd& offset) {
    VectorXd eta = Xa * b;
    eta.array() += intercept;
    if (offset.size() != 0) eta += offset;
    return eta;
}

VectorXd probabilities(const VectorXd& eta) {
    return eta.unaryExpr([](double e) { return clipped_probability(e); });
}

double penalty_value(const PenaltySpec& pen, const VectorXd& b) {
    if (b.size() == 0) return 0.0;
    return pen.kind == PenaltyKind::Ridge ? pen.lambda * b.squaredNorm()
                                          : pen.lambda * b.lpNorm<1>();
}

double soft_threshold(double u, double lambda) {
    if (u > lambda) return u - lambda;
    if (u < -lambda) return u + lambda;
    return 0.0;
}

void check_inputs(const MatrixXd& X, const VectorXd& y, const VectorXd& offset) {
    if (y.size() != X.rows()) throw Error("outcome length does not match design rows");
    if (offset.size() != 0 && offset.size() != X.rows())
        throw Error("offset length does not match design rows");
    if (offset.size() != 0 && !offset.allFinite()) throw Error("offset contains non-finite values");
    if (!X.allFinite()) throw Error("design matrix contains non-finite values");
    require_binary(y, "penalized logistic fit");
}

struct Params {
    double a = 0.0;
    VectorXd b;
};

// Shared state of one solver run on the active standardized design.
class Solver {
public:
    Solver(const MatrixXd& Xa, const VectorXd& y, const VectorXd& offset,
           const PenaltySpec& pen, const FitOptions& opts)
        : Xa_(Xa), y_(y), offset_(offset), pen_(pen), opts_(opts) {}

    double objective(const Params& p, VectorXd& mu) const {
        mu = probabilities(linear_predictor(Xa_, p.a, p.b, offset_));
        return log_likelihood(y_, mu) - penalty_value(pen_, p.b);
    }

    Params ridge_step(const Params& p, const VectorXd& mu) {
        const Index n = Xa_.rows();
        const Index m = Xa_.cols();
        const VectorXd r = y_ - mu;
        const VectorXd w = mu.array() * (1.0 - mu.array());
        const double two_lambda = 2.0 * pen_.lambda;
        const VectorXd gb = Xa_.transpose() * r - two_lambda * p.b;
        const double ga = r.sum();

        Params next = p;
        if (m + 1 > n && pen_.lambda > 0.0) {
            // Woodbury form: (2λI + XᵀWX)⁻¹ = (I - Xᵀ(2λW⁻¹ + XXᵀ)⁻¹X) / 2λ.
            if (gram_.size() == 0) gram_ = Xa_ * Xa_.transpose();
            MatrixXd M = gram_;
            M.diagonal().array() += two_lambda / w.array();
            const Eigen::LLT<MatrixXd> llt(M);
            auto solve_h = [&](const VectorXd& v) -> VectorXd {
                const VectorXd t = llt.solve(Xa_ * v);
                return (v - Xa_.transpose() * t) / two_lambda;
            };
            const VectorXd u1 = solve_h(gb);
            if (opts_.fit_intercept) {
                const VectorXd hab = Xa_.transpose() * w;
                const VectorXd u2 = solve_h(hab);
                const double da = (ga - hab.dot(u1)) / (w.sum() - hab.dot(u2));
                next.a += da;
                next.b += u1 - u2 * da;
            } else {
                next.b += u1;
            }
            return next;
        }

        const Index off = opts_.fit_intercept ? 1 : 0;
        const Index d = m + off;
        if (d == 0) return next;
        MatrixXd H = MatrixXd::Zero(d, d);
        VectorXd g(d);
        if (m > 0) {
            const MatrixXd Xw = Xa_.array().colwise() * w.array().sqrt();
            H.bottomRightCorner(m, m).selfadjointView<Eigen::Lower>().rankUpdate(Xw.transpose());
            H.bottomRightCorner(m, m).diagonal().array() += two_lambda;
            g.tail(m) = gb;
        }
        if (off) {
            H(0, 0) = w.sum();
            if (m > 0) H.col(0).tail(m) = Xa_.transpose() * w;
            g(0) = ga;
        }
        const VectorXd step = H.ldlt().solve(g);
        if (off) next.a += step(0);
        if (m > 0) next.b += step.tail(m);
        return next;
    }

    Params lasso_step(const Params& p, const VectorXd& mu) const {
        const Index m = Xa_.cols();
        const VectorXd w = mu.array() * (1.0 - mu.array());
        // Residual of the working response: z - a - Xb = (y - mu) / w.
        VectorXd res = (y_ - mu).array() / w.array();
        const MatrixXd WX = Xa_.array().colwise() * w.array();
        const VectorXd v = (WX.array() * Xa_.array()).colwise().sum().transpose();
        const double sw = w.sum();
        const double lambda = pen_.lambda;

        Params next = p;
        auto sweep = [&](bool full) {
            double max_change = 0.0;
            if (opts_.fit_intercept) {
                const double d = w.dot(res) / sw;
                next.a += d;
                res.array() -= d;
                max_change = std::max(max_change, sw * d * d);
            }
            for (Index j = 0; j < m; ++j) {
                const double bj = next.b[j];
                if (!full && bj == 0.0) continue;
                if (v[j] <= 0.0) continue;
                const double u = WX.col(j).dot(res) + v[j] * bj;
                const double nb = soft_threshold(u, lambda) / v[j];
                if (nb != bj) {
                    const double delta = nb - bj;
                    res.noalias() -= delta * Xa_.col(j);
                    next.b[j] = nb;
                    max_change = std::max(max_change, v[j] * delta * delta);
                }
            }
            return max_change;
        };

        constexpr double kSweepTol = 1e-12;
        constexpr int kMaxSweeps = 20000;
        int sweeps = 0;
        while (sweeps < kMaxSweeps) {
            ++sweeps;
            if (sweep(true) < kSweepTol) break;
            while (sweeps < kMaxSweeps) {
                ++sweeps;
                if (sweep(false) < kSweepTol) break;
            }
        }
        return next;
    }

private:
    const MatrixXd& Xa_;
    const VectorXd& y_;
    const VectorXd& offset_;
    PenaltySpec pen_;
    const FitOptions& opts_;
    MatrixXd gram_;
};

}  // namespace

// ---------------------------------------------------------------------------

Standardized standardize(const MatrixXd& X) {
    Standardized out;
    out.values.resize(X.rows(), X.cols());
    out.stats.reserve(static_cast<std::size_t>(X.cols()));
    for (Index j = 0; j < X.cols(); ++j) {
        const FeatureStats s = column_stats(X.col(j));
        standardize_column(X.col(j), s, out.values.col(j));
        out.stats.push_back(s);
    }
    return out;
}

MatrixXd apply_standardization(const MatrixXd& X, std::span<const FeatureStats> stats) {
    if (static_cast<std::size_t>(X.cols()) != stats.size())
        throw Error("feature count mismatch: matrix has " + std::to_string(X.cols()) +
                    " columns, standardization has " + std::to_string(stats.size()));
    MatrixXd out(X.rows(), X.cols());
    for (Index j = 0; j < X.cols(); ++j) standardize_column(X.col(j), stats[static_cast<std::size_t>(j)], out.col(j));
    return out;
}

double logistic(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

double clipped_probability(double eta) {
    return std::clamp(logistic(eta), kProbEps, 1.0 - kProbEps);
}

double logit_clip(double p, double eps) {
    const double q = std::clamp(p, eps, 1.0 - eps);
    return std::log(q / (1.0 - q));
}

VectorXd logit_clip(const VectorXd& p, double eps) {
    return p.unaryExpr([eps](double v) { return logit_clip(v, eps); });
}

double log_likelihood(const VectorXd& y, const VectorXd& p) {
    double ll = 0.0;
    for (Index i = 0; i < y.size(); ++i) ll += y[i] * std::log(p[i]) + (1.0 - y[i]) * std::log1p(-p[i]);
    return ll;
}

double null_intercept(const VectorXd& y, const VectorXd& offset) {
    const double ybar = y.mean();
    const double start = logit_clip(ybar);
    if (is_zero_offset(offset)) return start;
    double a = start;
    for (int it = 0; it < 100; ++it) {
        double score = 0.0;
        double info = 0.0;
        for (Index i = 0; i < y.size(); ++i) {
            const double mu = clipped_probability(a + offset[i]);
            score += y[i] - mu;
            info += mu * (1.0 - mu);
        }
        const double step = score / info;
        a += step;
        if (std::abs(step) < 1e-13 * (1.0 + std::abs(a))) break;
    }
    return a;
}

double lambda_max(const MatrixXd& Xs, const VectorXd& y, const VectorXd& offset) {
    VectorXd r;
    if (is_zero_offset(offset)) {
        r = y.array() - y.mean();
    } else {
        const double a0 = null_intercept(y, offset);
        r = y - probabilities(offset.array() + a0);
    }
    double best = 0.0;
    for (Index j = 0; j < Xs.cols(); ++j) best = std::max(best, std::abs(Xs.col(j).dot(r)));
    return best;
}

std::vector<double> lambda_grid(const MatrixXd& Xs, const VectorXd& y, PenaltyKind kind, int n_values,
                                double min_ratio, const VectorXd& offset) {
    if (n_values < 2) throw Error("lambda grid needs at least 2 values");
    if (!(min_ratio > 0.0 && min_ratio < 1.0)) throw Error("lambda min_ratio must lie in (0,1)");
    if (y.size() != Xs.rows()) throw Error("outcome length does not match design rows");
    for (Index j = 0; j < Xs.cols(); ++j) {
        const FeatureStats s = column_stats(Xs.col(j));
        if (s.sd > 0.0 && std::abs(s.mean) > 1e-6)
            throw Error("lambda grid requires standardized columns; column " + std::to_string(j) +
                        " has mean " + std::to_string(s.mean));
    }
    double top = lambda_max(Xs, y, offset);
    // No informative column: every lambda yields the null model, any scale works.
    if (!(top > 0.0)) top = 1.0;
    const double hi = kind == PenaltyKind::Lasso ? top : top * 100.0;
    const double lo = top * min_ratio;
    std::vector<double> grid(static_cast<std::size_t>(n_values));
    const double log_hi = std::log(hi);
    const double step = (std::log(lo) - log_hi) / (n_values - 1);
    for (int k = 0; k < n_values; ++k) grid[static_cast<std::size_t>(k)] = std::exp(log_hi + step * k);
    grid.front() = hi;
    return grid;
}

FitResult fit_penalized_logistic(const MatrixXd& X, const VectorXd& y, const VectorXd& offset,
                                 const PenaltySpec& penalty, const FitOptions& options) {
    check_inputs(X, y, offset);
    if (!(penalty.lambda >= 0.0) || !std::isfinite(penalty.lambda)) throw Error("lambda must be finite and >= 0");
    const Index p = X.cols();

    FitResult result;
    result.penalty = penalty;
    result.fit_intercept = options.fit_intercept;

    Standardized st = standardize(X);
    result.standardization = st.stats;
    const std::vector<Index> cols = active_columns(st.stats);
    const MatrixXd Xa = active_design(X, st.stats, cols);
    const Index m = Xa.cols();

    auto finish = [&](const Params& prm, const VectorXd& mu, double obj) {
        result.intercept = prm.a;
        result.coefficients = VectorXd::Zero(p);
        for (std::size_t k = 0; k < cols.size(); ++k) result.coefficients[cols[k]] = prm.b[static_cast<Index>(k)];
        result.fitted = mu;
        result.objective = obj;
    };

    Solver solver(Xa, y, offset, penalty, options);

    // At or above lambda_max the all-zero lasso solution satisfies the
    // optimality conditions; return it exactly.
    if (penalty.kind == PenaltyKind::Lasso && options.fit_intercept &&
        lambda_max(st.values, y, offset) <= penalty.lambda) {
        Params null_params{null_intercept(y, offset), VectorXd::Zero(m)};
        VectorXd mu;
        const double obj = solver.objective(null_params, mu);
        result.converged = true;
        result.iterations = 0;
        result.objective_trace = {obj};
        finish(null_params, mu, obj);
        return result;
    }

    Params cur;
    cur.b = VectorXd::Zero(m);
    if (options.warm_start) {
        const auto& ws = *options.warm_start;
        if (ws.coefficients.size() != p) throw Error("warm start has wrong coefficient count");
        cur.a = options.fit_intercept ? ws.intercept : 0.0;
        for (std::size_t k = 0; k < cols.size(); ++k) cur.b[static_cast<Index>(k)] = ws.coefficients[cols[k]];
    } else if (options.fit_intercept) {
        cur.a = null_intercept(y, offset);
    }

    VectorXd mu;
    double obj = solver.objective(cur, mu);
    result.objective_trace.push_back(obj);

    int iter = 0;
    bool converged = false;
    VectorXd mu_try;
    while (iter < options.max_iter) {
        ++iter;
        const Params proposal = penalty.kind == PenaltyKind::Ridge ? solver.ridge_step(cur, mu)
                                                                   : solver.lasso_step(cur, mu);
        // Backtrack along the segment towards the proposal until the
        // objective does not decrease.
        double t = 1.0;
        bool accepted = false;
        Params trial;
        double trial_obj = 0.0;
        const double slack = 1e-13 * std::abs(obj);
        for (int k = 0; k < 60; ++k) {
            trial.a = cur.a + t * (proposal.a - cur.a);
            trial.b = cur.b + t * (proposal.b - cur.b);
            trial_obj = solver.objective(trial, mu_try);
            if (std::isfinite(trial_obj) && trial_obj >= obj - slack) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if (!accepted) {
            // No ascent direction left at working precision.
            converged = true;
            break;
        }
        double change = std::abs(trial.a - cur.a);
        if (m > 0) change = std::max(change, (trial.b - cur.b).cwiseAbs().maxCoeff());
        const double rel = std::abs(trial_obj - obj) / std::max(std::abs(obj), 1e-300);
        cur = std::move(trial);
        std::swap(mu, mu_try);
        obj = trial_obj;
        result.objective_trace.push_back(obj);
        if (rel < options.rel_objective_tol || change < options.coefficient_tol) {
            converged = true;
            break;
        }
    }
    result.converged = converged;
    result.iterations = iter;
    finish(cur, mu, obj);
    return result;
}

std::vector<FitResult> fit_path(const MatrixXd& X, const VectorXd& y, const VectorXd& offset, PenaltyKind kind,
                                std::span<const double> lambdas, const FitOptions& options) {
    std::vector<FitResult> fits;
    fits.reserve(lambdas.size());
    FitOptions opts = options;
    for (const double lambda : lambdas) {
        fits.push_back(fit_penalized_logistic(X, y, offset, PenaltySpec{kind, lambda}, opts));
        const FitResult& last = fits.back();
        opts.warm_start = FitOptions::WarmStart{last.intercept, last.coefficients};
    }
    return fits;
}

VectorXd predict_proba(const FitResult& fit, const MatrixXd& X, const VectorXd& offset) {
    if (X.cols() != fit.n_features())
        throw Error("feature count mismatch: model has " + std::to_string(fit.n_features()) +
                    " features, input has " + std::to_string(X.cols()));
    if (offset.size() != 0 && offset.size() != X.rows()) throw Error("offset length does not match rows");
    const std::vector<Index> cols = active_columns(fit.standardization);
    const MatrixXd Xa = active_design(X, fit.standardization, cols);
    VectorXd b(static_cast<Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) b[static_cast<Index>(k)] = fit.coefficients[cols[k]];
    return probabilities(linear_predictor(Xa, fit.intercept, b, offset));
}

double penalized_objective(const FitResult& fit, const MatrixXd& X, const VectorXd& y, const VectorXd& offset) {
    const VectorXd mu = predict_proba(fit, X, offset);
    return log_likelihood(y, mu) - penalty_value(fit.penalty, fit.coefficients);
}

double kkt_max_violation(const FitResult& fit, const MatrixXd& X, const VectorXd& y, const VectorXd& offset) {
    const VectorXd mu = predict_proba(fit, X, offset);
    const VectorXd r = y - mu;
    double worst = fit.fit_intercept ? std::abs(r.sum()) : 0.0;
    const double lambda = fit.penalty.lambda;
    for (std::size_t j = 0; j < fit.standardization.size(); ++j) {
        const FeatureStats& s = fit.standardization[j];
        if (s.sd == 0.0) continue;
        VectorXd col(X.rows());
        standardize_column(X.col(static_cast<Index>(j)), s, col);
        const double g = col.dot(r);
        const double b = fit.coefficients[static_cast<Index>(j)];
        double v = 0.0;
        if (fit.penalty.kind == PenaltyKind::Ridge) {
            v = std::abs(g - 2.0 * lambda * b);
        } else if (b == 0.0) {
            v = std::max(std::abs(g) - lambda, 0.0);
        } else {
            v = std::abs(g - lambda * (b > 0.0 ? 1.0 : -1.0));
        }
        worst = std::max(worst, v);
    }
    return worst;
}

RawCoefficients raw_coefficients(const FitResult& fit) {
    RawCoefficients raw;
    raw.intercept = fit.intercept;
    raw.coefficients = VectorXd::Zero(fit.n_features());
    for (std::size_t j = 0; j < fit.standardization.size(); ++j) {
        const FeatureStats& s = fit.standardization[j];
        if (s.sd == 0.0) continue;
        const double b = fit.coefficients[static_cast<Index>(j)] / s.sd;
        raw.coefficients[static_cast<Index>(j)] = b;
        raw.intercept -= b * s.mean;
    }
    return raw;
}

}  // namespace omnicomb
