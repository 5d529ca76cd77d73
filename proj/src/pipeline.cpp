#include "omnicomb/pipeline.hpp"

#include "omnicomb/evaluation.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace omnicomb {

using Eigen::VectorXd;
namespace fs = std::filesystem;
namespace pt = boost::property_tree;

StageError::StageError(std::string stage, const std::string& message)
    : Error("stage '" + stage + "' failed: " + message), stage_(std::move(stage)) {}

std::string_view to_string(SequentialOuter outer) { return outer == SequentialOuter::Loo ? "loo" : "kfold"; }

std::vector<PenaltyKind> parse_penalty_selection(const std::string& text) {
    if (text == "both") return {PenaltyKind::Ridge, PenaltyKind::Lasso};
    return {parse_penalty_kind(text)};
}

void RunConfig::validate() const {
    if (penalties.empty()) throw Error("config: no penalty kind selected");
    if (outer_folds < 2) throw Error("config: outer_folds must be at least 2");
    if (inner_folds < 2) throw Error("config: inner_folds must be at least 2");
    if (n_lambda < 1) throw Error("config: n_lambda must be at least 1");
    if (!(lambda_min_ratio > 0.0 && lambda_min_ratio < 1.0)) throw Error("config: lambda_min_ratio must lie in (0,1)");
    if (mixture == MixtureMode::Fixed && !(mixture_weight >= 0.0 && mixture_weight <= 1.0))
        throw Error("config: mixture weight must lie in [0,1]");
    if (mixture == MixtureMode::Search && !(mixture_step > 0.0 && mixture_step <= 1.0))
        throw Error("config: mixture step must lie in (0,1]");
    if (mode == RunMode::Real) {
        if (sources.size() != 2) throw Error("config: real mode needs exactly two sources");
        if (sources[0].name == sources[1].name) throw Error("config: source names must differ");
        for (const auto& s : sources)
            if (!fs::exists(s.path)) throw Error("config: source file not found: " + s.path.string());
        if (!fs::exists(outcome_path)) throw Error("config: outcome file not found: " + outcome_path.string());
    } else {
        synthetic.validate();
    }
}

CvSettings RunConfig::cv_settings() const {
    CvSettings s;
    s.outer_folds = outer_folds;
    s.inner_folds = inner_folds;
    s.n_lambda = n_lambda;
    s.lambda_min_ratio = lambda_min_ratio;
    s.seed = seed;
    s.stratified = stratified;
    return s;
}

namespace {

template <class T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const char* first = text.data();
    const char* last = first + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) throw Error("config: " + key + " = '" + text + "' is not a valid number");
    return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw Error("config: " + key + " = '" + text + "' is not a boolean");
}

void check_keys(const pt::ptree& tree) {
    static const std::map<std::string, std::set<std::string>> allowed{
        {"run", {"mode", "seed", "penalty", "output", "layout"}},
        {"data", {"source1", "source2", "name1", "name2", "outcome"}},
        {"synthetic",
         {"n", "p1", "p2", "latent_dim", "shared_signal", "source2_unique_signal", "noise_sd", "prevalence_target",
          "seed"}},
        {"cv", {"outer_folds", "inner_folds", "n_lambda", "lambda_min_ratio", "stratified", "sequential_outer"}},
        {"combiners", {"mixture", "weight", "step", "criterion"}},
    };
    for (const auto& [section, body] : tree) {
        const auto it = allowed.find(section);
        if (it == allowed.end()) throw Error("config: unknown section [" + section + "]");
        if (!body.data().empty()) throw Error("config: key '" + section + "' outside any section");
        for (const auto& [key, value] : body) {
            (void)value;
            if (!it->second.count(key)) throw Error("config: unknown key '" + key + "' in [" + section + "]");
        }
    }
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const fs::path& base_dir) {
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw Error(std::string("config: ") + e.message() + " (line " + std::to_string(e.line()) + ")");
    }
    check_keys(tree);

    RunConfig cfg;
    auto get = [&](const std::string& path) { return tree.get_optional<std::string>(pt::ptree::path_type(path, '.')); };
    auto resolve = [&](const std::string& p) {
        fs::path path(p);
        return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
    };

    if (auto v = get("run.mode")) {
        if (*v == "synthetic") cfg.mode = RunMode::Synthetic;
        else if (*v == "real") cfg.mode = RunMode::Real;
        else throw Error("config: run.mode must be 'real' or 'synthetic'");
    }
    if (auto v = get("run.seed")) cfg.seed = parse_number<std::uint64_t>("run.seed", *v);
    if (auto v = get("run.penalty")) cfg.penalties = parse_penalty_selection(*v);
    if (auto v = get("run.output")) cfg.output = *v;
    if (auto v = get("run.layout")) {
        if (*v == "table") cfg.layout = LayoutSelection::Table;
        else if (*v == "machine") cfg.layout = LayoutSelection::Machine;
        else if (*v == "both") cfg.layout = LayoutSelection::Both;
        else throw Error("config: run.layout must be table, machine or both");
    }

    if (cfg.mode == RunMode::Real) {
        for (int k = 1; k <= 2; ++k) {
            const std::string key = "data.source" + std::to_string(k);
            auto path = get(key);
            if (!path) throw Error("config: real mode requires " + key);
            auto name = get("data.name" + std::to_string(k));
            cfg.sources.push_back({name ? *name : "X" + std::to_string(k), resolve(*path)});
        }
        auto outcome = get("data.outcome");
        if (!outcome) throw Error("config: real mode requires data.outcome");
        cfg.outcome_path = resolve(*outcome);
    }

    auto& syn = cfg.synthetic;
    syn.seed = cfg.seed;
    if (auto v = get("synthetic.n")) syn.n = parse_number<int>("synthetic.n", *v);
    if (auto v = get("synthetic.p1")) syn.p1 = parse_number<int>("synthetic.p1", *v);
    if (auto v = get("synthetic.p2")) syn.p2 = parse_number<int>("synthetic.p2", *v);
    if (auto v = get("synthetic.latent_dim")) syn.latent_dim = parse_number<int>("synthetic.latent_dim", *v);
    if (auto v = get("synthetic.shared_signal")) syn.shared_signal = parse_number<double>("synthetic.shared_signal", *v);
    if (auto v = get("synthetic.source2_unique_signal"))
        syn.source2_unique_signal = parse_number<double>("synthetic.source2_unique_signal", *v);
    if (auto v = get("synthetic.noise_sd")) syn.noise_sd = parse_number<double>("synthetic.noise_sd", *v);
    if (auto v = get("synthetic.prevalence_target"))
        syn.prevalence_target = parse_number<double>("synthetic.prevalence_target", *v);
    if (auto v = get("synthetic.seed")) syn.seed = parse_number<std::uint64_t>("synthetic.seed", *v);

    if (auto v = get("cv.outer_folds")) cfg.outer_folds = parse_number<int>("cv.outer_folds", *v);
    if (auto v = get("cv.inner_folds")) cfg.inner_folds = parse_number<int>("cv.inner_folds", *v);
    if (auto v = get("cv.n_lambda")) cfg.n_lambda = parse_number<int>("cv.n_lambda", *v);
    if (auto v = get("cv.lambda_min_ratio")) cfg.lambda_min_ratio = parse_number<double>("cv.lambda_min_ratio", *v);
    if (auto v = get("cv.stratified")) cfg.stratified = parse_bool("cv.stratified", *v);
    if (auto v = get("cv.sequential_outer")) {
        if (*v == "loo") cfg.sequential_outer = SequentialOuter::Loo;
        else if (*v == "kfold") cfg.sequential_outer = SequentialOuter::KFold;
        else throw Error("config: cv.sequential_outer must be 'loo' or 'kfold'");
    }

    if (auto v = get("combiners.mixture")) {
        if (*v == "fixed") cfg.mixture = MixtureMode::Fixed;
        else if (*v == "search") cfg.mixture = MixtureMode::Search;
        else throw Error("config: combiners.mixture must be 'fixed' or 'search'");
    }
    if (auto v = get("combiners.weight")) cfg.mixture_weight = parse_number<double>("combiners.weight", *v);
    if (auto v = get("combiners.step")) cfg.mixture_step = parse_number<double>("combiners.step", *v);
    if (auto v = get("combiners.criterion")) {
        if (*v == "deviance") cfg.mixture_criterion = MixCriterion::Deviance;
        else if (*v == "brier") cfg.mixture_criterion = MixCriterion::Brier;
        else throw Error("config: combiners.criterion must be 'deviance' or 'brier'");
    }
    return cfg;
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file " + path.string());
    std::ostringstream text;
    text << in.rdbuf();
    return parse_run_config(text.str(), path.parent_path());
}

std::vector<std::string> method_labels(const std::string& s1, const std::string& s2, const RunConfig& config) {
    const bool average = config.mixture == MixtureMode::Fixed && config.mixture_weight == 0.5;
    return {"single:" + s1,
            "single:" + s2,
            "naive",
            average ? "average" : "mixture",
            "model_based",
            "seq:" + s2 + "|" + s1,
            "seq:" + s1 + "|" + s2,
            "recal:" + s1,
            "recal:" + s2};
}

namespace {

template <class F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

PenaltyRun run_penalty(const StudyBundle& bundle, const RunConfig& config, PenaltyKind kind,
                       const FoldPlan& plan, const FoldPlan& seq_plan, const VectorXd& p0) {
    const CvSettings cv = config.cv_settings();
    const VectorXd& y = bundle.outcome.labels;
    const auto& src1 = bundle.sources[0];
    const auto& src2 = bundle.sources[1];
    const auto labels = method_labels(src1.name, src2.name, config);
    const std::string tag = std::string(to_string(kind)) + ": ";

    PenaltyRun run;
    run.kind = kind;
    auto keep = [&](const std::string& label, CombinedPrediction c) {
        run.predictions[label] = c.probs;
        run.combiners.emplace(label, std::move(c));
    };

    const VectorXd p1 = stage(tag + "double CV on " + src1.name, [&] {
        return double_cv_predict(src1.matrix.values, y, {}, kind, plan, cv).oof_probs;
    });
    const VectorXd p2 = stage(tag + "double CV on " + src2.name, [&] {
        return double_cv_predict(src2.matrix.values, y, {}, kind, plan, cv).oof_probs;
    });
    run.predictions[labels[0]] = p1;
    run.predictions[labels[1]] = p2;
    run.predictions["null"] = p0;

    keep(labels[2], stage(tag + "naive stack", [&] { return naive_stack(src1.matrix, src2.matrix, y, kind, plan, cv); }));
    keep(labels[3], stage(tag + "mixture", [&] {
             if (config.mixture == MixtureMode::Fixed) return mix(p1, p2, config.mixture_weight);
             return search_mixture_weight(p1, p2, y, config.mixture_criterion, config.mixture_step).combined;
         }));
    keep(labels[4], stage(tag + "model-based stacking", [&] { return stack_logistic_loo(p1, p2, y); }));
    keep(labels[7], stage(tag + "recalibration of " + src1.name, [&] { return recalibrate_loo(p1, y); }));
    keep(labels[8], stage(tag + "recalibration of " + src2.name, [&] { return recalibrate_loo(p2, y); }));
    keep(labels[5], stage(tag + "sequential " + labels[5].substr(4), [&] {
             return sequential_offset(p1, src2.matrix.values, y, kind, seq_plan, cv);
         }));
    keep(labels[6], stage(tag + "sequential " + labels[6].substr(4), [&] {
             return sequential_offset(p2, src1.matrix.values, y, kind, seq_plan, cv);
         }));

    stage(tag + "metrics", [&] {
        for (const auto& label : labels) run.rows.push_back(metrics_row(label, y, run.predictions.at(label), p0));
    });
    return run;
}

}  // namespace

PipelineResult run_pipeline(const RunConfig& config) {
    stage("configuration", [&] { config.validate(); });

    PipelineResult result;
    stage("data", [&] {
        if (config.mode == RunMode::Synthetic) {
            SyntheticData data = generate_synthetic(config.synthetic);
            result.bundle = std::move(data.bundle);
            result.bayes_probs = std::move(data.bayes_probs);
        } else {
            std::vector<PredictorSource> sources;
            for (const auto& s : config.sources) sources.push_back(load_source_csv(s.path, s.name));
            result.bundle = align_samples(std::move(sources), load_outcome_csv(config.outcome_path));
        }
        if (result.bundle.sources.size() != 2) throw Error("the analysis needs exactly two sources");
        require_both_classes(result.bundle.outcome.labels, "outcome");
    });

    const VectorXd& y = result.bundle.outcome.labels;
    const FoldPlan seq_plan = stage("fold plan", [&] {
        result.outer_plan = make_folds(y, config.outer_folds, config.seed, config.stratified);
        return config.sequential_outer == SequentialOuter::Loo ? leave_one_out_plan(y.size()) : result.outer_plan;
    });
    const VectorXd p0 = stage("null model", [&] { return null_probs_cv(y, result.outer_plan); });

    for (PenaltyKind kind : config.penalties) {
        result.runs.push_back(run_penalty(result.bundle, config, kind, result.outer_plan, seq_plan, p0));
        for (const auto& row : result.runs.back().rows)
            result.report.push_back({std::string(to_string(kind)), row});
    }

    result.provenance.seed = config.seed;
    result.provenance.outer_folds = config.outer_folds;
    result.provenance.inner_folds = config.inner_folds;
    result.provenance.sequential_outer = config.sequential_outer == SequentialOuter::Loo
                                             ? "loo"
                                             : "kfold(" + std::to_string(config.outer_folds) + ")";
    result.provenance.version = kVersion;

    if (!config.output.empty()) {
        stage("report", [&] {
            auto emit = [&](ReportLayout layout, const char* ext) {
                fs::path path = config.output;
                path += ext;
                write_report(result.report, layout, path, result.provenance);
                result.written.push_back(path);
            };
            if (config.layout != LayoutSelection::Machine) emit(ReportLayout::Table, ".txt");
            if (config.layout != LayoutSelection::Table) emit(ReportLayout::Machine, ".jsonl");
        });
    }
    return result;
}

}  // namespace omnicomb
