#include "omnicomb/pipeline.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>

namespace {

int run_command(const std::string& config_path, const std::optional<std::uint64_t>& seed,
                const std::optional<int>& outer, const std::optional<int>& inner,
                const std::optional<std::string>& penalty, const std::optional<std::string>& output, bool quiet) {
    using namespace omnicomb;
    RunConfig cfg;
    try {
        cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
        if (seed) {
            cfg.seed = *seed;
            cfg.synthetic.seed = *seed;
        }
        if (outer) cfg.outer_folds = *outer;
        if (inner) cfg.inner_folds = *inner;
        if (penalty) cfg.penalties = parse_penalty_selection(*penalty);
        if (output) cfg.output = *output;
    } catch (const std::exception& e) {
        std::cerr << "omnicomb: stage 'configuration' failed: " << e.what() << '\n';
        return 1;
    }

    try {
        const PipelineResult result = run_pipeline(cfg);
        if (!quiet) std::cout << format_table_report(result.report, result.provenance);
        for (const auto& path : result.written) std::cerr << "wrote " << path.string() << '\n';
    } catch (const std::exception& e) {
        std::cerr << "omnicomb: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

int generate_command(const omnicomb::SyntheticConfig& syn, const std::string& dir) {
    using namespace omnicomb;
    try {
        const std::filesystem::path out(dir);
        std::filesystem::create_directories(out);
        const SyntheticData data = generate_synthetic(syn);
        for (const auto& s : data.bundle.sources) write_source_csv(s.matrix, out / (s.name + ".csv"));
        write_outcome_csv(data.bundle.outcome, out / "outcome.csv");
        OutcomeVector bayes{data.bayes_probs, data.bundle.outcome.sample_ids};
        std::ofstream bp(out / "bayes_probs.csv");
        bp << "sample_id,probability\n";
        bp.precision(17);
        for (Eigen::Index i = 0; i < bayes.size(); ++i) bp << bayes.sample_ids[i] << ',' << bayes.labels[i] << '\n';
        if (!bp) throw Error("cannot write bayes_probs.csv");
        std::cerr << "wrote synthetic study to " << out.string() << '\n';
    } catch (const std::exception& e) {
        std::cerr << "omnicomb: stage 'generate' failed: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Combine predictions from two omics sources with double cross-validation"};
    app.require_subcommand(1);
    app.set_version_flag("--version", omnicomb::kVersion);

    auto* run = app.add_subcommand("run", "Run the full analysis and write reports");
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> outer, inner;
    std::optional<std::string> penalty, output;
    bool quiet = false;
    run->add_option("--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "Seed for folds and the synthetic generator");
    run->add_option("--outer-folds", outer, "Outer folds J");
    run->add_option("--inner-folds", inner, "Inner folds K");
    run->add_option("--penalty", penalty, "ridge, lasso or both")
        ->check(CLI::IsMember({"ridge", "lasso", "both"}));
    run->add_option("--output", output, "Report base path (.txt and .jsonl are appended)");
    run->add_flag("-q,--quiet", quiet, "Do not print the table to stdout");

    auto* gen = app.add_subcommand("generate", "Write a synthetic two-source study as CSV files");
    omnicomb::SyntheticConfig syn;
    std::string dir = "synthetic";
    gen->add_option("--dir", dir, "Output directory");
    gen->add_option("--n", syn.n);
    gen->add_option("--p1", syn.p1);
    gen->add_option("--p2", syn.p2);
    gen->add_option("--latent-dim", syn.latent_dim);
    gen->add_option("--shared-signal", syn.shared_signal);
    gen->add_option("--unique-signal", syn.source2_unique_signal);
    gen->add_option("--noise-sd", syn.noise_sd);
    gen->add_option("--prevalence", syn.prevalence_target);
    gen->add_option("--seed", syn.seed);

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return run_command(config_path, seed, outer, inner, penalty, output, quiet);
    return generate_command(syn, dir);
}
