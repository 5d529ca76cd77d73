#include "omnicomb/data_io.hpp"

#include "omnicomb/penalized_glm.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace omnicomb {

namespace {

namespace fs = std::filesystem;

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

std::string trim(std::string s) {
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
};

CsvTable read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    CsvTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line);
        for (auto& f : fields) f = trim(std::move(f));
        if (table.header.empty()) {
            table.header = std::move(fields);
            continue;
        }
        if (fields.size() != table.header.size())
            throw Error(path.string() + ": row " + std::to_string(table.rows.size() + 1) + " (line " +
                        std::to_string(line_no) + ") has " + std::to_string(fields.size()) + " fields, header has " +
                        std::to_string(table.header.size()));
        table.rows.push_back(std::move(fields));
        table.line_numbers.push_back(line_no);
    }
    if (table.header.empty()) throw Error(path.string() + ": empty file");
    if (table.header.front() != "sample_id")
        throw Error(path.string() + ": first header column must be 'sample_id', found '" + table.header.front() + "'");
    return table;
}

std::string cell_location(const fs::path& path, const CsvTable& t, std::size_t r, std::size_t c) {
    return path.string() + ": row " + std::to_string(r + 1) + " (line " + std::to_string(t.line_numbers[r]) +
           "), column \"" + t.header[c] + "\"";
}

void check_unique_ids(const fs::path& path, const std::vector<std::string>& ids) {
    std::unordered_set<std::string> seen;
    for (const auto& id : ids)
        if (!seen.insert(id).second) throw Error(path.string() + ": duplicate sample_id '" + id + "'");
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::ofstream open_for_write(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    return out;
}

}  // namespace

PredictorSource load_source_csv(const fs::path& path, std::string name) {
    const CsvTable t = read_csv(path);
    if (t.rows.empty()) throw Error(path.string() + ": no data rows");
    const std::size_t p = t.header.size() - 1;
    PredictorSource src;
    src.name = name.empty() ? path.stem().string() : std::move(name);
    src.matrix.feature_names.assign(t.header.begin() + 1, t.header.end());
    src.matrix.values.resize(static_cast<Eigen::Index>(t.rows.size()), static_cast<Eigen::Index>(p));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        if (row[0].empty()) throw Error(cell_location(path, t, r, 0) + ": empty sample_id");
        src.matrix.sample_ids.push_back(row[0]);
        for (std::size_t c = 1; c <= p; ++c) {
            const std::string& cell = row[c];
            if (cell.empty()) throw Error(cell_location(path, t, r, c) + ": empty cell");
            double v = 0.0;
            const char* first = cell.data();
            const char* last = first + cell.size();
            if (*first == '+') ++first;
            const auto res = std::from_chars(first, last, v);
            if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v))
                throw Error(cell_location(path, t, r, c) + ": not a finite number: '" + cell + "'");
            src.matrix.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c - 1)) = v;
        }
    }
    check_unique_ids(path, src.matrix.sample_ids);
    std::unordered_set<std::string> names;
    for (const auto& f : src.matrix.feature_names)
        if (!names.insert(f).second) throw Error(path.string() + ": duplicate feature name '" + f + "'");
    return src;
}

OutcomeVector load_outcome_csv(const fs::path& path) {
    const CsvTable t = read_csv(path);
    if (t.header.size() != 2 || t.header[1] != "outcome")
        throw Error(path.string() + ": outcome header must be 'sample_id,outcome'");
    OutcomeVector out;
    out.labels.resize(static_cast<Eigen::Index>(t.rows.size()));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        if (row[0].empty()) throw Error(cell_location(path, t, r, 0) + ": empty sample_id");
        if (row[1] != "0" && row[1] != "1")
            throw Error(cell_location(path, t, r, 1) + ": outcome must be 0 or 1, found '" + row[1] + "'");
        out.sample_ids.push_back(row[0]);
        out.labels[static_cast<Eigen::Index>(r)] = row[1] == "1" ? 1.0 : 0.0;
    }
    check_unique_ids(path, out.sample_ids);
    out.validate();
    return out;
}

void write_source_csv(const DesignMatrix& source, const fs::path& path) {
    auto out = open_for_write(path);
    out << "sample_id";
    for (const auto& f : source.feature_names) out << ',' << f;
    out << '\n';
    for (Eigen::Index i = 0; i < source.rows(); ++i) {
        out << source.sample_ids[static_cast<std::size_t>(i)];
        for (Eigen::Index j = 0; j < source.cols(); ++j) out << ',' << format_double(source.values(i, j));
        out << '\n';
    }
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

void write_outcome_csv(const OutcomeVector& outcome, const fs::path& path) {
    auto out = open_for_write(path);
    out << "sample_id,outcome\n";
    for (Eigen::Index i = 0; i < outcome.size(); ++i)
        out << outcome.sample_ids[static_cast<std::size_t>(i)] << ',' << (outcome.labels[i] == 1.0 ? '1' : '0') << '\n';
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

StudyBundle align_samples(std::vector<PredictorSource> sources, const OutcomeVector& outcome) {
    if (sources.empty()) throw Error("align_samples: at least one source is required");
    std::vector<std::unordered_map<std::string, Eigen::Index>> index(sources.size());
    for (std::size_t s = 0; s < sources.size(); ++s) {
        const auto& ids = sources[s].matrix.sample_ids;
        for (std::size_t i = 0; i < ids.size(); ++i) index[s].emplace(ids[i], static_cast<Eigen::Index>(i));
    }

    std::vector<Eigen::Index> keep_outcome;
    for (Eigen::Index i = 0; i < outcome.size(); ++i) {
        const auto& id = outcome.sample_ids[static_cast<std::size_t>(i)];
        const bool everywhere = std::all_of(index.begin(), index.end(), [&](const auto& m) { return m.count(id) > 0; });
        if (everywhere) keep_outcome.push_back(i);
    }
    if (keep_outcome.empty()) throw Error("align_samples: no sample id is shared by all inputs");

    StudyBundle bundle;
    const auto kept = static_cast<Eigen::Index>(keep_outcome.size());
    bundle.outcome.labels.resize(kept);
    for (Eigen::Index k = 0; k < kept; ++k) {
        const Eigen::Index i = keep_outcome[static_cast<std::size_t>(k)];
        bundle.outcome.labels[k] = outcome.labels[i];
        bundle.outcome.sample_ids.push_back(outcome.sample_ids[static_cast<std::size_t>(i)]);
    }
    for (std::size_t s = 0; s < sources.size(); ++s) {
        PredictorSource aligned;
        aligned.name = sources[s].name;
        aligned.matrix.feature_names = sources[s].matrix.feature_names;
        aligned.matrix.sample_ids = bundle.outcome.sample_ids;
        aligned.matrix.values.resize(kept, sources[s].matrix.cols());
        for (Eigen::Index k = 0; k < kept; ++k)
            aligned.matrix.values.row(k) = sources[s].matrix.values.row(index[s].at(bundle.outcome.sample_ids[static_cast<std::size_t>(k)]));
        bundle.dropped.push_back(static_cast<std::size_t>(sources[s].matrix.rows() - kept));
        bundle.sources.push_back(std::move(aligned));
    }
    bundle.dropped.push_back(static_cast<std::size_t>(outcome.size() - kept));
    return bundle;
}

void SyntheticConfig::validate() const {
    if (n < 2 || p1 < 1 || p2 < 1 || latent_dim < 1) throw Error("synthetic config: dimensions must be >= 1 (n >= 2)");
    if (!(shared_signal >= 0.0) || !(source2_unique_signal >= 0.0)) throw Error("synthetic config: signals must be >= 0");
    if (!(noise_sd > 0.0)) throw Error("synthetic config: noise_sd must be > 0");
    if (!(prevalence_target > 0.0 && prevalence_target < 1.0))
        throw Error("synthetic config: prevalence_target must lie in (0,1)");
}

SyntheticData generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    using Eigen::MatrixXd;
    using Eigen::VectorXd;
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    auto gaussian = [&](Eigen::Index rows, Eigen::Index cols) {
        MatrixXd m(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
        return m;
    };
    const Eigen::Index r = cfg.latent_dim;
    const MatrixXd A1 = gaussian(r, cfg.p1);
    const MatrixXd A2 = gaussian(r, cfg.p2);
    const MatrixXd B = gaussian(r, cfg.p2);
    VectorXd gamma = gaussian(r, 1);
    VectorXd delta = gaussian(r, 1);
    gamma.normalize();
    delta.normalize();
    const MatrixXd z = gaussian(cfg.n, r);
    const MatrixXd u = gaussian(cfg.n, r);
    const MatrixXd X1 = z * A1 + cfg.noise_sd * gaussian(cfg.n, cfg.p1);
    const MatrixXd X2 = z * A2 + u * B + cfg.noise_sd * gaussian(cfg.n, cfg.p2);
    VectorXd draws(cfg.n);
    for (Eigen::Index i = 0; i < cfg.n; ++i) draws[i] = uniform(rng);

    const VectorXd signal = cfg.shared_signal * (z * gamma) + cfg.source2_unique_signal * (u * delta);
    auto prevalence_at = [&](double c) {
        double ones = 0.0;
        for (Eigen::Index i = 0; i < cfg.n; ++i) ones += draws[i] < logistic(c + signal[i]) ? 1.0 : 0.0;
        return ones / cfg.n;
    };
    double lo = -40.0;
    double hi = 40.0;
    for (int step = 0; step < 100; ++step) {
        const double mid = 0.5 * (lo + hi);
        if (prevalence_at(mid) < cfg.prevalence_target) lo = mid;
        else hi = mid;
    }
    const double c = std::abs(prevalence_at(hi) - cfg.prevalence_target) <=
                             std::abs(prevalence_at(lo) - cfg.prevalence_target)
                         ? hi
                         : lo;
    const double achieved = prevalence_at(c);
    if (std::abs(achieved - cfg.prevalence_target) > 0.02)
        throw Error("synthetic generator could not reach prevalence " + std::to_string(cfg.prevalence_target) +
                    " (closest " + std::to_string(achieved) + ")");

    SyntheticData out;
    out.intercept = c;
    out.bayes_probs.resize(cfg.n);
    const int width = static_cast<int>(std::to_string(cfg.n).size());
    std::vector<std::string> ids;
    OutcomeVector y;
    y.labels.resize(cfg.n);
    for (Eigen::Index i = 0; i < cfg.n; ++i) {
        const double prob = logistic(c + signal[i]);
        out.bayes_probs[i] = clipped_probability(c + signal[i]);
        y.labels[i] = draws[i] < prob ? 1.0 : 0.0;
        std::ostringstream id;
        id << 'S' << std::setw(width) << std::setfill('0') << (i + 1);
        ids.push_back(id.str());
    }
    y.sample_ids = ids;

    auto make_source = [&](std::string name, const MatrixXd& X, const std::string& prefix) {
        PredictorSource s;
        s.name = std::move(name);
        s.matrix.values = X;
        s.matrix.sample_ids = ids;
        const int fw = static_cast<int>(std::to_string(X.cols()).size());
        for (Eigen::Index j = 0; j < X.cols(); ++j) {
            std::ostringstream f;
            f << prefix << std::setw(fw) << std::setfill('0') << (j + 1);
            s.matrix.feature_names.push_back(f.str());
        }
        return s;
    };
    out.bundle.sources.push_back(make_source("X1", X1, "a"));
    out.bundle.sources.push_back(make_source("X2", X2, "b"));
    out.bundle.outcome = std::move(y);
    out.bundle.dropped = {0, 0, 0};
    std::ostringstream prov;
    prov << "synthetic n=" << cfg.n << " p1=" << cfg.p1 << " p2=" << cfg.p2 << " r=" << cfg.latent_dim
         << " shared=" << cfg.shared_signal << " unique=" << cfg.source2_unique_signal << " noise=" << cfg.noise_sd
         << " prevalence=" << cfg.prevalence_target << " seed=" << cfg.seed;
    out.bundle.provenance.push_back(prov.str());
    return out;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

bool is_recalibrated(const std::string& label) { return label.rfind("recal:", 0) == 0; }

void table_block(std::ostringstream& out, const std::vector<const MetricsRow*>& cols) {
    constexpr int kLabelWidth = 14;
    std::size_t width = 10;
    for (const auto* m : cols) width = std::max(width, m->label.size() + 2);
    const int w = static_cast<int>(width);
    out << std::setw(kLabelWidth) << std::left << "" << std::right;
    for (const auto* m : cols) out << std::setw(w) << m->label;
    out << '\n';
    auto line = [&](const char* name, int precision, auto getter) {
        out << std::setw(kLabelWidth) << std::left << name << std::right << std::fixed << std::setprecision(precision);
        for (const auto* m : cols) out << std::setw(w) << getter(*m);
        out << '\n';
    };
    line("Brier score", 3, [](const MetricsRow& m) { return m.brier_mean; });
    line("PRESS", 3, [](const MetricsRow& m) { return m.brier_sum; });
    line("Deviance", 2, [](const MetricsRow& m) { return m.deviance; });
    line("c-index", 3, [](const MetricsRow& m) { return m.c_index; });
    line("Q2", 3, [](const MetricsRow& m) { return m.q2; });
}

}  // namespace

std::string format_table_report(const std::vector<ReportRow>& rows, const ReportProvenance& prov) {
    if (rows.empty()) throw Error("report has no rows");
    std::vector<std::string> penalties;
    for (const auto& r : rows)
        if (std::find(penalties.begin(), penalties.end(), r.penalty) == penalties.end()) penalties.push_back(r.penalty);

    std::ostringstream out;
    out << "# seed " << prov.seed << ", outer folds " << prov.outer_folds << ", inner folds " << prov.inner_folds
        << ", sequential outer " << prov.sequential_outer << '\n';
    for (const auto& pen : penalties) {
        std::vector<const MetricsRow*> main;
        std::vector<const MetricsRow*> recal;
        for (const auto& r : rows) {
            if (r.penalty != pen) continue;
            (is_recalibrated(r.metrics.label) ? recal : main).push_back(&r.metrics);
        }
        out << "\n== " << pen << " ==\n";
        if (!main.empty()) table_block(out, main);
        if (!recal.empty()) {
            out << "-- re-calibrated single source --\n";
            table_block(out, recal);
        }
    }
    return out.str();
}

std::string format_machine_report(const std::vector<ReportRow>& rows, const ReportProvenance& prov) {
    if (rows.empty()) throw Error("report has no rows");
    std::string out;
    for (const auto& r : rows) {
        nlohmann::ordered_json rec;
        rec["penalty"] = r.penalty;
        rec["method"] = r.metrics.label;
        rec["brier_sum"] = r.metrics.brier_sum;
        rec["brier_mean"] = r.metrics.brier_mean;
        rec["deviance"] = r.metrics.deviance;
        rec["q2"] = r.metrics.q2;
        rec["c_index"] = r.metrics.c_index;
        rec["n"] = r.metrics.n;
        rec["seed"] = prov.seed;
        rec["outer_folds"] = prov.outer_folds;
        rec["inner_folds"] = prov.inner_folds;
        rec["sequential_outer"] = prov.sequential_outer;
        rec["version"] = prov.version;
        out += rec.dump();
        out += '\n';
    }
    return out;
}

std::vector<ParsedRecord> parse_machine_report(const std::string& text) {
    std::vector<ParsedRecord> records;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            const auto rec = nlohmann::json::parse(line);
            ParsedRecord p;
            p.row.penalty = rec.at("penalty").get<std::string>();
            p.row.metrics.label = rec.at("method").get<std::string>();
            p.row.metrics.brier_sum = rec.at("brier_sum").get<double>();
            p.row.metrics.brier_mean = rec.at("brier_mean").get<double>();
            p.row.metrics.deviance = rec.at("deviance").get<double>();
            p.row.metrics.q2 = rec.at("q2").get<double>();
            p.row.metrics.c_index = rec.at("c_index").get<double>();
            p.row.metrics.n = rec.at("n").get<Eigen::Index>();
            p.provenance.seed = rec.at("seed").get<std::uint64_t>();
            p.provenance.outer_folds = rec.at("outer_folds").get<int>();
            p.provenance.inner_folds = rec.at("inner_folds").get<int>();
            p.provenance.sequential_outer = rec.value("sequential_outer", "");
            p.provenance.version = rec.value("version", "");
            records.push_back(std::move(p));
        } catch (const nlohmann::json::exception& e) {
            throw Error("machine report line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

void write_report(const std::vector<ReportRow>& rows, ReportLayout layout, const fs::path& path,
                  const ReportProvenance& prov) {
    const std::string text =
        layout == ReportLayout::Table ? format_table_report(rows, prov) : format_machine_report(rows, prov);
    auto out = open_for_write(path);
    out << text;
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

}  // namespace omnicomb
