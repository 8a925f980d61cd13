// sarlab command-line driver: dataset generation, scheme training with
// cross-validation, DeepFool attacks, and report emission.

#include <CLI11.hpp>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <numeric>
#include <string>

#include "sarlab/config.hpp"
#include "sarlab/dataset.hpp"
#include "sarlab/experiment.hpp"
#include "sarlab/model.hpp"
#include "sarlab/robustness.hpp"

namespace fs = std::filesystem;
using namespace sarlab;

namespace {

struct CliOptions {
    std::string config_path;
    std::string out_dir = "out";
    std::string data_dir;
    std::string model_path;
    std::string scheme;
    long seed = -1;
    int folds = -1;
    bool reuse_data = false;
};

ExperimentConfig load_config(const CliOptions& opt) {
    ExperimentConfig cfg =
        opt.config_path.empty() ? ExperimentConfig{} : ExperimentConfig::from_file(opt.config_path);
    if (opt.seed >= 0) cfg.seed = static_cast<std::uint64_t>(opt.seed);
    if (opt.folds > 0) cfg.folds = opt.folds;
    if (!opt.scheme.empty()) cfg.schemes = {scheme_from_string(opt.scheme)};
    cfg.validate();
    return cfg;
}

int run_gen_data(const CliOptions& opt) {
    const ExperimentConfig cfg = load_config(opt);
    const fs::path dir = opt.data_dir.empty() ? fs::path(opt.out_dir) / "data" : fs::path(opt.data_dir);
    const GeneratedDataset ds = generate_dataset(cfg, dir, cfg.train.workers);
    std::printf("wrote %zu records to %s\n", ds.records.size(), dir.string().c_str());
    return 0;
}

int run_train(const CliOptions& opt) {
    ExperimentConfig cfg = load_config(opt);
    if (opt.data_dir.empty()) throw std::invalid_argument("train: --data <dataset dir> is required");
    const auto records = load_dataset(opt.data_dir);

    fs::create_directories(opt.out_dir);
    for (Scheme scheme : cfg.schemes) {
        const CvResult cv = run_cv(records, scheme, cfg);
        write_cv_outputs(cv, opt.out_dir);
        const SummaryRow row = summarize(cv);
        std::printf("%s: accuracy %.3f +/- %.3f, rho %s\n", to_string(scheme), row.accuracy_mean,
                    row.accuracy_std,
                    row.rho_mean ? detail::fmt(*row.rho_mean).c_str() : "undefined");
    }
    return 0;
}

int run_attack(const CliOptions& opt) {
    const ExperimentConfig cfg = load_config(opt);
    if (opt.data_dir.empty()) throw std::invalid_argument("attack: --data <dataset dir> is required");
    if (opt.model_path.empty()) throw std::invalid_argument("attack: --model <checkpoint> is required");
    const auto records = load_dataset(opt.data_dir);
    const AtrModel<float> model = AtrModel<float>::load(opt.model_path);

    const RhoReport rep = rho_adv(records, model, cfg.attack);
    fs::create_directories(opt.out_dir);
    std::ostringstream csv;
    csv << attack_csv_header() << ",pose\n";
    for (const auto& row : rep.rows) csv << to_csv_row(row) << "," << detail::fmt(row.pose) << "\n";
    const fs::path out = fs::path(opt.out_dir) / "attacks.csv";
    detail::write_text(out, csv.str());

    if (rep.rho)
        std::printf("rho_adv = %.6g over %zu samples (%zu failed)\n", *rep.rho, rep.evaluated,
                    rep.failed);
    else
        std::printf("rho_adv undefined: no successful attacks over %zu samples\n", rep.evaluated);
    std::printf("wrote %s\n", out.string().c_str());
    return 0;
}

// rebuild the summary artifacts from per-scheme outputs persisted by
// `train` / `run-all`
int run_report(const CliOptions& opt) {
    const fs::path schemes_dir = fs::path(opt.out_dir) / "schemes";
    if (!fs::exists(schemes_dir))
        throw std::invalid_argument("report: no scheme results under " + opt.out_dir);

    std::vector<SummaryRow> summary;
    std::vector<AngleBinRow> angle_rows;
    for (Scheme scheme : all_schemes()) {
        const fs::path dir = schemes_dir / to_string(scheme);
        if (!fs::exists(dir / "folds.csv")) continue;

        std::ifstream folds_csv(dir / "folds.csv");
        std::string line;
        std::getline(folds_csv, line);  // header
        std::vector<double> accs, rhos;
        std::vector<AttackRow> rows;
        while (std::getline(folds_csv, line)) {
            if (line.empty()) continue;
            std::istringstream ss(line);
            std::string fold, acc, rho;
            std::getline(ss, fold, ',');
            std::getline(ss, acc, ',');
            std::getline(ss, rho, ',');
            accs.push_back(std::stod(acc));
            if (!rho.empty()) rhos.push_back(std::stod(rho));

            std::ifstream attacks(dir / ("attacks_fold" + fold + ".csv"));
            std::string arow;
            std::getline(attacks, arow);  // header
            while (std::getline(attacks, arow)) {
                if (arow.empty()) continue;
                std::istringstream as(arow);
                AttackRow r;
                std::string field;
                std::getline(as, field, ',');
                r.sample_id = std::stoi(field);
                std::getline(as, field, ',');
                r.true_class = std::stoi(field);
                std::getline(as, field, ',');
                r.pred_class = std::stoi(field);
                std::getline(as, field, ',');
                r.adv_class = std::stoi(field);
                std::getline(as, field, ',');
                r.iterations = std::stoi(field);
                std::getline(as, field, ',');
                r.norm_ratio = std::stod(field);
                std::getline(as, field, ',');
                r.pose = std::stod(field);
                r.success = r.iterations > 0 ? r.adv_class != r.pred_class : r.norm_ratio == 0.0;
                rows.push_back(r);
            }
        }

        SummaryRow srow;
        srow.scheme = to_string(scheme);
        srow.accuracy_mean =
            accs.empty() ? 0.0 : std::accumulate(accs.begin(), accs.end(), 0.0) / accs.size();
        {
            double acc2 = 0.0;
            for (double a : accs) acc2 += (a - srow.accuracy_mean) * (a - srow.accuracy_mean);
            srow.accuracy_std = accs.size() > 1 ? std::sqrt(acc2 / (accs.size() - 1)) : 0.0;
        }
        if (!rhos.empty()) {
            const double m = std::accumulate(rhos.begin(), rhos.end(), 0.0) / rhos.size();
            double acc2 = 0.0;
            for (double r : rhos) acc2 += (r - m) * (r - m);
            srow.rho_mean = m;
            srow.rho_std = rhos.size() > 1 ? std::sqrt(acc2 / (rhos.size() - 1)) : 0.0;
        }
        summary.push_back(srow);
        const auto bins = angle_binned_report(to_string(scheme), rows);
        angle_rows.insert(angle_rows.end(), bins.begin(), bins.end());
    }
    if (summary.empty()) throw std::invalid_argument("report: no completed schemes found");

    std::ostringstream summary_csv;
    summary_csv << summary_csv_header() << "\n";
    for (const auto& row : summary) summary_csv << to_csv_row(row) << "\n";
    detail::write_text(fs::path(opt.out_dir) / "summary.csv", summary_csv.str());

    std::ostringstream angle_csv;
    angle_csv << angle_csv_header() << "\n";
    for (const auto& row : angle_rows) angle_csv << to_csv_row(row) << "\n";
    detail::write_text(fs::path(opt.out_dir) / "angle_bins.csv", angle_csv.str());

    detail::write_text(fs::path(opt.out_dir) / "report.txt", render_report(summary));
    std::printf("%s", render_report(summary).c_str());
    return 0;
}

int run_run_all(const CliOptions& opt) {
    const ExperimentConfig cfg = load_config(opt);
    const RunAllResult result = run_all(cfg, opt.out_dir, opt.reuse_data);
    std::printf("%s", render_report(result.summary).c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sarlab: SAR target classification robustness laboratory"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    CliOptions opt;
    app.add_option("--config", opt.config_path, "configuration file (flat key=value text)");
    app.add_option("--out", opt.out_dir, "output directory");
    app.add_option("--seed", opt.seed, "override the master seed");
    app.add_option("--folds", opt.folds, "override the cross-validation fold count");

    auto* gen = app.add_subcommand("gen-data", "simulate and persist a dataset");
    gen->add_option("--data", opt.data_dir, "dataset directory (default <out>/data)");

    auto* train_cmd = app.add_subcommand("train", "cross-validated training for the configured schemes");
    train_cmd->add_option("--data", opt.data_dir, "dataset directory")->required();
    train_cmd->add_option("--scheme", opt.scheme, "train a single scheme (BASIC, POSE, SIM, ...)");

    auto* attack_cmd = app.add_subcommand("attack", "DeepFool a checkpoint over a dataset");
    attack_cmd->add_option("--data", opt.data_dir, "dataset directory")->required();
    attack_cmd->add_option("--model", opt.model_path, "model checkpoint")->required();

    app.add_subcommand("report", "rebuild summary artifacts from persisted results");

    auto* runall = app.add_subcommand("run-all", "generate data, train all schemes, report");
    runall->add_flag("--reuse-data", opt.reuse_data, "reuse an existing dataset under <out>/data");
    runall->add_option("--scheme", opt.scheme, "restrict to a single scheme");

    CLI11_PARSE(app, argc, argv);

    try {
        if (app.got_subcommand("gen-data")) return run_gen_data(opt);
        if (app.got_subcommand("train")) return run_train(opt);
        if (app.got_subcommand("attack")) return run_attack(opt);
        if (app.got_subcommand("report")) return run_report(opt);
        if (app.got_subcommand("run-all")) return run_run_all(opt);
    } catch (const TrainingError& e) {
        std::cerr << "error: train: " << e.what() << " (batch " << e.batch_index << ")\n";
        return 5;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: config: " << e.what() << "\n";
        return 2;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: io: " << e.what() << "\n";
        return 3;
    } catch (const std::runtime_error& e) {
        const std::string what = e.what();
        const bool io = what.find("cannot open") != std::string::npos ||
                        what.find("write") != std::string::npos ||
                        what.find("truncated") != std::string::npos;
        std::cerr << "error: " << (io ? "io" : "internal") << ": " << what << "\n";
        return io ? 3 : 10;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 10;
    }
    return 0;
}
