// smlp: generate / extract / train / compare-optimizers / compare-models / evaluate
//
// Exit codes: 0 success, 2 config error, 3 data error, 4 numerical divergence.

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "smlp/smlp.hpp"

namespace {

smlp::Config load_config(const std::string& path) {
    if (path.empty())
        return smlp::Config{};
    return smlp::Config::from_file(path);
}

std::uint64_t effective_seed(const smlp::Config& cfg, const std::optional<std::uint64_t>& cli_seed,
                             std::uint64_t fallback) {
    if (cli_seed)
        return *cli_seed;
    return static_cast<std::uint64_t>(cfg.get_int("seed", static_cast<std::int64_t>(fallback)));
}

smlp::ExtractOptions extract_options_from_config(const smlp::Config& cfg) {
    smlp::ExtractOptions opt;
    opt.trend_window = static_cast<int>(cfg.get_int("extract.trend_window", opt.trend_window));
    opt.short_period = static_cast<int>(cfg.get_int("extract.short_period", opt.short_period));
    opt.long_period = static_cast<int>(cfg.get_int("extract.long_period", opt.long_period));
    opt.short_max_lag = static_cast<int>(cfg.get_int("extract.short_max_lag", opt.short_max_lag));
    opt.long_max_lag = static_cast<int>(cfg.get_int("extract.long_max_lag", opt.long_max_lag));
    opt.ce_long_window = static_cast<int>(cfg.get_int("extract.ce_long_window", opt.ce_long_window));
    opt.ce_short_window =
        static_cast<int>(cfg.get_int("extract.ce_short_window", opt.ce_short_window));
    opt.sse_on_long = cfg.get_bool("extract.sse_on_long", opt.sse_on_long);
    opt.kl_lambda = cfg.get_real("extract.kl_lambda", opt.kl_lambda);
    opt.burst.scaling = cfg.get_real("extract.burst_scaling", opt.burst.scaling);
    opt.burst.gamma = cfg.get_real("extract.burst_gamma", opt.burst.gamma);
    return opt;
}

smlp::UnitShapes shapes_from_config(const smlp::Config& cfg, const char* key,
                                    const smlp::UnitShapes& fallback) {
    const std::string text = cfg.get_string(key, "");
    if (text.empty())
        return fallback;
    return smlp::parse_shapes(text);
}

// Train-flow normalization: a dataset with embedded stats is already
// normalized; a raw one gets stats fitted on the fit split.
smlp::FeatureStats ensure_normalized(smlp::LabeledDataset& ds, const smlp::SplitManifest& manifest) {
    if (ds.feature_stats)
        return *ds.feature_stats;
    const smlp::FeatureStats stats = smlp::fit_normalizer(ds, manifest.fit);
    smlp::normalize_dataset(ds, stats);
    return stats;
}

int cmd_generate(const std::string& config_path, const std::optional<std::uint64_t>& seed,
                 const std::string& out_path) {
    const smlp::Config cfg = load_config(config_path);
    smlp::SyntheticSpec spec = smlp::synthetic_spec_from_config(cfg);
    spec.seed = effective_seed(cfg, seed, spec.seed);
    const auto data = smlp::generate_synthetic(spec);
    smlp::save_instances_jsonl(out_path, data);

    std::array<std::size_t, smlp::kClassCount> counts{};
    for (const auto& li : data)
        ++counts[smlp::class_code(li.label)];
    std::cout << "generated " << data.size() << " instances -> " << out_path << "\n";
    for (const smlp::EventClass c : smlp::all_classes())
        std::cout << "  " << smlp::class_name(c) << ": " << counts[smlp::class_code(c)] << "\n";
    return 0;
}

int cmd_extract(const std::string& in_path, const std::string& gazetteer_dir,
                const std::string& config_path, const std::string& out_path, bool normalize) {
    const smlp::Config cfg = load_config(config_path);
    const smlp::ExtractOptions opt = extract_options_from_config(cfg);
    const smlp::Gazetteer gz = smlp::Gazetteer::load(gazetteer_dir);
    const auto instances = smlp::load_instances_jsonl(in_path);
    if (instances.empty())
        throw smlp::DataError("no instances in " + in_path);

    smlp::LabeledDataset ds;
    ds.provenance = in_path;
    ds.features.reserve(instances.size());
    ds.labels.reserve(instances.size());
    for (const auto& li : instances) {
        ds.features.push_back(smlp::extract_features(li.instance, gz, opt));
        ds.labels.push_back(li.label);
    }
    if (normalize) {
        const smlp::FeatureStats stats = smlp::fit_normalizer(ds);
        smlp::normalize_dataset(ds, stats);
    }
    smlp::save_dataset(ds, out_path);
    std::cout << "extracted " << ds.size() << " vectors -> " << out_path
              << (normalize ? " (z-scored, stats embedded)" : "") << "\n";
    return 0;
}

int cmd_train(const std::string& data_path, const std::string& config_path,
              const std::optional<std::uint64_t>& seed, const std::string& checkpoint_path,
              const std::string& curve_path) {
    const smlp::Config cfg = load_config(config_path);
    const std::uint64_t master = effective_seed(cfg, seed, 7);

    smlp::LabeledDataset ds = smlp::load_dataset(data_path);
    const bool stratified = cfg.get_bool("split.stratified", false);
    const smlp::SplitManifest manifest = smlp::split_dataset(ds, master, stratified);
    const smlp::FeatureStats stats = ensure_normalized(ds, manifest);

    const smlp::OptimizerSpec ospec = smlp::optimizer_spec_from_config(cfg);
    smlp::TrainConfig tc = smlp::train_config_from_config(cfg);
    if (!cfg.has("train.shuffle_seed"))
        tc.shuffle_seed = master;
    const smlp::UnitShapes shapes =
        shapes_from_config(cfg, "model.arch", smlp::default_unit_shapes());

    const smlp::TrainReport report =
        smlp::train(smlp::init_model(shapes, master), ospec, ds, manifest, tc);
    smlp::save_checkpoint(checkpoint_path, report.best_model, stats);
    if (!curve_path.empty()) {
        std::ofstream os(curve_path);
        if (!os)
            throw smlp::DataError("cannot open for writing: " + curve_path);
        smlp::write_curve_csv(os, report.curve);
    }

    std::cout << "trained " << smlp::format_shapes(smlp::model_shapes(report.model)) << " with "
              << report.curve.optimizer << " on " << manifest.fit.size() << " instances\n";
    if (!report.curve.losses.empty())
        std::cout << "final training loss " << report.curve.final_loss << ", best validation loss "
                  << report.best_val_loss << " (epoch " << report.best_epoch << ")\n";
    std::cout << "checkpoint -> " << checkpoint_path << "\n";
    return 0;
}

int cmd_compare_optimizers(const std::string& data_path, const std::string& config_path,
                           const std::optional<std::uint64_t>& seed, const std::string& out_dir) {
    const smlp::Config cfg = load_config(config_path);
    smlp::LabeledDataset ds = smlp::load_dataset(data_path);
    if (!ds.feature_stats) {
        const smlp::FeatureStats stats = smlp::fit_normalizer(ds);
        smlp::normalize_dataset(ds, stats);
    }

    smlp::CompareOptimizersConfig cc;
    cc.seed = effective_seed(cfg, seed, cc.seed);
    cc.batch_size = static_cast<std::size_t>(
        cfg.get_int("compare.batch", static_cast<std::int64_t>(cc.batch_size)));
    cc.epochs = static_cast<std::size_t>(
        cfg.get_int("compare.epochs", static_cast<std::int64_t>(cc.epochs)));
    cc.shapes = shapes_from_config(cfg, "model.arch", cc.shapes);
    if (cfg.has("compare.fractions")) {
        cc.fractions.clear();
        for (const std::int64_t pct : cfg.get_int_list("compare.fractions", {}))
            cc.fractions.push_back(static_cast<double>(pct) / 100.0);
    }

    std::filesystem::create_directories(out_dir);
    const auto curves = smlp::compare_optimizers(ds, cc);

    const std::string summary_path = out_dir + "/final_losses.csv";
    std::ofstream summary(summary_path);
    if (!summary)
        throw smlp::DataError("cannot open for writing: " + summary_path);
    summary << "method,fraction,final_loss\n";
    for (const smlp::ConvergenceCurve& curve : curves) {
        const int pct = static_cast<int>(std::lround(curve.fraction * 100.0));
        const std::string path =
            out_dir + "/curve_" + curve.optimizer + "_" + std::to_string(pct) + ".csv";
        std::ofstream os(path);
        if (!os)
            throw smlp::DataError("cannot open for writing: " + path);
        smlp::write_curve_csv(os, curve);
        summary << curve.optimizer << ',' << pct << ',';
        smlp::detail::write_real(summary, curve.final_loss);
        summary << '\n';
    }
    std::cout << "wrote " << curves.size() << " curves -> " << out_dir << "\n";
    return 0;
}

int cmd_compare_models(const std::string& data_path, const std::string& config_path,
                       const std::optional<std::uint64_t>& seed, const std::string& out_path) {
    const smlp::Config cfg = load_config(config_path);
    smlp::LabeledDataset ds = smlp::load_dataset(data_path);

    smlp::CompareModelsConfig cc;
    cc.seed = effective_seed(cfg, seed, cc.seed);
    cc.stratified = cfg.get_bool("split.stratified", cc.stratified);
    cc.smlp_shapes = shapes_from_config(cfg, "model.arch", cc.smlp_shapes);
    cc.mlp_shapes = shapes_from_config(cfg, "model.mlp_arch", cc.mlp_shapes);
    cc.optimizer = smlp::optimizer_spec_from_config(cfg);
    cc.train = smlp::train_config_from_config(cfg);
    if (!cfg.has("train.shuffle_seed"))
        cc.train.shuffle_seed = cc.seed;

    if (!ds.feature_stats) {
        const smlp::SplitManifest manifest = smlp::split_dataset(ds, cc.seed, cc.stratified);
        smlp::normalize_dataset(ds, smlp::fit_normalizer(ds, manifest.fit));
    }

    const smlp::ModelComparison cmp = smlp::compare_models(ds, cc);
    const std::vector<std::pair<std::string, smlp::EvalReport>> rows{
        {"gaussian_nb", cmp.nb}, {"mlp", cmp.mlp}, {"smlp", cmp.smlp}};
    std::ofstream os(out_path);
    if (!os)
        throw smlp::DataError("cannot open for writing: " + out_path);
    smlp::write_metrics_csv(os, rows);

    std::cout << "MAP: gaussian_nb " << cmp.nb.map << ", mlp " << cmp.mlp.map << ", smlp "
              << cmp.smlp.map << "\n";
    std::cout << "metrics -> " << out_path << "\n";
    return 0;
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& data_path,
                 const std::string& config_path, const std::optional<std::uint64_t>& seed,
                 const std::string& metrics_path, const std::string& confusion_path,
                 const std::string& slice) {
    const smlp::Config cfg = load_config(config_path);
    const smlp::Checkpoint cp = smlp::load_checkpoint(checkpoint_path);
    smlp::LabeledDataset ds = smlp::load_dataset(data_path);

    if (!ds.feature_stats && cp.stats)
        smlp::normalize_dataset(ds, *cp.stats);

    std::vector<std::size_t> idx;
    if (slice == "test") {
        const std::uint64_t master = effective_seed(cfg, seed, 7);
        const smlp::SplitManifest manifest =
            smlp::split_dataset(ds, master, cfg.get_bool("split.stratified", false));
        idx = manifest.test;
    } else if (slice == "all") {
        idx.resize(ds.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
    } else {
        throw smlp::ConfigError("--slice must be 'all' or 'test'");
    }

    const smlp::EvalReport report = smlp::evaluate(cp.model, ds, idx);
    {
        const std::vector<std::pair<std::string, smlp::EvalReport>> rows{{"smlp", report}};
        std::ofstream os(metrics_path);
        if (!os)
            throw smlp::DataError("cannot open for writing: " + metrics_path);
        smlp::write_metrics_csv(os, rows);
    }
    if (!confusion_path.empty()) {
        std::ofstream os(confusion_path);
        if (!os)
            throw smlp::DataError("cannot open for writing: " + confusion_path);
        smlp::write_confusion_csv(os, report);
    }
    std::cout << "evaluated " << report.test_count << " instances: MAP " << report.map
              << ", accuracy " << report.accuracy << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stacked-MLP event-class pipeline"};
    app.require_subcommand(1);

    std::string config_path, in_path, out_path, data_path, checkpoint_path;
    std::string gazetteer_dir = "data/gazetteer";
    std::string curve_path, out_dir, metrics_path, confusion_path;
    std::string slice = "all";
    bool normalize = false;
    std::optional<std::uint64_t> seed;

    CLI::App* generate = app.add_subcommand("generate", "Generate synthetic raw instances");
    generate->add_option("--config", config_path, "key=value config file");
    generate->add_option("--seed", seed, "override the spec seed");
    generate->add_option("--out", out_path, "output instance file (JSON lines)")->required();

    CLI::App* extract = app.add_subcommand("extract", "Extract 28-feature vectors from instances");
    extract->add_option("--in", in_path, "instance file (JSON lines)")->required();
    extract->add_option("--gazetteer", gazetteer_dir, "gazetteer directory (person.txt, ...)");
    extract->add_option("--config", config_path, "key=value config file");
    extract->add_flag("--normalize", normalize, "z-score features and embed the stats");
    extract->add_option("--out", out_path, "output dataset file")->required();

    CLI::App* train = app.add_subcommand("train", "Train a stacked MLP on a dataset");
    train->add_option("--data", data_path, "dataset file")->required();
    train->add_option("--config", config_path, "key=value config file");
    train->add_option("--seed", seed, "master seed (split, init, shuffle)");
    train->add_option("--out", checkpoint_path, "output checkpoint")->required();
    train->add_option("--curve", curve_path, "per-iteration loss CSV");

    CLI::App* cmpopt = app.add_subcommand("compare-optimizers",
                                          "Convergence curves for the seven learning methods");
    cmpopt->add_option("--data", data_path, "dataset file")->required();
    cmpopt->add_option("--config", config_path, "key=value config file");
    cmpopt->add_option("--seed", seed, "grid seed");
    cmpopt->add_option("--outdir", out_dir, "directory for curve CSVs")->required();

    CLI::App* cmpmodels = app.add_subcommand(
        "compare-models", "Gaussian NB vs single MLP vs stacked MLP on one split");
    cmpmodels->add_option("--data", data_path, "dataset file")->required();
    cmpmodels->add_option("--config", config_path, "key=value config file");
    cmpmodels->add_option("--seed", seed, "split/init seed");
    cmpmodels->add_option("--out", out_path, "metrics CSV")->required();

    CLI::App* evaluate = app.add_subcommand("evaluate", "Evaluate a checkpoint on a dataset");
    evaluate->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
    evaluate->add_option("--data", data_path, "dataset file")->required();
    evaluate->add_option("--config", config_path, "key=value config file");
    evaluate->add_option("--seed", seed, "split seed when --slice test");
    evaluate->add_option("--slice", slice, "'all' (default) or 'test'");
    evaluate->add_option("--metrics", metrics_path, "metrics CSV")->required();
    evaluate->add_option("--confusion", confusion_path, "confusion-matrix CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (generate->parsed())
            return cmd_generate(config_path, seed, out_path);
        if (extract->parsed())
            return cmd_extract(in_path, gazetteer_dir, config_path, out_path, normalize);
        if (train->parsed())
            return cmd_train(data_path, config_path, seed, checkpoint_path, curve_path);
        if (cmpopt->parsed())
            return cmd_compare_optimizers(data_path, config_path, seed, out_dir);
        if (cmpmodels->parsed())
            return cmd_compare_models(data_path, config_path, seed, out_path);
        if (evaluate->parsed())
            return cmd_evaluate(checkpoint_path, data_path, config_path, seed, metrics_path,
                                confusion_path, slice);
    } catch (const smlp::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const smlp::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const smlp::DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
