// spatialrisk: command-line front end for the neighborhood risk pipeline.

#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "spatialrisk.hpp"

namespace fs = std::filesystem;
using namespace spatialrisk;

namespace {

struct StageCommand {
    CLI::App* app = nullptr;
    std::string config;
};

StageCommand add_stage_command(CLI::App& root, const std::string& name, const std::string& help) {
    StageCommand cmd;
    cmd.app = root.add_subcommand(name, help + "\nAny config key can be overridden as --section.key=value.");
    cmd.app->allow_extras();
    return cmd;
}

RunConfig load(const StageCommand& cmd, const std::string& config_path) {
    std::vector<std::string> overrides = cmd.app->remaining();
    for (const auto& o : overrides)
        if (o.rfind("--", 0) != 0 || o.find('=') == std::string::npos)
            throw Error(ErrorKind::config, "unrecognized argument " + o + " (overrides look like --section.key=value)");
    return load_config(config_path, overrides);
}

void print_agreement(const std::vector<tables::AgreementRow>& rows) {
    std::cout << "model    n   spearman  concordant%  null95%  perm_p\n";
    for (const auto& r : rows) {
        std::cout << std::left << std::setw(8) << r.model << ' ' << std::setw(4) << r.agreement.n << ' '
                  << std::setw(9) << format_fixed(r.agreement.spearman_rho, 4) << ' ' << std::setw(12)
                  << format_fixed(r.agreement.concordant_pair_pct, 2) << ' ' << std::setw(8)
                  << format_fixed(r.baseline.quantile95_pct, 2) << ' ' << format_fixed(r.baseline.p_value, 4) << '\n';
    }
}

std::vector<std::string> parse_models(const std::string& spec) {
    if (spec == "all") return model_names();
    std::vector<std::string> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        predictions_file(item);  // validates the name
        out.push_back(item);
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Census-based neighborhood risk modeling: PCA, OLS, Huber regression, random forests and rankings."};
    app.require_subcommand(1);
    app.set_version_flag("--version", "spatialrisk 1.0.0");

    std::string config_path;
    std::string models = "all";
    bool report_only = false;

    auto ingest = add_stage_command(app, "ingest", "Parse census and cases, derive and standardize indicators.");
    auto pca = add_stage_command(app, "pca", "Fit PCA on the standardized indicators and select components.");
    auto ols = add_stage_command(app, "fit-ols", "Fit OLS on the selected components and run residual diagnostics.");
    auto rlm = add_stage_command(app, "fit-rlm", "Fit the Huber M-estimator by IRLS.");
    auto grid = add_stage_command(app, "grid-search", "Cross-validated grid search over forest configurations.");
    auto rf = add_stage_command(app, "fit-rf", "Holdout evaluation and final fit of the best forest configuration.");
    auto rank = add_stage_command(app, "rank", "Build risk rankings from model predictions.");
    auto validate = add_stage_command(app, "validate", "Rank agreement against validation-year densities.");
    auto choro = add_stage_command(app, "choropleth", "Join rankings onto GeoJSON neighborhood polygons.");
    auto run = add_stage_command(app, "run", "Run the full pipeline and write report.md and MANIFEST.");
    for (auto* c : {&ingest, &pca, &ols, &rlm, &grid, &rf, &rank, &validate, &choro, &run})
        c->app->add_option("-c,--config", config_path, "Run configuration (JSON)")->required();
    for (auto* c : {&rank, &validate, &choro})
        c->app->add_option("-m,--models", models, "Comma-separated models (ols, rlm, forest) or all")
            ->capture_default_str();
    run.app->add_flag("--report-only", report_only, "Rebuild report.md from existing intermediates without refitting");

    auto* synth = app.add_subcommand("synth", "Write a synthetic city fixture with a planted linear signal.");
    std::string synth_out = "synthetic_city";
    SynthOptions synth_opt;
    synth->add_option("-o,--out", synth_out, "Output directory")->capture_default_str();
    synth->add_option("--seed", synth_opt.seed, "Generator seed")->capture_default_str();
    synth->add_option("-n,--neighborhoods", synth_opt.n_neighborhoods, "Number of neighborhoods")
        ->capture_default_str()
        ->check(CLI::Range(10, 100000));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) {
            const SynthCity city = generate_city(synth_opt);
            const SynthFiles f = write_city(city, synth_out, synth_opt);
            std::cout << "wrote " << city.census.size() << " neighborhoods, " << city.cases.size() << " case rows\n"
                      << "config: " << f.config.string() << '\n';
            return 0;
        }

        const StageCommand* active = nullptr;
        for (auto* c : {&ingest, &pca, &ols, &rlm, &grid, &rf, &rank, &validate, &choro, &run})
            if (c->app->parsed()) active = c;
        const RunConfig cfg = load(*active, config_path);
        const std::string name = active->app->get_name();

        if (name == "run") {
            if (report_only) {
                const fs::path dir = cfg.paths.output_dir;
                std::string failed, cause;
                if (fs::exists(dir / artifact::manifest)) {
                    const Manifest m = read_manifest(dir);
                    failed = m.failed_stage;
                    cause = m.cause;
                }
                write_report(dir);
                write_manifest(dir, failed, cause);
                std::cout << "report: " << (dir / artifact::report).string() << '\n';
                return 0;
            }
            const PipelineReport report = run_pipeline(cfg);
            print_agreement(report.agreement);
            std::cout << "outputs: " << report.output_dir.string() << '\n';
            return 0;
        }

        if (name == "ingest") cfg.check_paths();
        Workspace ws(cfg.paths.output_dir);
        std::vector<tables::AgreementRow> agreement;
        auto stage = [&](const std::string& stage_name, const std::function<void()>& fn) {
            run_stage(stage_name, ws.dir(), fn);
        };
        if (name == "ingest") stage("ingest", [&] { stage_ingest(cfg, ws); });
        else if (name == "pca") {
            stage("pca", [&] { stage_pca(cfg, ws); });
            stage("select", [&] { stage_select(cfg, ws); });
        } else if (name == "fit-ols") stage("ols", [&] { stage_ols(cfg, ws); });
        else if (name == "fit-rlm") stage("rlm", [&] { stage_rlm(cfg, ws); });
        else if (name == "grid-search") stage("grid-search", [&] { stage_grid_search(cfg, ws); });
        else if (name == "fit-rf") stage("forest", [&] { stage_fit_forest(cfg, ws); });
        else if (name == "rank") stage("rank", [&] { stage_rank(cfg, ws, parse_models(models)); });
        else if (name == "validate") stage("validate", [&] { agreement = stage_validate(cfg, ws, parse_models(models)); });
        else if (name == "choropleth") stage("choropleth", [&] { stage_choropleth(cfg, ws, parse_models(models)); });
        if (!agreement.empty()) print_agreement(agreement);
        std::cout << name << ": outputs in " << ws.dir().string() << '\n';
        return 0;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
}
