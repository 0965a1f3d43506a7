#include <CLI11.hpp>
#include <iostream>

#include "odcl/harness.hpp"
#include "odcl/verify.hpp"

namespace {

// CLI overrides land in the key-value map before config resolution, so they
// behave exactly like lines in the config file.
std::map<std::string, std::string> load_config_map(const std::string& config_path,
                                                   const std::optional<long>& seed,
                                                   const std::string& output,
                                                   const std::string& order, bool deterministic) {
    std::map<std::string, std::string> kv;
    if (!config_path.empty()) kv = odcl::parse_flat_config(config_path);
    if (seed) kv["run.seed"] = std::to_string(*seed);
    if (!output.empty()) kv["run.output"] = output;
    if (!order.empty()) kv["run.order"] = order;
    if (deterministic) kv["run.deterministic"] = "true";
    return kv;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"open-domain continual learning experiment harness"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<long> seed;
    std::string output;
    std::string order;
    bool deterministic = false;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "configuration file (flat key = value lines)");
        sub->add_option("--seed", seed, "override run.seed");
        sub->add_option("--output", output, "override run.output");
        sub->add_option("--order", order, "task order as a comma list, e.g. 2,1,3");
        sub->add_flag("--deterministic", deterministic, "force deterministic execution");
    };

    auto* generate = app.add_subcommand("generate", "generate a stream manifest");
    add_common(generate);
    auto* run = app.add_subcommand("run", "run the configured experiment");
    add_common(run);
    bool resume = false;
    run->add_flag("--resume", resume, "continue from the last task checkpoint");
    auto* report = app.add_subcommand("report", "re-derive tables from a run directory");
    add_common(report);
    bool plots = false;
    report->add_flag("--plots", plots, "also write accuracy plots");
    auto* verify = app.add_subcommand("verify", "run the invariant self-checks");

    CLI11_PARSE(app, argc, argv);

    try {
        auto kv = load_config_map(config_path, seed, output, order, deterministic);
        if (generate->parsed()) {
            odcl::ExperimentConfig cfg = odcl::ExperimentConfig::from_map(kv);
            cfg.stream.validate();
            odcl::TaskStream stream = odcl::generate_stream(cfg.stream);
            auto path = cfg.output / "stream.manifest";
            odcl::write_manifest(stream, path);
            std::cout << "wrote " << path.string() << " (" << stream.total_tasks() << " tasks)\n";
        } else if (run->parsed()) {
            odcl::ExperimentConfig cfg = odcl::ExperimentConfig::from_map(kv);
            odcl::RunRecord record = odcl::run_experiment(cfg, resume);
            std::cout << "run complete: " << record.methods.size() << " method(s), outputs in "
                      << cfg.output.string() << "\n";
            for (const auto& method : record.methods) {
                std::cout << "  " << odcl::method_name(method.method);
                for (const auto& [mode, rep] : method.reports) {
                    char buf[96];
                    std::snprintf(buf, sizeof(buf), " | %s last %.2f%% avg %.2f%%",
                                  odcl::mode_name(mode), 100 * rep.last, 100 * rep.avg);
                    std::cout << buf;
                }
                std::cout << "\n";
            }
        } else if (report->parsed()) {
            odcl::ExperimentConfig cfg = odcl::ExperimentConfig::from_map(kv);
            odcl::regenerate_reports(cfg.output, plots);
            std::cout << "reports written under " << cfg.output.string() << "\n";
        } else if (verify->parsed()) {
            if (!odcl::run_verify_suite(std::cout)) {
                std::cerr << "verification failed\n";
                return 1;
            }
            std::cout << "all checks passed\n";
        }
    } catch (const odcl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const odcl::DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
