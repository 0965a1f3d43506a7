#ifndef ODCL_HARNESS_HPP
#define ODCL_HARNESS_HPP

#include <filesystem>
#include <map>
#include <vector>

#include "odcl/config.hpp"
#include "odcl/metrics.hpp"

namespace odcl {

struct PhaseTimings {
    double train_seconds = 0;
    double eval_seconds = 0;
};

struct MethodResult {
    Method method = Method::Coleclip;
    std::map<Mode, AccuracyMatrix> matrices;
    std::map<Mode, MetricReport> reports; // present when the matrices are complete
    std::vector<long> parameters_per_task;
    PhaseTimings timings;
};

struct RunRecord {
    std::uint64_t config_hash = 0;
    std::vector<std::string> dataset_names;
    std::vector<MethodResult> methods;

    const MethodResult* find(Method m) const;
};

// Full protocol: for each method, train the stream's tasks in the configured
// order and, after every step, evaluate every dataset in every mode. Emits
// manifests, matrices, reports, logs and checkpoints under config.output.
// With resume=true, continues a previous run from its last task checkpoint.
RunRecord run_experiment(const ExperimentConfig& config, bool resume = false);

// Single-method shortcuts; the config's method list is ignored.
std::map<Mode, AccuracyMatrix> run_frozen_baseline(const ExperimentConfig& config);
std::map<Mode, AccuracyMatrix> run_naive_finetune(const ExperimentConfig& config);

// Re-derive reports (and optionally plots) from the matrix CSVs in a run
// directory.
void regenerate_reports(const std::filesystem::path& run_dir, bool plots);

// One SVG per dataset: accuracy versus step, one polyline per mode.
void write_dataset_plots(const std::map<Mode, AccuracyMatrix>& matrices,
                         const std::vector<std::string>& dataset_names,
                         const std::filesystem::path& dir);

} // namespace odcl

#endif
