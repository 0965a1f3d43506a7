#ifndef ODCL_METRICS_HPP
#define ODCL_METRICS_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "odcl/errors.hpp"
#include "odcl/mode.hpp"

namespace odcl {

// T x T grid: entry (dataset t, step i) holds the accuracy of dataset t's
// test set after training step i. Columns left of the diagonal are zero-shot.
class AccuracyMatrix {
public:
    AccuracyMatrix(int total_tasks, Mode mode);

    int total_tasks() const { return total_; }
    Mode mode() const { return mode_; }

    void record(int dataset, int step, double accuracy); // 1-based, range-checked
    double at(int dataset, int step) const;              // throws if unfilled
    bool filled(int dataset, int step) const;
    bool fully_populated() const;

    bool operator==(const AccuracyMatrix&) const = default;

private:
    std::size_t index(int dataset, int step) const;

    int total_;
    Mode mode_;
    std::vector<double> values_;
    std::vector<unsigned char> set_;
};

struct MetricReport {
    int total_tasks = 0;
    std::vector<double> avg_per_dataset;        // row means
    std::vector<double> last_per_dataset;       // final column
    std::vector<double> transfer_per_dataset;   // NaN for the first dataset
    std::vector<double> forgetting_per_dataset; // mean from the diagonal onward
    double avg = 0, last = 0, forgetting = 0;
    std::optional<double> transfer; // absent for single-task streams
};

// Requires a fully populated matrix.
MetricReport compute_report(const AccuracyMatrix& matrix);

// CSV with a step-index header row and a leading dataset-name column.
void write_matrix_csv(const AccuracyMatrix& matrix, const std::vector<std::string>& dataset_names,
                      const std::filesystem::path& path);
std::pair<AccuracyMatrix, std::vector<std::string>> load_matrix_csv(
    const std::filesystem::path& path, Mode mode);

// Report tables, one row per metric, columns per dataset plus the mean,
// accuracies rendered as percentages with two decimals.
void write_report_markdown(const MetricReport& report, const std::vector<std::string>& names,
                           Mode mode, const std::filesystem::path& path);
std::string render_report_text(const MetricReport& report, const std::vector<std::string>& names,
                               Mode mode);

// Aggregation of prediction logs back into accuracy cells.
struct PredictionLogSummary {
    // (mode, dataset, step) -> (correct, total)
    std::map<std::tuple<int, int, int>, std::pair<long, long>> cells;

    std::optional<double> accuracy(Mode mode, int dataset, int step) const;
};

PredictionLogSummary parse_prediction_log(const std::filesystem::path& path);

} // namespace odcl

#endif
