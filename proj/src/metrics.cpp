#include "odcl/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "odcl/textio.hpp"

namespace odcl {

AccuracyMatrix::AccuracyMatrix(int total_tasks, Mode mode) : total_(total_tasks), mode_(mode) {
    if (total_tasks < 1) throw InputError("accuracy matrix: need at least one task");
    values_.assign(static_cast<std::size_t>(total_) * total_, 0.0);
    set_.assign(values_.size(), 0);
}

std::size_t AccuracyMatrix::index(int dataset, int step) const {
    if (dataset < 1 || dataset > total_ || step < 1 || step > total_)
        throw InputError("accuracy matrix: cell (" + std::to_string(dataset) + "," +
                         std::to_string(step) + ") outside a " + std::to_string(total_) + "x" +
                         std::to_string(total_) + " grid");
    return static_cast<std::size_t>(dataset - 1) * total_ + (step - 1);
}

void AccuracyMatrix::record(int dataset, int step, double accuracy) {
    if (!(accuracy >= 0.0 && accuracy <= 1.0))
        throw InputError("accuracy matrix: value " + std::to_string(accuracy) +
                         " outside [0,1]");
    std::size_t i = index(dataset, step);
    values_[i] = accuracy;
    set_[i] = 1;
}

double AccuracyMatrix::at(int dataset, int step) const {
    std::size_t i = index(dataset, step);
    if (!set_[i])
        throw IncompleteMatrixError("accuracy matrix: cell (" + std::to_string(dataset) + "," +
                                    std::to_string(step) + ") not recorded");
    return values_[i];
}

bool AccuracyMatrix::filled(int dataset, int step) const { return set_[index(dataset, step)] != 0; }

bool AccuracyMatrix::fully_populated() const {
    for (unsigned char s : set_)
        if (!s) return false;
    return true;
}

MetricReport compute_report(const AccuracyMatrix& m) {
    if (!m.fully_populated())
        throw IncompleteMatrixError("compute_report: matrix has unrecorded cells");
    const int t_total = m.total_tasks();
    MetricReport r;
    r.total_tasks = t_total;
    r.avg_per_dataset.resize(t_total);
    r.last_per_dataset.resize(t_total);
    r.transfer_per_dataset.assign(t_total, std::numeric_limits<double>::quiet_NaN());
    r.forgetting_per_dataset.resize(t_total);

    for (int t = 1; t <= t_total; ++t) {
        double row_sum = 0;
        for (int i = 1; i <= t_total; ++i) row_sum += m.at(t, i);
        r.avg_per_dataset[t - 1] = row_sum / t_total;
        r.last_per_dataset[t - 1] = m.at(t, t_total);

        if (t >= 2) {
            double pre = 0;
            for (int i = 1; i < t; ++i) pre += m.at(t, i);
            r.transfer_per_dataset[t - 1] = pre / (t - 1);
        }
        double post = 0;
        for (int i = t; i <= t_total; ++i) post += m.at(t, i);
        r.forgetting_per_dataset[t - 1] = post / (t_total - t + 1);
    }

    auto mean = [](const std::vector<double>& v, int from) {
        double s = 0;
        for (std::size_t i = static_cast<std::size_t>(from); i < v.size(); ++i) s += v[i];
        return s / static_cast<double>(v.size() - from);
    };
    r.avg = mean(r.avg_per_dataset, 0);
    r.last = mean(r.last_per_dataset, 0);
    r.forgetting = mean(r.forgetting_per_dataset, 0);
    if (t_total >= 2) r.transfer = mean(r.transfer_per_dataset, 1);
    return r;
}

void write_matrix_csv(const AccuracyMatrix& matrix, const std::vector<std::string>& dataset_names,
                      const std::filesystem::path& path) {
    if (static_cast<int>(dataset_names.size()) != matrix.total_tasks())
        throw InputError("write_matrix_csv: dataset name count mismatch");
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ParseError(path.string() + ": cannot open matrix file for writing");
    out << "dataset";
    for (int i = 1; i <= matrix.total_tasks(); ++i) out << ",step_" << i;
    out << "\n";
    for (int t = 1; t <= matrix.total_tasks(); ++t) {
        out << dataset_names[static_cast<std::size_t>(t - 1)];
        for (int i = 1; i <= matrix.total_tasks(); ++i) {
            out << ",";
            if (matrix.filled(t, i)) out << format_float(matrix.at(t, i));
        }
        out << "\n";
    }
}

std::pair<AccuracyMatrix, std::vector<std::string>> load_matrix_csv(
    const std::filesystem::path& path, Mode mode) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string() + ": cannot open matrix file");
    LineReader rd(in, path.filename().string());

    std::string header;
    if (!rd.next(header)) rd.fail("empty matrix file");
    auto cols = split_on(header, ',');
    if (cols.size() < 2 || cols[0] != "dataset") rd.fail("expected 'dataset,step_1,...' header");
    const int total = static_cast<int>(cols.size()) - 1;

    AccuracyMatrix matrix(total, mode);
    std::vector<std::string> names;
    for (int t = 1; t <= total; ++t) {
        std::string line;
        if (!rd.next(line)) rd.fail("expected " + std::to_string(total) + " data rows");
        auto cells = split_on(line, ',');
        if (static_cast<int>(cells.size()) != total + 1)
            rd.fail("row has " + std::to_string(cells.size() - 1) + " cells, expected " +
                    std::to_string(total));
        names.push_back(cells[0]);
        for (int i = 1; i <= total; ++i) {
            if (cells[static_cast<std::size_t>(i)].empty()) continue; // unfilled cell
            matrix.record(t, i, parse_double(cells[static_cast<std::size_t>(i)], rd, "accuracy"));
        }
    }
    return {matrix, names};
}

namespace {

std::string pct(double v) {
    if (std::isnan(v)) return "-";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * v);
    return buf;
}

} // namespace

std::string render_report_text(const MetricReport& report, const std::vector<std::string>& names,
                               Mode mode) {
    std::ostringstream out;
    out << "mode " << mode_name(mode) << "\n";
    auto row = [&](const char* label, const std::vector<double>& per, double aggregate,
                   bool has_aggregate) {
        out << label << ":";
        for (double v : per) out << " " << pct(v);
        out << " | mean " << (has_aggregate ? pct(aggregate) : "-") << "\n";
    };
    row("Last", report.last_per_dataset, report.last, true);
    row("Forgetting", report.forgetting_per_dataset, report.forgetting, true);
    row("Avg", report.avg_per_dataset, report.avg, true);
    row("Transfer", report.transfer_per_dataset, report.transfer.value_or(0.0),
        report.transfer.has_value());
    out << "datasets:";
    for (const auto& n : names) out << " " << n;
    out << "\n";
    return out.str();
}

void write_report_markdown(const MetricReport& report, const std::vector<std::string>& names,
                           Mode mode, const std::filesystem::path& path) {
    if (static_cast<int>(names.size()) != report.total_tasks)
        throw InputError("write_report_markdown: dataset name count mismatch");
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ParseError(path.string() + ": cannot open report file for writing");

    out << "# Metrics (" << mode_name(mode) << ")\n\n";
    out << "| Metric |";
    for (const auto& n : names) out << " " << n << " |";
    out << " Mean |\n|---|";
    for (std::size_t i = 0; i <= names.size(); ++i) out << "---|";
    out << "\n";

    auto row = [&](const char* label, const std::vector<double>& per,
                   std::optional<double> aggregate) {
        out << "| " << label << " |";
        for (double v : per) out << " " << pct(v) << " |";
        out << " " << (aggregate ? pct(*aggregate) : std::string("-")) << " |\n";
    };
    row("Last", report.last_per_dataset, report.last);
    row("Forgetting", report.forgetting_per_dataset, report.forgetting);
    row("Avg", report.avg_per_dataset, report.avg);
    row("Transfer", report.transfer_per_dataset, report.transfer);
}

std::optional<double> PredictionLogSummary::accuracy(Mode mode, int dataset, int step) const {
    auto it = cells.find({static_cast<int>(mode), dataset, step});
    if (it == cells.end() || it->second.second == 0) return std::nullopt;
    return static_cast<double>(it->second.first) / static_cast<double>(it->second.second);
}

PredictionLogSummary parse_prediction_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string() + ": cannot open prediction log");
    LineReader rd(in, path.filename().string());

    PredictionLogSummary summary;
    std::string line;
    while (rd.next(line)) {
        int step = -1, dataset = -1;
        std::optional<Mode> mode;
        std::string true_label, predicted;
        for (const auto& tok : split_whitespace(line)) {
            auto eq = tok.find('=');
            if (eq == std::string::npos) rd.fail("expected key=value, got '" + tok + "'");
            std::string key = tok.substr(0, eq);
            std::string value = tok.substr(eq + 1);
            if (key == "step")
                step = static_cast<int>(parse_long(value, rd, "step"));
            else if (key == "dataset")
                dataset = static_cast<int>(parse_long(value, rd, "dataset"));
            else if (key == "mode")
                mode = mode_from_name(value);
            else if (key == "true")
                true_label = value;
            else if (key == "pred")
                predicted = value;
            else if (key != "top")
                rd.fail("unknown field '" + key + "'");
        }
        if (step < 1 || dataset < 1 || !mode || true_label.empty() || predicted.empty())
            rd.fail("record is missing required fields");
        auto& cell = summary.cells[{static_cast<int>(*mode), dataset, step}];
        cell.second += 1;
        if (true_label == predicted) cell.first += 1;
    }
    return summary;
}

} // namespace odcl
