#include "odcl/harness.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <set>

#include "odcl/checkpoint.hpp"
#include "odcl/inference.hpp"
#include "odcl/rng.hpp"
#include "odcl/textio.hpp"
#include "odcl/trainer.hpp"

namespace odcl {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<int> resolve_order(const ExperimentConfig& cfg, int total) {
    std::vector<int> order = cfg.order;
    if (order.empty()) {
        order.resize(static_cast<std::size_t>(total));
        std::iota(order.begin(), order.end(), 1);
        return order;
    }
    if (static_cast<int>(order.size()) != total)
        throw ConfigError("config: run.order has " + std::to_string(order.size()) +
                          " entries for a " + std::to_string(total) + "-task stream");
    std::set<int> seen(order.begin(), order.end());
    if (static_cast<int>(seen.size()) != total || *seen.begin() != 1 || *seen.rbegin() != total)
        throw ConfigError("config: run.order must be a permutation of 1.." +
                          std::to_string(total));
    return order;
}

// --- naive finetune -------------------------------------------------------
// Forgetting control: one prompt and one adapter, tuned continuously across
// every task with the local cross-entropy only; classes are always scored
// against the adapted text embedding.

struct NaiveState {
    ModelState<float> model;
    LowRankAdapter<float> adapter;
};

void train_naive_task(const TaskSpec& task, NaiveState& naive, const TrainConfig& cfg,
                      TrainLogWriter* log) {
    cfg.validate();
    const Backbone<float>& backbone = *naive.model.backbone;
    const int t = naive.model.trained_steps() + 1;
    if (t == 1) {
        naive.model.bank.prompts.push_back(
            init_task_prompt<float>(1, cfg.prompt_length, backbone.embed_dim(), cfg.seed));
        naive.adapter = init_adapter<float>(1, cfg.rank, cfg.adapter_targets,
                                            backbone.config().num_layers, backbone.embed_dim(),
                                            cfg.seed);
    }

    AdamOptimizer<float> optimizer(cfg.learning_rate);
    optimizer.register_param(&naive.model.bank.prompts[0].vectors);
    std::vector<const Mat<float>*> grad_list;
    for (auto& layer : naive.adapter.layers)
        for (auto& delta : layer.deltas)
            if (delta) {
                optimizer.register_param(&delta->down);
                optimizer.register_param(&delta->up);
            }

    TrainContext<float> ctx;
    ctx.backbone = &backbone;
    ctx.bank = &naive.model.bank;
    ctx.adapter = &naive.adapter;
    ctx.vocab = nullptr;
    ctx.task_classes = task.class_set;
    ctx.tau = cfg.tau;
    ctx.mode = TextPathMode::AdapterDirect;
    ctx.use_task_prompts = true;

    const long samples = static_cast<long>(task.train_samples.size());
    const long iters_per_epoch = (samples + cfg.batch_size - 1) / cfg.batch_size;
    const int epochs = cfg.epochs_for(t);

    std::vector<std::size_t> order(static_cast<std::size_t>(samples));
    std::iota(order.begin(), order.end(), 0u);

    long iteration = 0;
    TrainGrads<float> grads;
    for (int epoch = 1; epoch <= epochs; ++epoch) {
        Rng shuffle_rng(mix_seed(mix_seed(mix_seed(cfg.seed, 0x5fu), t), epoch));
        shuffle_rng.shuffle(order.begin(), order.end());
        for (long b = 0; b < iters_per_epoch; ++b) {
            ++iteration;
            std::vector<const ImageSample*> batch;
            for (long k = b * cfg.batch_size; k < std::min(samples, (b + 1) * cfg.batch_size); ++k)
                batch.push_back(&task.train_samples[order[static_cast<std::size_t>(k)]]);

            LossBreakdown loss = compute_losses<float>(ctx, batch, nullptr, &grads);
            if (!std::isfinite(loss.total))
                throw DivergenceError("naive finetune task " + std::to_string(t) + " iteration " +
                                      std::to_string(iteration) + ": loss diverged");
            grad_list.clear();
            grad_list.push_back(&grads.prompt);
            for (const auto& layer : grads.adapter.layers)
                for (const auto& delta : layer.deltas)
                    if (delta) {
                        grad_list.push_back(&delta->down);
                        grad_list.push_back(&delta->up);
                    }
            optimizer.step(grad_list);

            if (log) {
                IterationRecord rec;
                rec.task = t;
                rec.epoch = epoch;
                rec.iteration = iteration;
                rec.stage = 1;
                rec.l_ce = loss.ce;
                rec.l_reg = 0;
                rec.loss = loss.total;
                rec.negatives = 0;
                log->append(rec);
            }
        }
    }
    naive.model.trained_class_sets.push_back(task.class_set);
}

double evaluate_naive(const TaskSpec& task, Mode mode, int step, const NaiveState& naive,
                      PredictionLogWriter* log) {
    const Backbone<float>& backbone = *naive.model.backbone;
    std::vector<std::string> candidates;
    if (mode == Mode::TIL) {
        candidates = task.class_set;
    } else {
        candidates = naive.model.seen_classes();
        for (const auto& name : task.class_set)
            if (std::find(candidates.begin(), candidates.end(), name) == candidates.end())
                candidates.push_back(name);
    }

    std::map<std::string, Vec<float>> text;
    for (const auto& name : candidates)
        text.emplace(name, naive.model.trained_steps() > 0
                               ? backbone.adapted_text_embedding(name, naive.adapter)
                               : backbone.frozen_text_embedding(name));

    long correct = 0;
    for (const auto& sample : task.test_samples) {
        VisualOutput<float> vis = backbone.encode_image(sample, naive.model.bank);
        Vec<float> fused = naive.model.bank.size() > 0
                               ? fuse_visual(vis.prompt_outputs[0], vis.cls_output)
                               : vis.cls_output;
        std::size_t best = 0;
        std::vector<std::tuple<std::string, double, int>> scored;
        std::vector<float> logits(candidates.size());
        for (std::size_t j = 0; j < candidates.size(); ++j) {
            logits[j] = cosine_score(fused, text.at(candidates[j]));
            if (logits[j] > logits[best]) best = j;
        }
        if (candidates[best] == sample.label) ++correct;
        if (log) {
            std::vector<std::size_t> idx(candidates.size());
            std::iota(idx.begin(), idx.end(), 0u);
            std::stable_sort(idx.begin(), idx.end(),
                             [&](std::size_t a, std::size_t b) { return logits[a] > logits[b]; });
            for (std::size_t k = 0; k < std::min<std::size_t>(3, idx.size()); ++k)
                scored.emplace_back(candidates[idx[k]], static_cast<double>(logits[idx[k]]), 1);
            log->append(step, task.task_index, mode, sample.label, candidates[best], scored);
        }
    }
    return static_cast<double>(correct) / static_cast<double>(task.test_samples.size());
}

// --- shared emission -------------------------------------------------------

std::string matrix_csv_name(Mode mode) {
    return std::string("matrix_") + mode_name(mode) + ".csv";
}

void write_method_outputs(const fs::path& dir, MethodResult& result,
                          const std::vector<std::string>& names, bool plots) {
    for (auto& [mode, matrix] : result.matrices) {
        write_matrix_csv(matrix, names, dir / matrix_csv_name(mode));
        if (matrix.fully_populated()) {
            MetricReport report = compute_report(matrix);
            write_report_markdown(report, names, mode,
                                  dir / (std::string("report_") + mode_name(mode) + ".md"));
            std::ofstream txt(dir / (std::string("report_") + mode_name(mode) + ".txt"));
            txt << render_report_text(report, names, mode);
            result.reports.emplace(mode, std::move(report));
        }
    }
    if (plots) write_dataset_plots(result.matrices, names, dir / "plots");
}

int latest_checkpoint_step(const fs::path& dir) {
    int best = 0;
    if (!fs::exists(dir)) return 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("task_", 0) == 0 && entry.path().extension() == ".ckpt")
            best = std::max(best, std::stoi(name.substr(5)));
    }
    return best;
}

struct MethodRunner {
    const ExperimentConfig& cfg;
    const TaskStream& stream;
    const std::vector<int>& order;
    const Backbone<float>& backbone;
    const std::vector<std::string>& names;
    int steps_to_run;
    // untrained state for the frozen baseline; shares the run's backbone
    ModelState<float> frozen;

    MethodResult run(Method method, const fs::path& dir, bool resume) const {
        MethodResult result;
        result.method = method;
        const int total = stream.total_tasks();
        for (Mode mode : cfg.modes) result.matrices.emplace(mode, AccuracyMatrix(total, mode));

        ModelState<float> state;
        state.backbone = &backbone;
        ClassVocabulary<float> vocab(static_cast<float>(cfg.train.alpha));
        NaiveState naive;
        naive.model.backbone = &backbone;

        int start_step = 1;
        const fs::path ckpt_dir = dir / "checkpoints";
        if (resume && method != Method::FrozenBaseline) {
            int done = std::min(latest_checkpoint_step(ckpt_dir), steps_to_run);
            if (done > 0) {
                auto data =
                    load_checkpoint<float>(ckpt_dir / ("task_" + std::to_string(done) + ".ckpt"));
                validate_checkpoint(data, done);
                if (method == Method::Coleclip) {
                    state.bank = std::move(data.bank);
                    state.adapter_archive = std::move(data.adapters);
                    state.prompts_enabled = data.prompts_enabled;
                    for (int i = 1; i <= done; ++i)
                        state.trained_class_sets.push_back(
                            stream.tasks[static_cast<std::size_t>(order[i - 1] - 1)].class_set);
                    vocab = ClassVocabulary<float>::load(
                        ckpt_dir / ("task_" + std::to_string(done) + ".vocab"));
                } else {
                    naive.model.bank = std::move(data.bank);
                    if (!naive.model.bank.prompts.empty())
                        naive.model.bank.prompts[0].frozen = false;
                    if (!data.adapters.empty()) naive.adapter = std::move(data.adapters[0]);
                    for (int i = 1; i <= done; ++i)
                        naive.model.trained_class_sets.push_back(
                            stream.tasks[static_cast<std::size_t>(order[i - 1] - 1)].class_set);
                }
                for (Mode mode : cfg.modes) {
                    const fs::path csv = dir / matrix_csv_name(mode);
                    if (fs::exists(csv))
                        result.matrices.at(mode) = load_matrix_csv(csv, mode).first;
                }
                start_step = done + 1;
            }
        }

        if (start_step == 1) {
            std::error_code ec;
            fs::remove(dir / "train_log.txt", ec);
            for (Mode mode : cfg.modes)
                fs::remove(dir / (std::string("predictions_") + mode_name(mode) + ".log"), ec);
        }
        std::optional<TrainLogWriter> train_log;
        std::map<Mode, std::optional<PredictionLogWriter>> pred_logs;
        if (method != Method::FrozenBaseline) train_log.emplace(dir / "train_log.txt");
        for (Mode mode : cfg.modes)
            pred_logs[mode].emplace(dir /
                                    (std::string("predictions_") + mode_name(mode) + ".log"));

        for (int step = start_step; step <= steps_to_run; ++step) {
            const TaskSpec& task = stream.tasks[static_cast<std::size_t>(order[step - 1] - 1)];

            auto train_start = Clock::now();
            if (method == Method::Coleclip) {
                auto task_result = train_task(task, state, vocab, cfg.train, &*train_log);
                result.parameters_per_task.push_back(task_result.learnable_parameters);
            } else if (method == Method::NaiveFinetune) {
                train_naive_task(task, naive, cfg.train, &*train_log);
                result.parameters_per_task.push_back(count_learnable_parameters(
                    naive.model.bank, naive.adapter));
            }
            result.timings.train_seconds += seconds_since(train_start);

            auto eval_start = Clock::now();
            for (Mode mode : cfg.modes) {
                AccuracyMatrix& matrix = result.matrices.at(mode);
                for (int t = 1; t <= stream.total_tasks(); ++t) {
                    const TaskSpec& dataset = stream.tasks[static_cast<std::size_t>(t - 1)];
                    double acc;
                    if (method == Method::NaiveFinetune)
                        acc = evaluate_naive(dataset, mode, step, naive, &*pred_logs.at(mode));
                    else
                        acc = evaluate_dataset(dataset, mode, step,
                                               method == Method::Coleclip ? state : frozen_state(),
                                               method == Method::Coleclip ? vocab : frozen_vocab(),
                                               &*pred_logs.at(mode));
                    matrix.record(t, step, acc);
                }
            }
            result.timings.eval_seconds += seconds_since(eval_start);

            for (auto& [mode, matrix] : result.matrices)
                write_matrix_csv(matrix, names, dir / matrix_csv_name(mode));

            if (method != Method::FrozenBaseline) {
                CheckpointData<float> data;
                data.backbone = cfg.backbone;
                data.shape = stream.shape;
                for (int i = 1; i <= step; ++i) data.step_datasets.push_back(order[i - 1]);
                if (method == Method::Coleclip) {
                    data.prompts_enabled = state.prompts_enabled;
                    data.bank = state.bank;
                    data.adapters = state.adapter_archive;
                } else {
                    data.prompts_enabled = true;
                    data.bank = naive.model.bank;
                    data.adapters = {naive.adapter};
                }
                const fs::path base = ckpt_dir / ("task_" + std::to_string(step));
                save_checkpoint(base.string() + ".ckpt", data, cfg.checkpoint_binary);
                if (method == Method::Coleclip) vocab.save(base.string() + ".vocab");
            }
        }

        write_method_outputs(dir, result, names, cfg.plots);
        write_params_file(dir, result);
        return result;
    }

    const ModelState<float>& frozen_state() const { return frozen; }

    const ClassVocabulary<float>& frozen_vocab() const {
        static const ClassVocabulary<float> empty(0.0f);
        return empty;
    }

    void validate_checkpoint(const CheckpointData<float>& data, int done) const {
        const BackboneConfig& b = cfg.backbone;
        if (data.backbone.seed != b.seed || data.backbone.embed_dim != b.embed_dim ||
            data.backbone.num_layers != b.num_layers || data.backbone.num_heads != b.num_heads ||
            data.backbone.patch_size != b.patch_size || !(data.shape == stream.shape))
            throw ConfigError("resume: checkpoint backbone does not match the configuration");
        if (static_cast<int>(data.step_datasets.size()) != done)
            throw ConfigError("resume: checkpoint step count mismatch");
        for (int i = 0; i < done; ++i)
            if (data.step_datasets[static_cast<std::size_t>(i)] != order[static_cast<std::size_t>(i)])
                throw ConfigError("resume: checkpoint task order does not match run.order");
    }

    static void write_params_file(const fs::path& dir, const MethodResult& result) {
        std::ofstream out(dir / "params.txt");
        for (std::size_t i = 0; i < result.parameters_per_task.size(); ++i)
            out << "task " << (i + 1) << " learnable_parameters "
                << result.parameters_per_task[i] << "\n";
    }
};

} // namespace

const MethodResult* RunRecord::find(Method m) const {
    for (const auto& r : methods)
        if (r.method == m) return &r;
    return nullptr;
}

RunRecord run_experiment(const ExperimentConfig& cfg, bool resume) {
    cfg.validate();
    fs::create_directories(cfg.output);

    TaskStream stream = cfg.manifest ? load_manifest(*cfg.manifest) : generate_stream(cfg.stream);
    if (stream.total_tasks() < 1) throw ConfigError("run: stream has no tasks");
    if (!cfg.manifest && !resume)
        write_manifest(stream, cfg.output / "stream" / "stream.manifest");

    std::vector<int> order = resolve_order(cfg, stream.total_tasks());
    const int steps_to_run = cfg.stop_after > 0
                                 ? std::min(cfg.stop_after, stream.total_tasks())
                                 : stream.total_tasks();

    Backbone<float> backbone(cfg.backbone, stream.shape);

    RunRecord record;
    record.config_hash = cfg.config_hash();
    for (const auto& task : stream.tasks) record.dataset_names.push_back(task.domain_id);

    {
        char hash[32];
        std::snprintf(hash, sizeof(hash), "%016llx",
                      static_cast<unsigned long long>(record.config_hash));
        std::ofstream out(cfg.output / "config_resolved.txt");
        out << "# config_hash " << hash << "\n" << cfg.canonical_text();
    }

    MethodRunner runner{cfg, stream, order, backbone, record.dataset_names, steps_to_run, {}};
    runner.frozen.backbone = &backbone;
    for (Method method : cfg.methods) {
        const fs::path dir = cfg.output / method_name(method);
        fs::create_directories(dir);
        record.methods.push_back(runner.run(method, dir, resume));
    }

    {
        std::ofstream out(cfg.output / "run_record.txt");
        char hash[32];
        std::snprintf(hash, sizeof(hash), "%016llx",
                      static_cast<unsigned long long>(record.config_hash));
        out << "odcl-run v1\nconfig_hash " << hash << "\ndatasets";
        for (const auto& n : record.dataset_names) out << " " << n;
        out << "\n";
        for (const auto& r : record.methods) {
            out << "method " << method_name(r.method) << "\n";
            char buf[128];
            std::snprintf(buf, sizeof(buf), "  train_seconds %.3f eval_seconds %.3f",
                          r.timings.train_seconds, r.timings.eval_seconds);
            out << buf << "\n";
            if (!r.parameters_per_task.empty()) {
                out << "  learnable_parameters";
                for (long p : r.parameters_per_task) out << " " << p;
                out << "\n";
            }
            for (const auto& [mode, report] : r.reports) {
                std::string transfer = "-";
                if (report.transfer) {
                    char t[32];
                    std::snprintf(t, sizeof(t), "%.4f", *report.transfer);
                    transfer = t;
                }
                std::snprintf(buf, sizeof(buf),
                              "  %s last %.4f avg %.4f forgetting %.4f transfer %s",
                              mode_name(mode), report.last, report.avg, report.forgetting,
                              transfer.c_str());
                out << buf << "\n";
            }
        }
    }
    return record;
}

std::map<Mode, AccuracyMatrix> run_frozen_baseline(const ExperimentConfig& config) {
    ExperimentConfig cfg = config;
    cfg.methods = {Method::FrozenBaseline};
    return run_experiment(cfg).methods[0].matrices;
}

std::map<Mode, AccuracyMatrix> run_naive_finetune(const ExperimentConfig& config) {
    ExperimentConfig cfg = config;
    cfg.methods = {Method::NaiveFinetune};
    return run_experiment(cfg).methods[0].matrices;
}

void regenerate_reports(const fs::path& run_dir, bool plots) {
    if (!fs::exists(run_dir)) throw ConfigError(run_dir.string() + ": run directory not found");
    bool found = false;
    for (Method method :
         {Method::Coleclip, Method::FrozenBaseline, Method::NaiveFinetune}) {
        const fs::path dir = run_dir / method_name(method);
        if (!fs::exists(dir)) continue;
        std::map<Mode, AccuracyMatrix> matrices;
        std::vector<std::string> names;
        for (Mode mode : {Mode::TIL, Mode::CIL}) {
            const fs::path csv = dir / matrix_csv_name(mode);
            if (!fs::exists(csv)) continue;
            auto [matrix, loaded_names] = load_matrix_csv(csv, mode);
            names = loaded_names;
            if (matrix.fully_populated()) {
                MetricReport report = compute_report(matrix);
                write_report_markdown(report, names, mode,
                                      dir / (std::string("report_") + mode_name(mode) + ".md"));
                std::ofstream txt(dir / (std::string("report_") + mode_name(mode) + ".txt"));
                txt << render_report_text(report, names, mode);
            }
            matrices.emplace(mode, std::move(matrix));
            found = true;
        }
        if (plots && !matrices.empty()) write_dataset_plots(matrices, names, dir / "plots");
    }
    if (!found) throw ConfigError(run_dir.string() + ": no matrix CSV files found");
}

void write_dataset_plots(const std::map<Mode, AccuracyMatrix>& matrices,
                         const std::vector<std::string>& dataset_names, const fs::path& dir) {
    if (matrices.empty()) return;
    fs::create_directories(dir);
    const int total = matrices.begin()->second.total_tasks();
    const double width = 480, height = 320, ml = 48, mr = 16, mt = 24, mb = 36;
    const char* colors[] = {"#1f77b4", "#d62728"};

    for (int t = 1; t <= total; ++t) {
        std::ofstream out(dir / (dataset_names[static_cast<std::size_t>(t - 1)] + ".svg"));
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
            << height << "\">\n";
        out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        out << "<text x=\"" << width / 2 << "\" y=\"16\" text-anchor=\"middle\" font-size=\"13\">"
            << dataset_names[static_cast<std::size_t>(t - 1)] << " accuracy by step</text>\n";
        // axes
        out << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr
            << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
        out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
            << height - mb << "\" stroke=\"black\"/>\n";
        for (int tick = 0; tick <= 4; ++tick) {
            double frac = tick / 4.0;
            double y = height - mb - frac * (height - mt - mb);
            out << "<text x=\"" << ml - 6 << "\" y=\"" << y + 4
                << "\" text-anchor=\"end\" font-size=\"10\">" << static_cast<int>(frac * 100)
                << "</text>\n";
        }
        int color_idx = 0;
        for (const auto& [mode, matrix] : matrices) {
            std::string points;
            for (int i = 1; i <= total; ++i) {
                if (!matrix.filled(t, i)) continue;
                double x = total == 1 ? (ml + width - mr) / 2
                                      : ml + (i - 1) * (width - ml - mr) / (total - 1);
                double y = height - mb - matrix.at(t, i) * (height - mt - mb);
                char buf[64];
                std::snprintf(buf, sizeof(buf), "%.1f,%.1f ", x, y);
                points += buf;
            }
            const char* color = colors[color_idx % 2];
            out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\""
                << points << "\"/>\n";
            out << "<text x=\"" << width - mr - 60 << "\" y=\"" << mt + 14 * (color_idx + 1)
                << "\" font-size=\"11\" fill=\"" << color << "\">" << mode_name(mode)
                << "</text>\n";
            ++color_idx;
        }
        for (int i = 1; i <= total; ++i) {
            double x = total == 1 ? (ml + width - mr) / 2
                                  : ml + (i - 1) * (width - ml - mr) / (total - 1);
            out << "<text x=\"" << x << "\" y=\"" << height - mb + 16
                << "\" text-anchor=\"middle\" font-size=\"10\">" << i << "</text>\n";
        }
        out << "</svg>\n";
    }
}

} // namespace odcl
