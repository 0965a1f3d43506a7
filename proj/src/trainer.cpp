#include "odcl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "odcl/rng.hpp"
#include "odcl/textio.hpp"

namespace odcl {

int TrainConfig::epochs_for(int task_index) const {
    auto it = epochs_per_task.find(task_index);
    return it == epochs_per_task.end() ? default_epochs : it->second;
}

void TrainConfig::validate() const {
    if (!(tau > 0.0)) throw ConfigError("train: tau must be > 0");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("train: gamma must lie in (0,1]");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("train: alpha must lie in [0,1]");
    if (learning_rate <= 0.0) throw ConfigError("train: learning_rate must be > 0");
    if (default_epochs < 1) throw ConfigError("train: epochs must be >= 1");
    for (const auto& [task, epochs] : epochs_per_task)
        if (task < 1 || epochs < 1)
            throw ConfigError("train: bad per-task epoch override for task " +
                              std::to_string(task));
    if (rank < 1) throw ConfigError("train: rank must be >= 1");
    if (prompt_length < 1) throw ConfigError("train: prompt_length must be >= 1");
    if (negative_diff_sign != 1 && negative_diff_sign != -1)
        throw ConfigError("train: negative_diff_sign must be +1 or -1");
    if (adapter_targets.empty()) throw ConfigError("train: adapter_targets must be non-empty");
}

template <class S>
S energy_score(const std::vector<S>& logits, S tau) {
    if (logits.empty()) throw InputError("energy_score: empty class set");
    S m = *std::max_element(logits.begin(), logits.end());
    S sum = S(0);
    for (S s : logits) sum += std::exp((s - m) / tau);
    return m + tau * std::log(sum);
}

template <class S>
S nearest_rank_percentile(std::vector<S> values, double gamma) {
    if (values.empty()) throw InputError("percentile of an empty list");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw InputError("percentile: gamma must lie in (0,1]");
    std::sort(values.begin(), values.end());
    const auto n = static_cast<long>(values.size());
    // - epsilon so an exactly-integral gamma*n is not pushed up a rank
    long rank = static_cast<long>(std::ceil(gamma * static_cast<double>(n) - 1e-9));
    rank = std::clamp(rank, 1L, n);
    return values[static_cast<std::size_t>(rank - 1)];
}

long stage_boundary(long total_iterations) {
    if (total_iterations < 1) throw InputError("stage_boundary: need at least one iteration");
    return (total_iterations + 1) / 2;
}

template <class S>
NegativeSet select_negative_classes(const TaskLogits<S>& current, const std::vector<int>& labels,
                                    const std::vector<TaskLogits<S>>& previous, double gamma,
                                    int stage, int diff_sign, double tau) {
    if (stage != 1 && stage != 2) throw InputError("select_negative_classes: stage must be 1 or 2");
    if (diff_sign != 1 && diff_sign != -1)
        throw InputError("select_negative_classes: diff_sign must be +1 or -1");
    const auto batch = static_cast<std::size_t>(current.logits.rows());
    if (labels.size() != batch)
        throw InputError("select_negative_classes: labels do not match the batch");

    NegativeSet out;
    out.per_sample.resize(batch);
    if (stage == 1 || previous.empty()) return out;

    std::vector<std::size_t> eligible;
    std::vector<S> e_cur;
    for (std::size_t i = 0; i < batch; ++i) {
        Eigen::Index pred = 0;
        current.logits.row(static_cast<Eigen::Index>(i)).maxCoeff(&pred);
        if (static_cast<int>(pred) == labels[i]) continue; // correctly classified
        eligible.push_back(i);
        std::vector<S> row(current.logits.cols());
        for (Eigen::Index j = 0; j < current.logits.cols(); ++j)
            row[static_cast<std::size_t>(j)] = current.logits(static_cast<Eigen::Index>(i), j);
        e_cur.push_back(energy_score(row, static_cast<S>(tau)));
    }
    if (eligible.empty()) return out;

    for (const auto& prev : previous) {
        if (prev.class_names.empty()) continue;
        std::vector<S> diffs(eligible.size());
        for (std::size_t k = 0; k < eligible.size(); ++k) {
            std::vector<S> row(prev.logits.cols());
            for (Eigen::Index j = 0; j < prev.logits.cols(); ++j)
                row[static_cast<std::size_t>(j)] =
                    prev.logits(static_cast<Eigen::Index>(eligible[k]), j);
            S e_prev = energy_score(row, static_cast<S>(tau));
            diffs[k] = static_cast<S>(diff_sign) * (e_cur[k] - e_prev);
        }
        S threshold = nearest_rank_percentile(diffs, gamma);
        for (std::size_t k = 0; k < eligible.size(); ++k) {
            if (!(diffs[k] > threshold)) continue;
            auto& dest = out.per_sample[eligible[k]];
            for (const auto& name : prev.class_names)
                if (std::find(dest.begin(), dest.end(), name) == dest.end())
                    dest.push_back(name);
        }
    }
    return out;
}

// --- loss --------------------------------------------------------------------

namespace {

template <class S>
S cross_entropy_at(const Vec<S>& scores, int label, S tau) {
    Vec<S> logits = scores / tau;
    S m = logits.maxCoeff();
    S lse = m + std::log((logits.array() - m).exp().sum());
    return lse - logits(label);
}

template <class S>
Vec<S> softmax_of(const Vec<S>& scores, S tau) {
    Vec<S> logits = scores / tau;
    S m = logits.maxCoeff();
    Vec<S> e = (logits.array() - m).exp();
    return e / e.sum();
}

} // namespace

template <class S>
S cross_entropy_pair(const Vec<S>& s_v, const Vec<S>& s_cls, int label, S tau) {
    if (s_v.size() != s_cls.size() || s_v.size() == 0)
        throw InputError("cross_entropy_pair: bad score vectors");
    if (label < 0 || label >= s_v.size()) throw InputError("cross_entropy_pair: bad label index");
    return cross_entropy_at(s_v, label, tau) + cross_entropy_at(s_cls, label, tau);
}

template <class S>
LossBreakdown compute_losses(const TrainContext<S>& ctx,
                             const std::vector<const ImageSample*>& batch,
                             const NegativeSet* negatives, TrainGrads<S>* grads) {
    if (!ctx.backbone || !ctx.adapter) throw InputError("compute_losses: missing model state");
    if (batch.empty()) throw InputError("compute_losses: empty batch");
    if (ctx.task_classes.empty()) throw InputError("compute_losses: empty task class set");
    if (ctx.mode == TextPathMode::VocabRefined && !ctx.vocab)
        throw InputError("compute_losses: vocabulary required in refined mode");
    if (negatives && negatives->per_sample.size() != batch.size())
        throw InputError("compute_losses: negative set does not match the batch");
    if (negatives && ctx.mode == TextPathMode::AdapterDirect && !negatives->empty())
        throw InputError("compute_losses: negatives require the vocabulary path");

    const int c_count = static_cast<int>(ctx.task_classes.size());
    const int b_count = static_cast<int>(batch.size());
    const S tau = static_cast<S>(ctx.tau);
    const int dim = ctx.backbone->embed_dim();
    const bool prompts = ctx.use_task_prompts && ctx.bank && ctx.bank->size() > 0;

    if (grads) {
        if (prompts)
            grads->prompt = Mat<S>::Zero(ctx.bank->prompts.back().rows(), dim);
        else
            grads->prompt = Mat<S>();
        grads->adapter = ctx.adapter->zeros_like();
    }

    // text side: one forward per current-task class
    std::vector<EncoderTrace<S>> text_traces(grads ? c_count : 0);
    std::vector<Vec<S>> adapted(c_count), refined(c_count), stored(c_count);
    for (int c = 0; c < c_count; ++c) {
        const std::string& name = ctx.task_classes[c];
        adapted[c] = ctx.backbone->adapted_text_embedding(name, *ctx.adapter,
                                                          grads ? &text_traces[c] : nullptr);
        if (ctx.mode == TextPathMode::VocabRefined) {
            const VocabEntry<S>* entry = ctx.vocab->entry(name);
            if (!entry)
                throw MissingEntryError("compute_losses: class '" + name +
                                        "' missing from the vocabulary");
            stored[c] = entry->embedding;
            refined[c] = refine_embedding(adapted[c], stored[c]);
        } else {
            refined[c] = adapted[c];
        }
    }

    std::vector<Vec<S>> d_refined;
    if (grads) d_refined.assign(c_count, Vec<S>::Zero(dim));
    Vec<S> scratch = Vec<S>::Zero(dim); // gradient sink for constant negative embeddings

    const TaskPromptBank<S> empty_bank;
    double ce_sum = 0.0;
    for (int i = 0; i < b_count; ++i) {
        const ImageSample& img = *batch[i];
        auto label_it = std::find(ctx.task_classes.begin(), ctx.task_classes.end(), img.label);
        if (label_it == ctx.task_classes.end())
            throw InputError("compute_losses: label '" + img.label +
                             "' missing from the local class space");
        const int label = static_cast<int>(label_it - ctx.task_classes.begin());

        EncoderTrace<S> vtrace;
        VisualOutput<S> vis =
            prompts ? ctx.backbone->encode_image(img, *ctx.bank, grads ? &vtrace : nullptr)
                    : ctx.backbone->encode_image(img, empty_bank, nullptr);
        const Vec<S>& cls = vis.cls_output;
        Vec<S> fused = prompts ? fuse_visual(vis.prompt_outputs.back(), cls) : cls;

        // local class space: task classes, then this sample's negatives
        std::vector<const Vec<S>*> text_vecs;
        text_vecs.reserve(static_cast<std::size_t>(c_count));
        for (int c = 0; c < c_count; ++c) text_vecs.push_back(&refined[c]);
        if (negatives) {
            for (const auto& name : negatives->per_sample[static_cast<std::size_t>(i)]) {
                const VocabEntry<S>* entry = ctx.vocab->entry(name);
                if (!entry)
                    throw MissingEntryError("compute_losses: negative class '" + name +
                                            "' missing from the vocabulary");
                text_vecs.push_back(&entry->embedding);
            }
        }
        const int local = static_cast<int>(text_vecs.size());

        Vec<S> s_v(local), s_cls(local);
        for (int j = 0; j < local; ++j) {
            s_v(j) = cosine_score(fused, *text_vecs[j]);
            s_cls(j) = cosine_score(cls, *text_vecs[j]);
        }
        ce_sum += static_cast<double>(cross_entropy_pair(s_v, s_cls, label, tau));

        if (!grads) continue;

        Vec<S> p_v = softmax_of(s_v, tau);
        Vec<S> p_cls = softmax_of(s_cls, tau);
        Vec<S> d_fused = Vec<S>::Zero(dim);
        Vec<S> d_cls = Vec<S>::Zero(dim);
        const S norm = S(1) / (static_cast<S>(b_count) * tau);
        for (int j = 0; j < local; ++j) {
            S coef_v = (p_v(j) - (j == label ? S(1) : S(0))) * norm;
            S coef_c = (p_cls(j) - (j == label ? S(1) : S(0))) * norm;
            Vec<S>& text_sink = j < c_count ? d_refined[static_cast<std::size_t>(j)] : scratch;
            cosine_score_grad(fused, *text_vecs[j], coef_v, d_fused, text_sink);
            cosine_score_grad(cls, *text_vecs[j], coef_c, d_cls, text_sink);
        }

        if (prompts) {
            // fused = (pooled prompt + cls) / 2; pooled = mean over the prompt's rows
            const int rows = ctx.bank->total_rows();
            const int p_rows = ctx.bank->prompts.back().rows();
            const int offset = ctx.bank->row_offset(ctx.bank->size() - 1);
            Mat<S> d_out = Mat<S>::Zero(rows + 1 + ctx.backbone->patch_count(), dim);
            for (int r = 0; r < p_rows; ++r)
                d_out.row(offset + r) =
                    (d_fused * (S(0.5) / static_cast<S>(p_rows))).transpose();
            d_out.row(rows) = (d_cls + d_fused * S(0.5)).transpose();
            Mat<S> d_z0 = ctx.backbone->image_input_grad(vtrace, d_out);
            grads->prompt += d_z0.middleRows(offset, p_rows);
        }
        // without prompts the visual path has no trainable parameters
    }

    LossBreakdown out;
    out.ce = ce_sum / b_count;
    if (ctx.mode == TextPathMode::VocabRefined) {
        double reg = 0.0;
        for (int c = 0; c < c_count; ++c) {
            Vec<S> diff = refined[c] - stored[c];
            reg += static_cast<double>(diff.squaredNorm());
            if (grads)
                d_refined[static_cast<std::size_t>(c)] +=
                    diff * (S(2) / static_cast<S>(c_count));
        }
        out.reg = reg / c_count;
    }
    out.total = out.ce + out.reg;

    if (grads) {
        const S chain = ctx.mode == TextPathMode::VocabRefined ? S(0.5) : S(1);
        for (int c = 0; c < c_count; ++c) {
            Vec<S> d_adapted = d_refined[static_cast<std::size_t>(c)] * chain;
            ctx.backbone->text_adapter_grad(text_traces[static_cast<std::size_t>(c)],
                                            *ctx.adapter, d_adapted, grads->adapter);
        }
    }
    return out;
}

// --- optimizer ------------------------------------------------------------------

template <class S>
AdamOptimizer<S>::AdamOptimizer(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

template <class S>
void AdamOptimizer<S>::register_param(Mat<S>* param) {
    Slot slot;
    slot.param = param;
    slot.m = Mat<S>::Zero(param->rows(), param->cols());
    slot.v = Mat<S>::Zero(param->rows(), param->cols());
    slots_.push_back(std::move(slot));
}

template <class S>
void AdamOptimizer<S>::step(const std::vector<const Mat<S>*>& grads) {
    if (grads.size() != slots_.size())
        throw InputError("optimizer: gradient list does not match registered parameters");
    ++t_;
    const S b1 = static_cast<S>(beta1_);
    const S b2 = static_cast<S>(beta2_);
    const S corr1 = S(1) - static_cast<S>(std::pow(beta1_, t_));
    const S corr2 = S(1) - static_cast<S>(std::pow(beta2_, t_));
    const S lr = static_cast<S>(lr_);
    const S eps = static_cast<S>(eps_);
    for (std::size_t k = 0; k < slots_.size(); ++k) {
        Slot& slot = slots_[k];
        const Mat<S>& g = *grads[k];
        slot.m = b1 * slot.m + (S(1) - b1) * g;
        slot.v = (b2 * slot.v.array() + (S(1) - b2) * g.array().square()).matrix();
        *slot.param -=
            (lr * (slot.m.array() / corr1) / ((slot.v.array() / corr2).sqrt() + eps)).matrix();
    }
}

// --- per-task training --------------------------------------------------------------

TrainLogWriter::TrainLogWriter(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::app);
    if (!out_) throw ParseError(path.string() + ": cannot open training log");
}

void TrainLogWriter::append(const IterationRecord& rec) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "task=%d epoch=%d iter=%ld stage=%d l_ce=%.9g l_reg=%.9g loss=%.9g negatives=%ld",
                  rec.task, rec.epoch, rec.iteration, rec.stage, rec.l_ce, rec.l_reg, rec.loss,
                  rec.negatives);
    out_ << buf << "\n";
    out_.flush();
}

namespace {

// Gradient views aligned with optimizer registration order.
template <class S>
std::vector<const Mat<S>*> gradient_list(const TrainGrads<S>& grads, bool prompts) {
    std::vector<const Mat<S>*> out;
    if (prompts) out.push_back(&grads.prompt);
    for (const auto& layer : grads.adapter.layers)
        for (const auto& delta : layer.deltas)
            if (delta) {
                out.push_back(&delta->down);
                out.push_back(&delta->up);
            }
    return out;
}

template <class S>
std::vector<Mat<S>*> parameter_list(TaskPromptBank<S>* bank, LowRankAdapter<S>& adapter,
                                    bool prompts) {
    std::vector<Mat<S>*> out;
    if (prompts) out.push_back(&bank->prompts.back().vectors);
    for (auto& layer : adapter.layers)
        for (auto& delta : layer.deltas)
            if (delta) {
                out.push_back(&delta->down);
                out.push_back(&delta->up);
            }
    return out;
}

} // namespace

template <class S>
TaskTrainResult<S> train_task(const TaskSpec& task, ModelState<S>& state,
                              ClassVocabulary<S>& vocab, const TrainConfig& cfg,
                              TrainLogWriter* log) {
    cfg.validate();
    if (!state.backbone) throw InputError("train_task: model state has no backbone");
    if (task.class_set.empty()) throw InputError("train_task: task has no classes");
    if (task.train_samples.empty()) throw InputError("train_task: task has no training samples");

    const Backbone<S>& backbone = *state.backbone;
    const int t = state.trained_steps() + 1;
    const int dim = backbone.embed_dim();

    vocab.ensure_entries(task.class_set,
                         [&](const std::string& name) { return state.frozen_embedding(name); },
                         t);

    state.prompts_enabled = cfg.use_task_prompts;
    if (cfg.use_task_prompts) {
        for (auto& p : state.bank.prompts) p.frozen = true;
        state.bank.prompts.push_back(
            init_task_prompt<S>(t, cfg.prompt_length, dim, cfg.seed));
    }
    LowRankAdapter<S> adapter = init_adapter<S>(t, cfg.rank, cfg.adapter_targets,
                                                backbone.config().num_layers, dim, cfg.seed);

    AdamOptimizer<S> optimizer(cfg.learning_rate);
    for (Mat<S>* p : parameter_list(&state.bank, adapter, cfg.use_task_prompts))
        optimizer.register_param(p);

    TrainContext<S> ctx;
    ctx.backbone = &backbone;
    ctx.bank = &state.bank;
    ctx.adapter = &adapter;
    ctx.vocab = &vocab;
    ctx.task_classes = task.class_set;
    ctx.tau = cfg.tau;
    ctx.mode = TextPathMode::VocabRefined;
    ctx.use_task_prompts = cfg.use_task_prompts;

    const long samples = static_cast<long>(task.train_samples.size());
    const long iters_per_epoch = (samples + cfg.batch_size - 1) / cfg.batch_size;
    const int epochs = cfg.epochs_for(t);
    const long total_iterations = iters_per_epoch * epochs;
    const long boundary = stage_boundary(total_iterations);

    std::vector<std::size_t> order(static_cast<std::size_t>(samples));
    std::iota(order.begin(), order.end(), 0u);

    auto refined_of = [&](const std::string& name) {
        Vec<S> g = backbone.adapted_text_embedding(name, adapter);
        return refine_embedding<S>(g, vocab.entry(name)->embedding);
    };

    long iteration = 0;
    TrainGrads<S> grads;
    for (int epoch = 1; epoch <= epochs; ++epoch) {
        Rng shuffle_rng(mix_seed(mix_seed(mix_seed(cfg.seed, 0x5fu), t), epoch));
        shuffle_rng.shuffle(order.begin(), order.end());

        for (long b = 0; b < iters_per_epoch; ++b) {
            ++iteration;
            const int stage = iteration <= boundary ? 1 : 2;

            std::vector<const ImageSample*> batch;
            for (long k = b * cfg.batch_size; k < std::min(samples, (b + 1) * cfg.batch_size); ++k)
                batch.push_back(&task.train_samples[order[static_cast<std::size_t>(k)]]);

            // stage-2 expansion of the local class space
            NegativeSet negatives;
            negatives.per_sample.resize(batch.size());
            if (stage == 2 && cfg.use_negative_selection && t > 1) {
                const int c_count = static_cast<int>(task.class_set.size());
                std::vector<Vec<S>> w_cur(static_cast<std::size_t>(c_count));
                for (int c = 0; c < c_count; ++c) w_cur[c] = refined_of(task.class_set[c]);

                TaskLogits<S> current;
                current.task_index = t;
                current.class_names = task.class_set;
                current.logits.resize(static_cast<Eigen::Index>(batch.size()), c_count);
                std::vector<int> labels(batch.size());

                std::vector<Vec<S>> views(batch.size());
                for (std::size_t i = 0; i < batch.size(); ++i) {
                    VisualOutput<S> vis = backbone.encode_image(*batch[i], state.bank);
                    views[i] = cfg.use_task_prompts && state.bank.size() > 0
                                   ? fuse_visual(vis.prompt_outputs.back(), vis.cls_output)
                                   : vis.cls_output;
                    for (int c = 0; c < c_count; ++c)
                        current.logits(static_cast<Eigen::Index>(i), c) =
                            cosine_score(views[i], w_cur[c]);
                    labels[i] = static_cast<int>(
                        std::find(task.class_set.begin(), task.class_set.end(), batch[i]->label) -
                        task.class_set.begin());
                }

                std::vector<TaskLogits<S>> previous;
                for (int j = 1; j < t; ++j) {
                    TaskLogits<S> prev;
                    prev.task_index = j;
                    for (const auto& name : state.trained_class_sets[j - 1])
                        if (std::find(task.class_set.begin(), task.class_set.end(), name) ==
                            task.class_set.end())
                            prev.class_names.push_back(name);
                    prev.logits.resize(static_cast<Eigen::Index>(batch.size()),
                                       static_cast<Eigen::Index>(prev.class_names.size()));
                    for (std::size_t i = 0; i < batch.size(); ++i)
                        for (std::size_t c = 0; c < prev.class_names.size(); ++c)
                            prev.logits(static_cast<Eigen::Index>(i),
                                        static_cast<Eigen::Index>(c)) =
                                cosine_score(views[i],
                                             vocab.entry(prev.class_names[c])->embedding);
                    previous.push_back(std::move(prev));
                }
                negatives = select_negative_classes(current, labels, previous, cfg.gamma, stage,
                                                    cfg.negative_diff_sign, cfg.tau);
            }

            LossBreakdown loss = compute_losses(ctx, batch, &negatives, &grads);
            if (!std::isfinite(loss.total))
                throw DivergenceError("task " + std::to_string(t) + " iteration " +
                                      std::to_string(iteration) + ": loss diverged");
            optimizer.step(gradient_list(grads, cfg.use_task_prompts));

            if (cfg.use_vocabulary_update) {
                if (cfg.update_all_task_classes) {
                    for (const auto& name : task.class_set)
                        vocab.momentum_update(name, refined_of(name));
                } else {
                    for (const auto& name : task.class_set) {
                        bool in_batch = std::any_of(batch.begin(), batch.end(),
                                                    [&](const ImageSample* s) {
                                                        return s->label == name;
                                                    });
                        if (in_batch) vocab.momentum_update(name, refined_of(name));
                    }
                }
            }

            if (log) {
                IterationRecord rec;
                rec.task = t;
                rec.epoch = epoch;
                rec.iteration = iteration;
                rec.stage = stage;
                rec.l_ce = loss.ce;
                rec.l_reg = loss.reg;
                rec.loss = loss.total;
                rec.negatives = negatives.total();
                log->append(rec);
            }
        }
    }

    if (cfg.use_task_prompts) state.bank.prompts.back().frozen = true;
    state.trained_class_sets.push_back(task.class_set);
    state.adapter_archive.push_back(adapter);

    TaskTrainResult<S> result;
    result.prompt = cfg.use_task_prompts ? state.bank.prompts.back() : TaskPrompt<S>{t, {},
                                                                                     true};
    result.adapter = std::move(adapter);
    result.iterations = iteration;
    result.learnable_parameters =
        count_learnable_parameters(state.bank, state.adapter_archive.back());
    return result;
}

// --- explicit instantiations ------------------------------------------------------

#define ODCL_INSTANTIATE(S)                                                                      \
    template S energy_score<S>(const std::vector<S>&, S);                                        \
    template S cross_entropy_pair<S>(const Vec<S>&, const Vec<S>&, int, S);                      \
    template S nearest_rank_percentile<S>(std::vector<S>, double);                               \
    template NegativeSet select_negative_classes<S>(const TaskLogits<S>&, const std::vector<int>&, \
                                                    const std::vector<TaskLogits<S>>&, double,   \
                                                    int, int, double);                           \
    template LossBreakdown compute_losses<S>(const TrainContext<S>&,                             \
                                             const std::vector<const ImageSample*>&,             \
                                             const NegativeSet*, TrainGrads<S>*);                \
    template class AdamOptimizer<S>;                                                             \
    template TaskTrainResult<S> train_task<S>(const TaskSpec&, ModelState<S>&,                   \
                                              ClassVocabulary<S>&, const TrainConfig&,           \
                                              TrainLogWriter*);

ODCL_INSTANTIATE(float)
ODCL_INSTANTIATE(double)

#undef ODCL_INSTANTIATE

} // namespace odcl
