#include "odcl/inference.hpp"

#include <algorithm>
#include <set>

#include "odcl/textio.hpp"

namespace odcl {

template <class S>
std::pair<S, int> class_logit(const VisualOutput<S>& visual, const std::string& name,
                              const ClassVocabulary<S>& vocab, const ModelState<S>& state) {
    if (name.empty()) throw InputError("class_logit: empty class name");
    const VocabEntry<S>* entry = vocab.entry(name);
    if (!entry) {
        S score = cosine_score(visual.cls_output, state.frozen_embedding(name));
        return {score, kFrozenProvenance};
    }
    S best = std::numeric_limits<S>::lowest();
    int best_task = kFrozenProvenance;
    for (int j : entry->source_tasks) {
        Vec<S> fused =
            state.has_prompt(j) && j <= static_cast<int>(visual.prompt_outputs.size())
                ? fuse_visual(visual.prompt_outputs[static_cast<std::size_t>(j - 1)],
                              visual.cls_output)
                : visual.cls_output;
        S score = cosine_score(fused, entry->embedding);
        if (score > best) {
            best = score;
            best_task = j;
        }
    }
    return {best, best_task};
}

namespace {

template <class S>
ClassLogitTable<S> score_candidates(const VisualOutput<S>& visual,
                                    const std::vector<std::string>& candidates,
                                    const ClassVocabulary<S>& vocab,
                                    const ModelState<S>& state) {
    ClassLogitTable<S> table;
    table.entries.reserve(candidates.size());
    for (const auto& name : candidates) {
        auto [logit, task] = class_logit(visual, name, vocab, state);
        table.entries.push_back({name, logit, task});
    }
    return table;
}

// First candidate wins ties.
template <class S>
std::size_t argmax_entry(const ClassLogitTable<S>& table) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < table.entries.size(); ++i)
        if (table.entries[i].logit > table.entries[best].logit) best = i;
    return best;
}

template <class S>
std::vector<std::tuple<std::string, double, int>> top_entries(const ClassLogitTable<S>& table,
                                                              std::size_t count) {
    std::vector<std::size_t> idx(table.entries.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return table.entries[a].logit > table.entries[b].logit;
    });
    std::vector<std::tuple<std::string, double, int>> out;
    for (std::size_t i = 0; i < std::min(count, idx.size()); ++i) {
        const auto& e = table.entries[idx[i]];
        out.emplace_back(e.name, static_cast<double>(e.logit), e.provenance_task);
    }
    return out;
}

} // namespace

template <class S>
Prediction<S> predict(const PredictionRequest<S>& request, const ModelState<S>& state,
                      const ClassVocabulary<S>& vocab) {
    if (!request.image) throw InputError("predict: missing image");
    if (request.candidates.empty()) throw InputError("predict: empty candidate list");
    std::set<std::string> unique(request.candidates.begin(), request.candidates.end());
    if (unique.size() != request.candidates.size())
        throw InputError("predict: duplicate candidate names");
    if (request.mode == Mode::TIL) {
        if (!request.task_id) throw RoutingError("predict: TIL request without a task id");
        if (*request.task_id < 1 || *request.task_id > state.trained_steps())
            throw RoutingError("predict: TIL task id " + std::to_string(*request.task_id) +
                               " outside the trained range 1.." +
                               std::to_string(state.trained_steps()));
    } else if (request.task_id) {
        throw InputError("predict: task id is only valid for TIL requests");
    }

    VisualOutput<S> visual = state.backbone->encode_image(*request.image, state.bank);
    Prediction<S> out;
    out.table = score_candidates(visual, request.candidates, vocab, state);
    out.label = out.table.entries[argmax_entry(out.table)].name;
    return out;
}

PredictionLogWriter::PredictionLogWriter(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::app);
    if (!out_) throw ParseError(path.string() + ": cannot open prediction log");
}

void PredictionLogWriter::append(int step, int dataset, Mode mode, const std::string& true_label,
                                 const std::string& predicted,
                                 const std::vector<std::tuple<std::string, double, int>>& top) {
    out_ << "step=" << step << " dataset=" << dataset << " mode=" << mode_name(mode)
         << " true=" << true_label << " pred=" << predicted << " top=";
    for (std::size_t i = 0; i < top.size(); ++i) {
        const auto& [name, logit, task] = top[i];
        if (i) out_ << ";";
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%.9g", logit);
        out_ << name << ":" << buf << ":";
        if (task == kFrozenProvenance)
            out_ << "f";
        else
            out_ << "v" << task;
    }
    out_ << "\n";
}

template <class S>
double evaluate_dataset(const TaskSpec& task, Mode mode, int step, const ModelState<S>& state,
                        const ClassVocabulary<S>& vocab, PredictionLogWriter* log) {
    if (task.test_samples.empty())
        throw InputError("evaluate_dataset: task " + std::to_string(task.task_index) +
                         " has no test samples");

    std::vector<std::string> candidates;
    if (mode == Mode::TIL) {
        candidates = task.class_set;
    } else {
        candidates = state.seen_classes();
        for (const auto& name : task.class_set)
            if (std::find(candidates.begin(), candidates.end(), name) == candidates.end())
                candidates.push_back(name);
    }

    long correct = 0;
    for (const auto& sample : task.test_samples) {
        VisualOutput<S> visual = state.backbone->encode_image(sample, state.bank);
        ClassLogitTable<S> table = score_candidates(visual, candidates, vocab, state);
        const std::string& predicted = table.entries[argmax_entry(table)].name;
        if (predicted == sample.label) ++correct;
        if (log)
            log->append(step, task.task_index, mode, sample.label, predicted,
                        top_entries(table, 3));
    }
    return static_cast<double>(correct) / static_cast<double>(task.test_samples.size());
}

#define ODCL_INSTANTIATE(S)                                                                     \
    template std::pair<S, int> class_logit<S>(const VisualOutput<S>&, const std::string&,       \
                                              const ClassVocabulary<S>&, const ModelState<S>&); \
    template Prediction<S> predict<S>(const PredictionRequest<S>&, const ModelState<S>&,        \
                                      const ClassVocabulary<S>&);                               \
    template double evaluate_dataset<S>(const TaskSpec&, Mode, int, const ModelState<S>&,       \
                                        const ClassVocabulary<S>&, PredictionLogWriter*);

ODCL_INSTANTIATE(float)
ODCL_INSTANTIATE(double)

#undef ODCL_INSTANTIATE

} // namespace odcl
