#ifndef ODCL_TRAINER_HPP
#define ODCL_TRAINER_HPP

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "odcl/backbone.hpp"
#include "odcl/model_state.hpp"
#include "odcl/stream.hpp"
#include "odcl/vocab.hpp"

namespace odcl {

struct TrainConfig {
    double alpha = 0.1;         // vocabulary momentum coefficient
    double gamma = 0.7;         // percentile threshold for negative selection
    double tau = 0.01;          // softmax temperature
    double learning_rate = 0.001;
    int batch_size = 32;
    int default_epochs = 150;
    std::map<int, int> epochs_per_task; // per-task overrides
    int rank = 5;
    int prompt_length = 1;
    bool use_vocabulary_update = true;
    bool use_task_prompts = true;
    bool use_negative_selection = true;
    int negative_diff_sign = +1; // sign applied to E(current) - E(previous)
    bool update_all_task_classes = true; // false: only classes present in the batch
    std::vector<Proj> adapter_targets{Proj::Q, Proj::V};
    std::uint64_t seed = 13;

    int epochs_for(int task_index) const;
    void validate() const; // throws ConfigError
};

// E(x) = tau * log sum exp(logit / tau), evaluated as a shifted log-sum-exp.
template <class S>
S energy_score(const std::vector<S>& logits, S tau);

// Nearest-rank percentile: value at index ceil(gamma * n) of the sorted list.
template <class S>
S nearest_rank_percentile(std::vector<S> values, double gamma);

// Iterations 1..boundary are stage 1; the rest stage 2.
long stage_boundary(long total_iterations);

struct NegativeSet {
    std::vector<std::vector<std::string>> per_sample;

    long total() const {
        long n = 0;
        for (const auto& v : per_sample) n += static_cast<long>(v.size());
        return n;
    }
    bool empty() const {
        for (const auto& v : per_sample)
            if (!v.empty()) return false;
        return true;
    }
};

// Per-task logits of one batch. For previous tasks the class list covers only
// classes that do not overlap the current task's set.
template <class S>
struct TaskLogits {
    int task_index = 0;
    std::vector<std::string> class_names;
    Mat<S> logits; // batch x classes
};

// Stage 1 selects nothing. Stage 2 considers only samples misclassified over
// the current task's classes; per previous task, samples whose signed energy
// difference exceeds the batch's gamma-percentile receive that whole task's
// non-overlapping class list as negatives.
template <class S>
NegativeSet select_negative_classes(const TaskLogits<S>& current, const std::vector<int>& labels,
                                    const std::vector<TaskLogits<S>>& previous, double gamma,
                                    int stage, int diff_sign, double tau);

// --- loss ------------------------------------------------------------------

// How class names map to text-side vectors inside the loss.
enum class TextPathMode {
    VocabRefined, // current classes: mean of adapted and stored embedding; negatives: stored value
    AdapterDirect // every class scored against the adapted embedding; no regression term
};

struct LossBreakdown {
    double ce = 0.0;
    double reg = 0.0;
    double total = 0.0;
};

// One sample's contribution to the cross-entropy: negative log softmax at the
// label for both score vectors, each divided by the temperature.
template <class S>
S cross_entropy_pair(const Vec<S>& s_v, const Vec<S>& s_cls, int label, S tau);

template <class S>
struct TrainGrads {
    Mat<S> prompt;             // gradient of the bank's last prompt (empty when prompts are off)
    LowRankAdapter<S> adapter; // same layout as the adapter
};

template <class S>
struct TrainContext {
    const Backbone<S>* backbone = nullptr;
    const TaskPromptBank<S>* bank = nullptr; // last prompt is the trainable one
    const LowRankAdapter<S>* adapter = nullptr;
    const ClassVocabulary<S>* vocab = nullptr; // required in VocabRefined mode
    std::vector<std::string> task_classes;     // current task's class order
    double tau = 0.01;
    TextPathMode mode = TextPathMode::VocabRefined;
    bool use_task_prompts = true;
};

// Cross-entropy over both similarity paths plus the embedding regression term.
// `negatives` may be null; when given, sample i's label space is the task
// classes followed by negatives.per_sample[i].
template <class S>
LossBreakdown compute_losses(const TrainContext<S>& ctx,
                             const std::vector<const ImageSample*>& batch,
                             const NegativeSet* negatives, TrainGrads<S>* grads);

// --- optimizer ----------------------------------------------------------------

template <class S>
class AdamOptimizer {
public:
    explicit AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999,
                           double eps = 1e-8);

    void register_param(Mat<S>* param);
    // grads aligned with registration order
    void step(const std::vector<const Mat<S>*>& grads);

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    struct Slot {
        Mat<S>* param;
        Mat<S> m, v;
    };
    std::vector<Slot> slots_;
};

// --- per-task training -----------------------------------------------------------

struct IterationRecord {
    int task = 0;
    int epoch = 0;
    long iteration = 0; // global within the task, 1-based
    int stage = 1;
    double l_ce = 0, l_reg = 0, loss = 0;
    long negatives = 0;
};

class TrainLogWriter {
public:
    explicit TrainLogWriter(const std::filesystem::path& path);
    void append(const IterationRecord& rec);

private:
    std::ofstream out_;
};

template <class S>
struct TaskTrainResult {
    TaskPrompt<S> prompt; // zero-row matrix when prompts are disabled
    LowRankAdapter<S> adapter;
    long iterations = 0;
    long learnable_parameters = 0;
};

// Trains the next task in sequence: fresh prompt + adapter, mini-batch Adam at
// a constant rate, post-step momentum updates of the task's vocabulary
// entries. The adapter is archived on the state but not used at inference.
template <class S>
TaskTrainResult<S> train_task(const TaskSpec& task, ModelState<S>& state,
                              ClassVocabulary<S>& vocab, const TrainConfig& cfg,
                              TrainLogWriter* log);

} // namespace odcl

#endif
