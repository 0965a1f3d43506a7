#ifndef ODCL_INFERENCE_HPP
#define ODCL_INFERENCE_HPP

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "odcl/mode.hpp"
#include "odcl/model_state.hpp"
#include "odcl/stream.hpp"
#include "odcl/vocab.hpp"

namespace odcl {

constexpr int kFrozenProvenance = -1;

template <class S>
struct ScoredClass {
    std::string name;
    S logit = S(0);
    int provenance_task = kFrozenProvenance; // task whose prompt won the max, or frozen path
};

template <class S>
struct ClassLogitTable {
    std::vector<ScoredClass<S>> entries; // one per candidate, in candidate order
};

// Vocabulary hit: max over the class's source tasks of
// cos(fuse(prompt_output_j, cls), stored embedding). Miss: cosine between the
// frozen class-token embedding and the frozen text embedding.
template <class S>
std::pair<S, int> class_logit(const VisualOutput<S>& visual, const std::string& name,
                              const ClassVocabulary<S>& vocab, const ModelState<S>& state);

template <class S>
struct PredictionRequest {
    const ImageSample* image = nullptr;
    Mode mode = Mode::CIL;
    std::optional<int> task_id; // required iff TIL
    std::vector<std::string> candidates;
};

template <class S>
struct Prediction {
    std::string label;
    ClassLogitTable<S> table;
};

// Scores every candidate and returns the argmax (first candidate wins ties).
// TIL requests must reference a trained task.
template <class S>
Prediction<S> predict(const PredictionRequest<S>& request, const ModelState<S>& state,
                      const ClassVocabulary<S>& vocab);

class PredictionLogWriter {
public:
    explicit PredictionLogWriter(const std::filesystem::path& path);

    // top entries rendered as name:logit:provenance, best three
    void append(int step, int dataset, Mode mode, const std::string& true_label,
                const std::string& predicted,
                const std::vector<std::tuple<std::string, double, int>>& top);

private:
    std::ofstream out_;
};

// Accuracy of one task's test set at a given training step. TIL candidates
// are the task's classes; CIL candidates are all seen classes with the task's
// unseen names appended, so future datasets evaluate zero-shot.
template <class S>
double evaluate_dataset(const TaskSpec& task, Mode mode, int step, const ModelState<S>& state,
                        const ClassVocabulary<S>& vocab, PredictionLogWriter* log);

} // namespace odcl

#endif
