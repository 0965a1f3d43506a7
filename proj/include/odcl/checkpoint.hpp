#ifndef ODCL_CHECKPOINT_HPP
#define ODCL_CHECKPOINT_HPP

#include <filesystem>
#include <vector>

#include "odcl/backbone.hpp"
#include "odcl/model_state.hpp"

namespace odcl {

// Experiment checkpoint: backbone seed/config, every task prompt and adapter,
// and the dataset index trained at each step. Float payload is either decimal
// text (9 significant digits for 32-bit scalars) or raw little-endian 32-bit
// binary, selected by `binary`.
template <class S>
struct CheckpointData {
    BackboneConfig backbone;
    ImageShape shape;
    std::vector<int> step_datasets; // dataset index trained at step 1..k
    bool prompts_enabled = true;
    TaskPromptBank<S> bank;
    std::vector<LowRankAdapter<S>> adapters;
};

template <class S>
void save_checkpoint(const std::filesystem::path& path, const CheckpointData<S>& data,
                     bool binary);

template <class S>
CheckpointData<S> load_checkpoint(const std::filesystem::path& path);

} // namespace odcl

#endif
