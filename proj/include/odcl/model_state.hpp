#ifndef ODCL_MODEL_STATE_HPP
#define ODCL_MODEL_STATE_HPP

#include <map>
#include <string>
#include <vector>

#include "odcl/backbone.hpp"

namespace odcl {

// Everything the method keeps between tasks: the frozen backbone, the prompt
// bank, and the class sets seen so far. Adapters are trained per task and
// dropped from the inference path; the archive exists for checkpoints only.
template <class S>
struct ModelState {
    const Backbone<S>* backbone = nullptr;
    TaskPromptBank<S> bank;
    std::vector<std::vector<std::string>> trained_class_sets; // per trained step
    std::vector<LowRankAdapter<S>> adapter_archive;
    bool prompts_enabled = true;

    int trained_steps() const { return static_cast<int>(trained_class_sets.size()); }

    // step is 1-based; false when prompts are ablated away
    bool has_prompt(int step) const { return step >= 1 && step <= bank.size(); }

    // Memoized frozen text embeddings (single-threaded use).
    const Vec<S>& frozen_embedding(const std::string& name) const {
        auto it = frozen_cache_.find(name);
        if (it == frozen_cache_.end())
            it = frozen_cache_.emplace(name, backbone->frozen_text_embedding(name)).first;
        return it->second;
    }

    // First-seen union of the trained class sets.
    std::vector<std::string> seen_classes() const {
        std::vector<std::string> out;
        for (const auto& set : trained_class_sets)
            for (const auto& name : set)
                if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
        return out;
    }

private:
    mutable std::map<std::string, Vec<S>> frozen_cache_;
};

} // namespace odcl

#endif
