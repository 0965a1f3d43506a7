#ifndef ODCL_VOCAB_HPP
#define ODCL_VOCAB_HPP

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "odcl/backbone.hpp"
#include "odcl/errors.hpp"

namespace odcl {

template <class S>
struct VocabEntry {
    Vec<S> embedding;
    int first_task = 0;         // task that introduced the name
    std::set<int> source_tasks; // every task the class appeared in
};

// Persistent class-name -> embedding store shared across tasks. New names are
// seeded from the frozen text encoder; later tasks refine the same value via
// momentum updates, which is the only mutation path.
template <class S>
class ClassVocabulary {
public:
    using EncoderFn = std::function<Vec<S>(const std::string&)>;

    explicit ClassVocabulary(S alpha);

    S alpha() const { return alpha_; }
    int size() const { return static_cast<int>(entries_.size()); }

    // Inserts missing names with encoder(name); existing embeddings stay
    // untouched, their source task set gains task_index. Returns #inserted.
    int ensure_entries(const std::vector<std::string>& names, const EncoderFn& encoder,
                       int task_index);

    // V <- alpha * w + (1 - alpha) * V; returns the stored value.
    const Vec<S>& momentum_update(const std::string& name, const Vec<S>& w);

    std::optional<Vec<S>> lookup(const std::string& name) const;
    const VocabEntry<S>* entry(const std::string& name) const;

    const std::map<std::string, VocabEntry<S>>& entries() const { return entries_; }

    void save(const std::filesystem::path& path) const;
    static ClassVocabulary<S> load(const std::filesystem::path& path);

    bool operator==(const ClassVocabulary<S>& other) const;

private:
    std::map<std::string, VocabEntry<S>> entries_;
    S alpha_;
};

} // namespace odcl

#endif
