#include "odcl/vocab.hpp"

#include <cmath>
#include <fstream>

#include "odcl/textio.hpp"

namespace odcl {

template <class S>
ClassVocabulary<S>::ClassVocabulary(S alpha) : alpha_(alpha) {
    if (!(alpha >= S(0) && alpha <= S(1)))
        throw ConfigError("vocabulary: alpha must lie in [0,1]");
}

template <class S>
int ClassVocabulary<S>::ensure_entries(const std::vector<std::string>& names,
                                       const EncoderFn& encoder, int task_index) {
    int added = 0;
    for (const auto& name : names) {
        auto it = entries_.find(name);
        if (it == entries_.end()) {
            VocabEntry<S> entry;
            entry.embedding = encoder(name);
            entry.first_task = task_index;
            entry.source_tasks.insert(task_index);
            entries_.emplace(name, std::move(entry));
            ++added;
        } else {
            it->second.source_tasks.insert(task_index);
        }
    }
    return added;
}

template <class S>
const Vec<S>& ClassVocabulary<S>::momentum_update(const std::string& name, const Vec<S>& w) {
    auto it = entries_.find(name);
    if (it == entries_.end())
        throw MissingEntryError("vocabulary: momentum update for unknown class '" + name + "'");
    it->second.embedding = alpha_ * w + (S(1) - alpha_) * it->second.embedding;
    return it->second.embedding;
}

template <class S>
std::optional<Vec<S>> ClassVocabulary<S>::lookup(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) return std::nullopt;
    return it->second.embedding;
}

template <class S>
const VocabEntry<S>* ClassVocabulary<S>::entry(const std::string& name) const {
    auto it = entries_.find(name);
    return it == entries_.end() ? nullptr : &it->second;
}

template <class S>
bool ClassVocabulary<S>::operator==(const ClassVocabulary<S>& other) const {
    if (alpha_ != other.alpha_ || entries_.size() != other.entries_.size()) return false;
    auto a = entries_.begin();
    auto b = other.entries_.begin();
    for (; a != entries_.end(); ++a, ++b) {
        if (a->first != b->first || a->second.first_task != b->second.first_task ||
            a->second.source_tasks != b->second.source_tasks ||
            a->second.embedding != b->second.embedding)
            return false;
    }
    return true;
}

template <class S>
void ClassVocabulary<S>::save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ParseError(path.string() + ": cannot open vocabulary file for writing");
    int dim = entries_.empty() ? 0 : static_cast<int>(entries_.begin()->second.embedding.size());
    out << "odcl-vocab v1\n";
    out << "dim " << dim << "\n";
    out << "alpha " << format_float(alpha_) << "\n";
    out << "entries " << entries_.size() << "\n";
    for (const auto& [name, entry] : entries_) {
        if (name.find_first_of(" \t") != std::string::npos)
            throw InputError("vocabulary: class name contains whitespace: '" + name + "'");
        out << "entry " << name << " first " << entry.first_task << " sources";
        for (int t : entry.source_tasks) out << " " << t;
        out << "\n";
        for (Eigen::Index i = 0; i < entry.embedding.size(); ++i) {
            if (i) out << " ";
            out << format_float(entry.embedding(i));
        }
        out << "\n";
    }
    if (!out) throw ParseError(path.string() + ": vocabulary write failure");
}

template <class S>
ClassVocabulary<S> ClassVocabulary<S>::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string() + ": cannot open vocabulary file");
    LineReader rd(in, path.filename().string());
    rd.require("odcl-vocab v1");

    auto dim_line = split_whitespace(rd.require("dim"));
    if (dim_line.size() != 2) rd.fail("expected 'dim <d>'");
    long dim = parse_long(dim_line[1], rd, "dim");

    auto alpha_line = split_whitespace(rd.require("alpha"));
    if (alpha_line.size() != 2) rd.fail("expected 'alpha <value>'");
    ClassVocabulary<S> vocab(static_cast<S>(parse_double(alpha_line[1], rd, "alpha")));

    auto count_line = split_whitespace(rd.require("entries"));
    if (count_line.size() != 2) rd.fail("expected 'entries <count>'");
    long count = parse_long(count_line[1], rd, "entry count");

    for (long k = 0; k < count; ++k) {
        auto toks = split_whitespace(rd.require("entry"));
        if (toks.size() < 6 || toks[2] != "first" || toks[4] != "sources")
            rd.fail("expected 'entry <name> first <t> sources <t...>'");
        VocabEntry<S> entry;
        std::string name = toks[1];
        entry.first_task = static_cast<int>(parse_long(toks[3], rd, "first_task"));
        for (std::size_t i = 5; i < toks.size(); ++i)
            entry.source_tasks.insert(static_cast<int>(parse_long(toks[i], rd, "source task")));
        if (!entry.source_tasks.count(entry.first_task))
            rd.fail("source task set must contain the first task");

        std::string values;
        if (!rd.next(values)) rd.fail("missing embedding values for '" + name + "'");
        auto nums = split_whitespace(values);
        if (static_cast<long>(nums.size()) != dim)
            rd.fail("expected " + std::to_string(dim) + " embedding values, got " +
                    std::to_string(nums.size()));
        entry.embedding.resize(dim);
        for (long i = 0; i < dim; ++i) {
            double v = parse_double(nums[static_cast<std::size_t>(i)], rd, "embedding value");
            if (!std::isfinite(v)) rd.fail("non-finite embedding value");
            entry.embedding(i) = static_cast<S>(v);
        }
        if (!vocab.entries_.emplace(std::move(name), std::move(entry)).second)
            rd.fail("duplicate vocabulary entry");
    }
    return vocab;
}

template class ClassVocabulary<float>;
template class ClassVocabulary<double>;

} // namespace odcl
