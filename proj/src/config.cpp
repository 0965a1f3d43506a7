#include "odcl/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "odcl/rng.hpp"
#include "odcl/textio.hpp"

namespace odcl {

const char* method_name(Method m) {
    switch (m) {
        case Method::Coleclip: return "coleclip";
        case Method::FrozenBaseline: return "frozen_baseline";
        case Method::NaiveFinetune: return "naive_finetune";
    }
    return "?";
}

Method method_from_name(const std::string& s) {
    if (s == "coleclip") return Method::Coleclip;
    if (s == "frozen_baseline") return Method::FrozenBaseline;
    if (s == "naive_finetune") return Method::NaiveFinetune;
    throw ConfigError("unknown method '" + s +
                      "' (expected coleclip, frozen_baseline or naive_finetune)");
}

std::map<std::string, std::string> parse_flat_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string() + ": cannot open config file");
    std::map<std::string, std::string> kv;
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(raw);
        auto hash = line.find('#');
        if (hash != std::string::npos) line = trim(line.substr(0, hash));
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                              ": expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                                           ": empty key");
        if (!kv.emplace(key, value).second)
            throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": duplicate key '" +
                              key + "'");
    }
    return kv;
}

namespace {

long to_long(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        long v = std::stol(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer for " + key + ": '" + value + "'");
    }
}

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: bad number for " + key + ": '" + value + "'");
    }
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        unsigned long long v = std::stoull(value, &pos);
        if (pos != value.size() || value[0] == '-') throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: bad unsigned integer for " + key + ": '" + value + "'");
    }
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true") return true;
    if (value == "false") return false;
    throw ConfigError("config: bad boolean for " + key + ": '" + value + "' (use true/false)");
}

std::vector<std::string> to_list(const std::string& value) {
    std::vector<std::string> out;
    for (auto& item : split_on(value, ',')) {
        std::string t = trim(item);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

constexpr std::uint64_t kStreamSeedTag = 0x51;
constexpr std::uint64_t kBackboneSeedTag = 0xB2;
constexpr std::uint64_t kTrainSeedTag = 0x7A;

} // namespace

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
    return from_map(parse_flat_config(path));
}

ExperimentConfig ExperimentConfig::from_map(const std::map<std::string, std::string>& kv) {
    ExperimentConfig cfg;
    bool stream_seed_set = false, backbone_seed_set = false, train_seed_set = false;

    for (const auto& [key, value] : kv) {
        if (key == "stream.manifest") cfg.manifest = value;
        else if (key == "stream.num_tasks") cfg.stream.num_tasks = static_cast<int>(to_long(key, value));
        else if (key == "stream.classes_per_task") cfg.stream.classes_per_task = static_cast<int>(to_long(key, value));
        else if (key == "stream.overlap_fraction") cfg.stream.overlap_fraction = to_double(key, value);
        else if (key == "stream.samples_per_class_train") cfg.stream.samples_per_class_train = static_cast<int>(to_long(key, value));
        else if (key == "stream.samples_per_class_test") cfg.stream.samples_per_class_test = static_cast<int>(to_long(key, value));
        else if (key == "stream.image_h") cfg.stream.shape.h = static_cast<int>(to_long(key, value));
        else if (key == "stream.image_w") cfg.stream.shape.w = static_cast<int>(to_long(key, value));
        else if (key == "stream.image_c") cfg.stream.shape.c = static_cast<int>(to_long(key, value));
        else if (key == "stream.domain_shift_strength") cfg.stream.domain_shift_strength = to_double(key, value);
        else if (key == "stream.seed") { cfg.stream.seed = to_u64(key, value); stream_seed_set = true; }
        else if (key == "backbone.embed_dim") cfg.backbone.embed_dim = static_cast<int>(to_long(key, value));
        else if (key == "backbone.num_layers") cfg.backbone.num_layers = static_cast<int>(to_long(key, value));
        else if (key == "backbone.num_heads") cfg.backbone.num_heads = static_cast<int>(to_long(key, value));
        else if (key == "backbone.patch_size") cfg.backbone.patch_size = static_cast<int>(to_long(key, value));
        else if (key == "backbone.max_text_tokens") cfg.backbone.max_text_tokens = static_cast<int>(to_long(key, value));
        else if (key == "backbone.seed") { cfg.backbone.seed = to_u64(key, value); backbone_seed_set = true; }
        else if (key == "train.alpha") cfg.train.alpha = to_double(key, value);
        else if (key == "train.gamma") cfg.train.gamma = to_double(key, value);
        else if (key == "train.tau") cfg.train.tau = to_double(key, value);
        else if (key == "train.learning_rate") cfg.train.learning_rate = to_double(key, value);
        else if (key == "train.batch_size") cfg.train.batch_size = static_cast<int>(to_long(key, value));
        else if (key == "train.epochs_per_task") cfg.train.default_epochs = static_cast<int>(to_long(key, value));
        else if (key.rfind("train.epochs_per_task.", 0) == 0) {
            int task = static_cast<int>(to_long(key, key.substr(std::string("train.epochs_per_task.").size())));
            cfg.train.epochs_per_task[task] = static_cast<int>(to_long(key, value));
        }
        else if (key == "train.rank") cfg.train.rank = static_cast<int>(to_long(key, value));
        else if (key == "train.prompt_length") cfg.train.prompt_length = static_cast<int>(to_long(key, value));
        else if (key == "train.use_vocabulary_update") cfg.train.use_vocabulary_update = to_bool(key, value);
        else if (key == "train.use_task_prompts") cfg.train.use_task_prompts = to_bool(key, value);
        else if (key == "train.use_negative_selection") cfg.train.use_negative_selection = to_bool(key, value);
        else if (key == "train.negative_diff_sign") {
            if (value == "+1" || value == "1") cfg.train.negative_diff_sign = 1;
            else if (value == "-1") cfg.train.negative_diff_sign = -1;
            else throw ConfigError("config: train.negative_diff_sign must be +1 or -1");
        }
        else if (key == "train.update_all_task_classes") cfg.train.update_all_task_classes = to_bool(key, value);
        else if (key == "train.adapter_targets") {
            cfg.train.adapter_targets.clear();
            for (const auto& name : to_list(value))
                cfg.train.adapter_targets.push_back(proj_from_name(name));
        }
        else if (key == "train.seed") { cfg.train.seed = to_u64(key, value); train_seed_set = true; }
        else if (key == "run.methods") {
            cfg.methods.clear();
            for (const auto& name : to_list(value)) cfg.methods.push_back(method_from_name(name));
        }
        else if (key == "run.modes") {
            cfg.modes.clear();
            for (const auto& name : to_list(value)) cfg.modes.push_back(mode_from_name(name));
        }
        else if (key == "run.order") {
            cfg.order.clear();
            for (const auto& item : to_list(value))
                cfg.order.push_back(static_cast<int>(to_long(key, item)));
        }
        else if (key == "run.output") cfg.output = value;
        else if (key == "run.seed") cfg.seed = to_u64(key, value);
        else if (key == "run.checkpoint_binary") cfg.checkpoint_binary = to_bool(key, value);
        else if (key == "run.plots") cfg.plots = to_bool(key, value);
        else if (key == "run.deterministic") cfg.deterministic = to_bool(key, value);
        else if (key == "run.stop_after") cfg.stop_after = static_cast<int>(to_long(key, value));
        else throw ConfigError("config: unknown key '" + key + "'");
    }

    // sub-seeds derive from the run seed unless pinned explicitly
    if (!stream_seed_set) cfg.stream.seed = mix_seed(cfg.seed, kStreamSeedTag);
    if (!backbone_seed_set) cfg.backbone.seed = mix_seed(cfg.seed, kBackboneSeedTag);
    if (!train_seed_set) cfg.train.seed = mix_seed(cfg.seed, kTrainSeedTag);
    return cfg;
}

void ExperimentConfig::validate() const {
    if (methods.empty()) throw ConfigError("config: at least one method required");
    if (modes.empty()) throw ConfigError("config: at least one mode required");
    std::set<Method> m(methods.begin(), methods.end());
    if (m.size() != methods.size()) throw ConfigError("config: duplicate methods");
    std::set<Mode> md(modes.begin(), modes.end());
    if (md.size() != modes.size()) throw ConfigError("config: duplicate modes");
    if (!manifest) stream.validate();
    train.validate();
    if (stop_after < 0) throw ConfigError("config: run.stop_after must be >= 0");
    // order checked against the task count once the stream is known
}

std::string ExperimentConfig::canonical_text() const {
    std::ostringstream out;
    if (manifest) out << "stream.manifest = " << manifest->string() << "\n";
    out << "stream.num_tasks = " << stream.num_tasks << "\n";
    out << "stream.classes_per_task = " << stream.classes_per_task << "\n";
    out << "stream.overlap_fraction = " << format_float(stream.overlap_fraction) << "\n";
    out << "stream.samples_per_class_train = " << stream.samples_per_class_train << "\n";
    out << "stream.samples_per_class_test = " << stream.samples_per_class_test << "\n";
    out << "stream.image_h = " << stream.shape.h << "\n";
    out << "stream.image_w = " << stream.shape.w << "\n";
    out << "stream.image_c = " << stream.shape.c << "\n";
    out << "stream.domain_shift_strength = " << format_float(stream.domain_shift_strength) << "\n";
    out << "stream.seed = " << stream.seed << "\n";
    out << "backbone.embed_dim = " << backbone.embed_dim << "\n";
    out << "backbone.num_layers = " << backbone.num_layers << "\n";
    out << "backbone.num_heads = " << backbone.num_heads << "\n";
    out << "backbone.patch_size = " << backbone.patch_size << "\n";
    out << "backbone.max_text_tokens = " << backbone.max_text_tokens << "\n";
    out << "backbone.seed = " << backbone.seed << "\n";
    out << "train.alpha = " << format_float(train.alpha) << "\n";
    out << "train.gamma = " << format_float(train.gamma) << "\n";
    out << "train.tau = " << format_float(train.tau) << "\n";
    out << "train.learning_rate = " << format_float(train.learning_rate) << "\n";
    out << "train.batch_size = " << train.batch_size << "\n";
    out << "train.epochs_per_task = " << train.default_epochs << "\n";
    for (const auto& [task, epochs] : train.epochs_per_task)
        out << "train.epochs_per_task." << task << " = " << epochs << "\n";
    out << "train.rank = " << train.rank << "\n";
    out << "train.prompt_length = " << train.prompt_length << "\n";
    out << "train.use_vocabulary_update = " << (train.use_vocabulary_update ? "true" : "false") << "\n";
    out << "train.use_task_prompts = " << (train.use_task_prompts ? "true" : "false") << "\n";
    out << "train.use_negative_selection = " << (train.use_negative_selection ? "true" : "false") << "\n";
    out << "train.negative_diff_sign = " << (train.negative_diff_sign > 0 ? "+1" : "-1") << "\n";
    out << "train.update_all_task_classes = " << (train.update_all_task_classes ? "true" : "false") << "\n";
    out << "train.adapter_targets = ";
    for (std::size_t i = 0; i < train.adapter_targets.size(); ++i)
        out << (i ? "," : "") << proj_name(train.adapter_targets[i]);
    out << "\n";
    out << "train.seed = " << train.seed << "\n";
    out << "run.methods = ";
    for (std::size_t i = 0; i < methods.size(); ++i) out << (i ? "," : "") << method_name(methods[i]);
    out << "\n";
    out << "run.modes = ";
    for (std::size_t i = 0; i < modes.size(); ++i) out << (i ? "," : "") << mode_name(modes[i]);
    out << "\n";
    if (!order.empty()) {
        out << "run.order = ";
        for (std::size_t i = 0; i < order.size(); ++i) out << (i ? "," : "") << order[i];
        out << "\n";
    }
    out << "run.output = " << output.string() << "\n";
    out << "run.seed = " << seed << "\n";
    out << "run.checkpoint_binary = " << (checkpoint_binary ? "true" : "false") << "\n";
    out << "run.plots = " << (plots ? "true" : "false") << "\n";
    out << "run.deterministic = " << (deterministic ? "true" : "false") << "\n";
    if (stop_after > 0) out << "run.stop_after = " << stop_after << "\n";
    return out.str();
}

std::uint64_t ExperimentConfig::config_hash() const { return fnv1a64(canonical_text()); }

} // namespace odcl
