#ifndef ODCL_CONFIG_HPP
#define ODCL_CONFIG_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "odcl/backbone.hpp"
#include "odcl/mode.hpp"
#include "odcl/stream.hpp"
#include "odcl/trainer.hpp"

namespace odcl {

enum class Method { Coleclip, FrozenBaseline, NaiveFinetune };

const char* method_name(Method m);
Method method_from_name(const std::string& s); // throws ConfigError

// Flat `section.key = value` lines, '#' comments. Unknown or duplicate keys
// are configuration errors.
std::map<std::string, std::string> parse_flat_config(const std::filesystem::path& path);

struct ExperimentConfig {
    std::optional<std::filesystem::path> manifest; // load instead of generating
    StreamConfig stream;
    BackboneConfig backbone;
    TrainConfig train;
    std::vector<Method> methods{Method::Coleclip, Method::FrozenBaseline};
    std::vector<Mode> modes{Mode::TIL, Mode::CIL};
    std::vector<int> order; // empty = identity permutation
    std::filesystem::path output = "out";
    std::uint64_t seed = 42;
    bool checkpoint_binary = false;
    bool plots = false;
    bool deterministic = true;
    int stop_after = 0; // train/evaluate only the first k steps (0 = all); used by resume tests

    static ExperimentConfig from_file(const std::filesystem::path& path);
    static ExperimentConfig from_map(const std::map<std::string, std::string>& kv);

    void validate() const;
    // canonical reproducible dump of every resolved key
    std::string canonical_text() const;
    std::uint64_t config_hash() const;
};

} // namespace odcl

#endif
