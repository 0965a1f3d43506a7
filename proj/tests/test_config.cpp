#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "odcl/config.hpp"

using namespace odcl;

namespace {

std::filesystem::path write_config(const std::string& body) {
    auto path = std::filesystem::temp_directory_path() / "odcl_test.cfg";
    std::ofstream out(path);
    out << body;
    return path;
}

} // namespace

TEST_CASE("config parses dotted keys, comments and overrides") {
    auto path = write_config(
        "# comment line\n"
        "stream.num_tasks = 4   # trailing comment\n"
        "stream.overlap_fraction = 0.25\n"
        "train.epochs_per_task = 9\n"
        "train.epochs_per_task.2 = 3\n"
        "train.adapter_targets = q,k,v\n"
        "run.methods = coleclip,naive_finetune\n"
        "run.modes = TIL\n"
        "run.order = 2,1,4,3\n"
        "run.checkpoint_binary = true\n");
    ExperimentConfig cfg = ExperimentConfig::from_file(path);
    CHECK(cfg.stream.num_tasks == 4);
    CHECK(cfg.stream.overlap_fraction == 0.25);
    CHECK(cfg.train.default_epochs == 9);
    CHECK(cfg.train.epochs_for(2) == 3);
    CHECK(cfg.train.epochs_for(1) == 9);
    CHECK(cfg.train.adapter_targets == std::vector<Proj>{Proj::Q, Proj::K, Proj::V});
    CHECK(cfg.methods == std::vector<Method>{Method::Coleclip, Method::NaiveFinetune});
    CHECK(cfg.modes == std::vector<Mode>{Mode::TIL});
    CHECK(cfg.order == std::vector<int>{2, 1, 4, 3});
    CHECK(cfg.checkpoint_binary);
    CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("sub-seeds derive from the run seed unless pinned") {
    auto a = ExperimentConfig::from_map({{"run.seed", "7"}});
    auto b = ExperimentConfig::from_map({{"run.seed", "7"}});
    auto c = ExperimentConfig::from_map({{"run.seed", "8"}});
    CHECK(a.stream.seed == b.stream.seed);
    CHECK(a.backbone.seed == b.backbone.seed);
    CHECK(a.stream.seed != c.stream.seed);
    CHECK(a.stream.seed != a.backbone.seed);

    auto pinned = ExperimentConfig::from_map({{"run.seed", "8"}, {"stream.seed", "123"}});
    CHECK(pinned.stream.seed == 123);
    CHECK(pinned.backbone.seed == c.backbone.seed);
}

TEST_CASE("config rejects unknown keys, duplicates and bad values") {
    CHECK_THROWS_AS(ExperimentConfig::from_map({{"stream.nun_tasks", "3"}}), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_map({{"train.tau", "zero"}}), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_map({{"run.methods", "zscl"}}), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_map({{"run.modes", "TIL,TIL"}}).validate(),
                    ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_map({{"run.checkpoint_binary", "yes"}}), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_map({{"train.negative_diff_sign", "2"}}), ConfigError);

    auto path = write_config("stream.num_tasks = 3\nstream.num_tasks = 4\n");
    CHECK_THROWS_AS(parse_flat_config(path), ConfigError);
    auto bad = write_config("stream.num_tasks 3\n");
    CHECK_THROWS_AS(parse_flat_config(bad), ConfigError);
}

TEST_CASE("config hash tracks the resolved values") {
    auto a = ExperimentConfig::from_map({{"run.seed", "7"}});
    auto b = ExperimentConfig::from_map({{"run.seed", "7"}});
    auto c = ExperimentConfig::from_map({{"run.seed", "9"}});
    CHECK(a.config_hash() == b.config_hash());
    CHECK(a.config_hash() != c.config_hash());
    auto d = ExperimentConfig::from_map({{"run.seed", "7"}, {"train.gamma", "0.5"}});
    CHECK(a.config_hash() != d.config_hash());
}
