#include <doctest.h>

#include <filesystem>

#include "odcl/checkpoint.hpp"
#include "odcl/harness.hpp"
#include "odcl/inference.hpp"
#include "odcl/rng.hpp"

using namespace odcl;
namespace fs = std::filesystem;

namespace {

// Small enough to train in well under a second per method.
ExperimentConfig tiny_experiment(const fs::path& out, std::uint64_t seed) {
    ExperimentConfig cfg = ExperimentConfig::from_map({
        {"stream.num_tasks", "3"},
        {"stream.classes_per_task", "3"},
        {"stream.samples_per_class_train", "6"},
        {"stream.samples_per_class_test", "4"},
        {"train.batch_size", "6"},
        {"train.epochs_per_task", "3"},
        {"run.seed", std::to_string(seed)},
    });
    cfg.output = out;
    return cfg;
}

fs::path fresh_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    return dir;
}

} // namespace

TEST_CASE("identical config and seed reproduce identical matrices") {
    auto cfg_a = tiny_experiment(fresh_dir("odcl_rep_a"), 11);
    auto cfg_b = tiny_experiment(fresh_dir("odcl_rep_b"), 11);
    cfg_a.methods = {Method::Coleclip, Method::FrozenBaseline, Method::NaiveFinetune};
    cfg_b.methods = cfg_a.methods;

    RunRecord a = run_experiment(cfg_a);
    RunRecord b = run_experiment(cfg_b);
    REQUIRE(a.methods.size() == b.methods.size());
    CHECK(a.config_hash != b.config_hash); // output dir differs
    for (std::size_t i = 0; i < a.methods.size(); ++i)
        for (const auto& [mode, matrix] : a.methods[i].matrices)
            CHECK(matrix == b.methods[i].matrices.at(mode));

    // a different seed must change the (non-frozen) results
    auto cfg_c = tiny_experiment(fresh_dir("odcl_rep_c"), 12);
    cfg_c.methods = {Method::Coleclip};
    RunRecord c = run_experiment(cfg_c);
    CHECK_FALSE(c.methods[0].matrices.at(Mode::TIL) == a.methods[0].matrices.at(Mode::TIL));

    fs::remove_all(cfg_a.output);
    fs::remove_all(cfg_b.output);
    fs::remove_all(cfg_c.output);
}

TEST_CASE("every cell of every matrix is populated, including pre-exposure cells") {
    auto cfg = tiny_experiment(fresh_dir("odcl_complete"), 5);
    cfg.methods = {Method::Coleclip, Method::FrozenBaseline, Method::NaiveFinetune};
    RunRecord record = run_experiment(cfg);
    for (const auto& method : record.methods) {
        REQUIRE(method.matrices.size() == 2);
        for (const auto& [mode, matrix] : method.matrices) {
            CHECK(matrix.fully_populated());
            CHECK(method.reports.count(mode) == 1);
        }
    }
    fs::remove_all(cfg.output);
}

TEST_CASE("frozen baseline has constant columns and degenerate metrics") {
    auto cfg = tiny_experiment(fresh_dir("odcl_frozen"), 6);
    cfg.methods = {Method::FrozenBaseline};
    RunRecord record = run_experiment(cfg);
    const auto& result = record.methods[0];
    for (const auto& [mode, matrix] : result.matrices) {
        for (int t = 1; t <= matrix.total_tasks(); ++t)
            for (int i = 2; i <= matrix.total_tasks(); ++i)
                CHECK(matrix.at(t, i) == matrix.at(t, 1));
        const MetricReport& report = result.reports.at(mode);
        CHECK(report.avg == doctest::Approx(report.last).epsilon(1e-12));
        CHECK(report.avg == doctest::Approx(report.forgetting).epsilon(1e-12));
    }
    fs::remove_all(cfg.output);
}

TEST_CASE("TIL accuracy dominates CIL accuracy everywhere") {
    auto cfg = tiny_experiment(fresh_dir("odcl_tilcil"), 7);
    cfg.methods = {Method::Coleclip, Method::FrozenBaseline, Method::NaiveFinetune};
    RunRecord record = run_experiment(cfg);
    for (const auto& method : record.methods) {
        const auto& til = method.matrices.at(Mode::TIL);
        const auto& cil = method.matrices.at(Mode::CIL);
        for (int t = 1; t <= til.total_tasks(); ++t)
            for (int i = 1; i <= til.total_tasks(); ++i) CHECK(til.at(t, i) >= cil.at(t, i));
    }
    fs::remove_all(cfg.output);
}

TEST_CASE("shuffled task orders complete and fill valid reports") {
    auto cfg = tiny_experiment(fresh_dir("odcl_order"), 8);
    cfg.methods = {Method::Coleclip};
    cfg.order = {3, 1, 2};
    RunRecord record = run_experiment(cfg);
    CHECK(record.methods[0].matrices.at(Mode::TIL).fully_populated());
    CHECK(record.methods[0].reports.count(Mode::TIL) == 1);

    cfg.order = {1, 1, 2};
    CHECK_THROWS_AS(run_experiment(cfg), ConfigError);
    cfg.order = {1, 2};
    CHECK_THROWS_AS(run_experiment(cfg), ConfigError);
    fs::remove_all(cfg.output);
}

TEST_CASE("resume continues bit-identically from a task checkpoint") {
    auto full_dir = fresh_dir("odcl_resume_full");
    auto part_dir = fresh_dir("odcl_resume_part");
    auto cfg_full = tiny_experiment(full_dir, 9);
    cfg_full.methods = {Method::Coleclip, Method::NaiveFinetune};

    RunRecord full = run_experiment(cfg_full);

    auto cfg_part = tiny_experiment(part_dir, 9);
    cfg_part.methods = cfg_full.methods;
    cfg_part.stop_after = 1;
    run_experiment(cfg_part);
    cfg_part.stop_after = 0;
    RunRecord resumed = run_experiment(cfg_part, /*resume=*/true);

    REQUIRE(resumed.methods.size() == full.methods.size());
    for (std::size_t i = 0; i < full.methods.size(); ++i)
        for (const auto& [mode, matrix] : full.methods[i].matrices)
            CHECK(resumed.methods[i].matrices.at(mode) == matrix);

    fs::remove_all(full_dir);
    fs::remove_all(part_dir);
}

TEST_CASE("frozen evaluations track the run's own backbone") {
    // same stream (same class names), different backbone seeds: each run's
    // frozen baseline must match a fresh evaluation with that run's backbone
    auto cfg = tiny_experiment(fresh_dir("odcl_fresh_backbone"), 3);
    cfg.methods = {Method::FrozenBaseline};
    cfg.stream.seed = 555;
    TaskStream stream = generate_stream(cfg.stream);

    for (std::uint64_t backbone_seed : {1, 2}) {
        cfg.backbone.seed = backbone_seed;
        RunRecord record = run_experiment(cfg);

        Backbone<float> backbone(cfg.backbone, stream.shape);
        ModelState<float> state;
        state.backbone = &backbone;
        ClassVocabulary<float> vocab(0.0f);
        const auto& matrix = record.methods[0].matrices.at(Mode::TIL);
        for (int t = 1; t <= stream.total_tasks(); ++t) {
            double expected =
                evaluate_dataset(stream.tasks[t - 1], Mode::TIL, 1, state, vocab, nullptr);
            for (int i = 1; i <= stream.total_tasks(); ++i)
                CHECK(matrix.at(t, i) == expected);
        }
        fs::remove_all(cfg.output);
    }
}

TEST_CASE("single-method shortcuts run the named baseline") {
    auto cfg = tiny_experiment(fresh_dir("odcl_shortcut"), 21);
    auto frozen = run_frozen_baseline(cfg);
    CHECK(frozen.at(Mode::TIL).fully_populated());
    CHECK(frozen.at(Mode::TIL).at(1, 1) == frozen.at(Mode::TIL).at(1, 3));
    cfg.output = fresh_dir("odcl_shortcut2");
    auto naive = run_naive_finetune(cfg);
    CHECK(naive.at(Mode::CIL).fully_populated());
    fs::remove_all(cfg.output);
    fs::remove_all(fresh_dir("odcl_shortcut"));
}

TEST_CASE("experiments can run from a manifest on disk") {
    auto dir = fresh_dir("odcl_manifest_run");
    StreamConfig stream;
    stream.num_tasks = 2;
    stream.classes_per_task = 3;
    stream.samples_per_class_train = 6;
    stream.samples_per_class_test = 4;
    stream.seed = 31;
    write_manifest(generate_stream(stream), dir / "stream.manifest");

    auto cfg = tiny_experiment(dir / "run", 10);
    cfg.manifest = dir / "stream.manifest";
    cfg.methods = {Method::FrozenBaseline};
    RunRecord record = run_experiment(cfg);
    CHECK(record.methods[0].matrices.at(Mode::TIL).total_tasks() == 2);
    fs::remove_all(dir);
}

TEST_CASE("checkpoints round trip in text and binary float modes") {
    CheckpointData<float> data;
    data.backbone.seed = 77;
    data.shape = {16, 16, 3};
    data.step_datasets = {2, 1};
    data.prompts_enabled = true;
    data.bank.prompts.push_back(init_task_prompt<float>(1, 1, 16, 3));
    data.bank.prompts.push_back(init_task_prompt<float>(2, 2, 16, 4));
    for (int t = 1; t <= 2; ++t)
        data.adapters.push_back(init_adapter<float>(t, 4, {Proj::Q, Proj::V}, 2, 16, t));
    Rng rng(5);
    for (auto& a : data.adapters)
        for (auto& layer : a.layers)
            for (auto& delta : layer.deltas)
                if (delta)
                    for (Eigen::Index i = 0; i < delta->up.size(); ++i)
                        delta->up.data()[i] = static_cast<float>(rng.gaussian());

    for (bool binary : {false, true}) {
        auto path = fs::temp_directory_path() /
                    (binary ? "odcl_ckpt_bin.ckpt" : "odcl_ckpt_txt.ckpt");
        save_checkpoint(path, data, binary);
        CheckpointData<float> loaded = load_checkpoint<float>(path);
        CHECK(loaded.backbone.seed == 77);
        CHECK(loaded.step_datasets == data.step_datasets);
        CHECK(loaded.prompts_enabled == data.prompts_enabled);
        REQUIRE(loaded.bank.size() == 2);
        CHECK(loaded.bank.prompts[1].vectors == data.bank.prompts[1].vectors);
        REQUIRE(loaded.adapters.size() == 2);
        for (std::size_t l = 0; l < 2; ++l)
            for (int p = 0; p < 4; ++p)
                if (data.adapters[1].layers[l].deltas[p]) {
                    CHECK(loaded.adapters[1].layers[l].deltas[p]->down ==
                          data.adapters[1].layers[l].deltas[p]->down);
                    CHECK(loaded.adapters[1].layers[l].deltas[p]->up ==
                          data.adapters[1].layers[l].deltas[p]->up);
                }
        fs::remove(path);
    }
}

TEST_CASE("reports can be regenerated from the run directory") {
    auto cfg = tiny_experiment(fresh_dir("odcl_regen"), 13);
    cfg.methods = {Method::FrozenBaseline};
    run_experiment(cfg);
    fs::remove(cfg.output / "frozen_baseline" / "report_TIL.md");
    regenerate_reports(cfg.output, /*plots=*/true);
    CHECK(fs::exists(cfg.output / "frozen_baseline" / "report_TIL.md"));
    CHECK(fs::exists(cfg.output / "frozen_baseline" / "plots"));
    CHECK_THROWS_AS(regenerate_reports(fresh_dir("odcl_regen_none"), false), ConfigError);
    fs::remove_all(cfg.output);
}
