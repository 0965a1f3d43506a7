#include <doctest.h>

#include <cmath>

#include "fd_util.hpp"
#include "odcl/rng.hpp"
#include "odcl/trainer.hpp"

using namespace odcl;
using odcl::testutil::numeric_grad;
using odcl::testutil::relative_error;

namespace {

const ImageShape kShape{8, 8, 3};

BackboneConfig small_backbone() {
    BackboneConfig cfg;
    cfg.embed_dim = 8;
    cfg.num_layers = 2;
    cfg.num_heads = 2;
    cfg.patch_size = 4;
    cfg.seed = 31;
    return cfg;
}

StreamConfig small_stream(double overlap = 0.0) {
    StreamConfig cfg;
    cfg.num_tasks = 2;
    cfg.classes_per_task = 3;
    cfg.overlap_fraction = overlap;
    cfg.samples_per_class_train = 4;
    cfg.samples_per_class_test = 2;
    cfg.shape = kShape;
    cfg.domain_shift_strength = 1.0;
    cfg.seed = 17;
    return cfg;
}

TrainConfig quick_train() {
    TrainConfig cfg;
    cfg.batch_size = 6;
    cfg.default_epochs = 2;
    cfg.rank = 3;
    cfg.seed = 23;
    return cfg;
}

void randomize_adapter(LowRankAdapter<double>& adapter, std::uint64_t seed) {
    Rng rng(seed);
    for (auto& layer : adapter.layers)
        for (auto& delta : layer.deltas)
            if (delta) {
                for (Eigen::Index i = 0; i < delta->down.size(); ++i)
                    delta->down.data()[i] = rng.gaussian(0.0, 0.05);
                for (Eigen::Index i = 0; i < delta->up.size(); ++i)
                    delta->up.data()[i] = rng.gaussian(0.0, 0.05);
            }
}

} // namespace

TEST_CASE("energy score closed forms") {
    std::vector<double> uniform{0.5, 0.5, 0.5, 0.5};
    CHECK(energy_score(uniform, 0.01) ==
          doctest::Approx(0.5 + 0.01 * std::log(4.0)).epsilon(1e-10));

    std::vector<double> single{-2.75};
    CHECK(energy_score(single, 0.37) == doctest::Approx(-2.75));

    std::vector<double> dominant{0.9, -1.0, -1.0};
    CHECK(energy_score(dominant, 0.01) == doctest::Approx(0.9).epsilon(1e-6));

    std::vector<double> empty;
    CHECK_THROWS_AS(energy_score(empty, 0.01), InputError);
}

TEST_CASE("energy score is stable and monotone") {
    std::vector<double> big{1e4, -1e4, 5e3};
    double e = energy_score(big, 0.01);
    CHECK(std::isfinite(e));
    CHECK(e >= 1e4);

    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> logits(4);
        for (auto& v : logits) v = rng.uniform(-2.0, 2.0);
        double base = energy_score(logits, 0.01);
        CHECK(base >= *std::max_element(logits.begin(), logits.end()) - 1e-12);
        int idx = rng.uniform_int(4);
        logits[static_cast<std::size_t>(idx)] += rng.uniform(0.0, 1.0);
        CHECK(energy_score(logits, 0.01) >= base - 1e-12);
    }
}

TEST_CASE("nearest-rank percentile") {
    std::vector<double> v{4.0, 1.0, 3.0, 2.0};
    CHECK(nearest_rank_percentile(v, 0.5) == 2.0);
    CHECK(nearest_rank_percentile(v, 1.0) == 4.0);
    CHECK(nearest_rank_percentile(v, 0.25) == 1.0);
    CHECK(nearest_rank_percentile(std::vector<double>{7.0}, 0.7) == 7.0);
    // 0.3 * 10 stored as 2.999...; the rank must still be 3
    std::vector<double> ten{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    CHECK(nearest_rank_percentile(ten, 0.3) == 3.0);
    CHECK_THROWS_AS(nearest_rank_percentile(std::vector<double>{}, 0.5), InputError);
}

TEST_CASE("stage boundary convention") {
    CHECK(stage_boundary(10) == 5);
    CHECK(stage_boundary(11) == 6);
    CHECK(stage_boundary(1) == 1);
    // the two stages partition all iterations
    for (long total : {1L, 2L, 7L, 11L}) {
        long boundary = stage_boundary(total);
        long stage1 = 0, stage2 = 0;
        for (long it = 1; it <= total; ++it) (it <= boundary ? stage1 : stage2)++;
        CHECK(stage1 + stage2 == total);
        CHECK(stage1 >= stage2);
        CHECK(stage1 - stage2 <= 1);
    }
}

TEST_CASE("negative selection stages and eligibility") {
    // two current classes; four samples; crafted logits
    TaskLogits<double> current;
    current.task_index = 3;
    current.class_names = {"a", "b"};
    current.logits.resize(4, 2);
    // rows 0,1 misclassified; rows 2,3 correct
    current.logits << 0.1, 0.9, /**/ 0.2, 0.8, /**/ 0.9, 0.1, /**/ 0.8, 0.2;
    std::vector<int> labels{0, 0, 0, 0};

    TaskLogits<double> prev;
    prev.task_index = 1;
    prev.class_names = {"p", "q"};
    prev.logits.resize(4, 2);
    // energies: row 0 low (close to current -> large diff), row 1 high
    prev.logits << -0.9, -0.9, /**/ 0.95, 0.95, /**/ 0.0, 0.0, /**/ 0.0, 0.0;

    SUBCASE("stage 1 selects nothing") {
        NegativeSet s = select_negative_classes(current, labels, {prev}, 0.5, 1, +1, 0.01);
        CHECK(s.total() == 0);
    }
    SUBCASE("correct samples are never eligible") {
        NegativeSet s = select_negative_classes(current, labels, {prev}, 0.5, 2, +1, 0.01);
        CHECK(s.per_sample[2].empty());
        CHECK(s.per_sample[3].empty());
        // eligible diffs: sample0 ~ E(cur)-E(prev) large, sample1 negative;
        // gamma=0.5 over two values -> threshold is the smaller; only sample 0 above
        CHECK(s.per_sample[0] == std::vector<std::string>{"p", "q"});
        CHECK(s.per_sample[1].empty());
        CHECK(s.total() == 2);
    }
    SUBCASE("flipping the sign flips the recipient") {
        NegativeSet s = select_negative_classes(current, labels, {prev}, 0.5, 2, -1, 0.01);
        CHECK(s.per_sample[0].empty());
        CHECK(s.per_sample[1] == std::vector<std::string>{"p", "q"});
    }
    SUBCASE("no previous tasks is not an error") {
        NegativeSet s = select_negative_classes(current, labels, {}, 0.5, 2, +1, 0.01);
        CHECK(s.total() == 0);
    }
    SUBCASE("bad stage is rejected") {
        CHECK_THROWS_AS(select_negative_classes(current, labels, {prev}, 0.5, 3, +1, 0.01),
                        InputError);
    }
}

TEST_CASE("negative sets are sound under random inputs") {
    Rng rng(71);
    for (int trial = 0; trial < 40; ++trial) {
        const int batch = 1 + rng.uniform_int(8);
        const int c_cur = 2 + rng.uniform_int(3);
        TaskLogits<double> current;
        current.task_index = 3;
        for (int c = 0; c < c_cur; ++c) current.class_names.push_back("cur_" + std::to_string(c));
        current.logits.resize(batch, c_cur);
        std::vector<int> labels(static_cast<std::size_t>(batch));
        for (int i = 0; i < batch; ++i) {
            labels[static_cast<std::size_t>(i)] = rng.uniform_int(c_cur);
            for (int c = 0; c < c_cur; ++c) current.logits(i, c) = rng.uniform(-1.0, 1.0);
        }

        std::vector<TaskLogits<double>> previous;
        std::set<std::string> prev_names;
        const int n_prev = rng.uniform_int(3);
        for (int j = 1; j <= n_prev; ++j) {
            TaskLogits<double> prev;
            prev.task_index = j;
            const int c_prev = rng.uniform_int(3); // may be empty (fully overlapping task)
            for (int c = 0; c < c_prev; ++c) {
                prev.class_names.push_back("t" + std::to_string(j) + "_" + std::to_string(c));
                prev_names.insert(prev.class_names.back());
            }
            prev.logits.resize(batch, c_prev);
            for (int i = 0; i < batch; ++i)
                for (int c = 0; c < c_prev; ++c) prev.logits(i, c) = rng.uniform(-1.0, 1.0);
            previous.push_back(std::move(prev));
        }

        const int stage = 1 + rng.uniform_int(2);
        NegativeSet set = select_negative_classes(current, labels, previous, 0.5, stage,
                                                  rng.coin() ? 1 : -1, 0.01);
        REQUIRE(set.per_sample.size() == static_cast<std::size_t>(batch));
        if (stage == 1) CHECK(set.total() == 0);
        for (int i = 0; i < batch; ++i) {
            Eigen::Index pred = 0;
            current.logits.row(i).maxCoeff(&pred);
            const bool correct = static_cast<int>(pred) == labels[static_cast<std::size_t>(i)];
            if (correct) CHECK(set.per_sample[static_cast<std::size_t>(i)].empty());
            std::set<std::string> unique;
            for (const auto& name : set.per_sample[static_cast<std::size_t>(i)]) {
                CHECK(prev_names.count(name) == 1); // from a previous task, never from Y_t
                CHECK(unique.insert(name).second);  // no duplicates
            }
        }
    }
}

TEST_CASE("percentile worked example inside selection") {
    // four eligible samples with energy differences 1,2,3,4 for one previous
    // task; gamma=0.5 -> threshold 2; strictly above gets the negatives
    TaskLogits<double> current;
    current.task_index = 2;
    current.class_names = {"a", "b"};
    current.logits.resize(4, 2);
    std::vector<int> labels{0, 0, 0, 0};
    TaskLogits<double> prev;
    prev.task_index = 1;
    prev.class_names = {"n1", "n2", "n3"};
    prev.logits.resize(4, 3);
    const double tau = 0.01;
    for (int i = 0; i < 4; ++i) {
        // all misclassified; current energy = i+1 up to a shared constant
        current.logits(i, 0) = 0.0;
        current.logits(i, 1) = static_cast<double>(i + 1);
        for (int c = 0; c < 3; ++c) prev.logits(i, c) = 0.0;
    }
    // E_cur(i) ~= (i+1); E_prev(i) = tau*ln(3); diffs ~ i+1 - const
    NegativeSet s = select_negative_classes(current, labels, {prev}, 0.5, 2, +1, tau);
    CHECK(s.per_sample[0].empty());
    CHECK(s.per_sample[1].empty());
    CHECK(s.per_sample[2].size() == 3);
    CHECK(s.per_sample[3].size() == 3);
}

TEST_CASE("cross entropy pair closed forms") {
    Vec<double> one(1);
    one << 0.37;
    CHECK(cross_entropy_pair(one, one, 0, 0.01) == 0.0);

    Vec<double> equal(2);
    equal << 0.4, 0.4;
    CHECK(cross_entropy_pair(equal, equal, 0, 0.01) ==
          doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
    CHECK_THROWS_AS(cross_entropy_pair(equal, equal, 5, 0.01), InputError);
}

TEST_CASE("loss values at task start") {
    Backbone<float> backbone(small_backbone(), kShape);
    TaskStream stream = generate_stream(small_stream());
    const TaskSpec& task = stream.tasks[0];

    ClassVocabulary<float> vocab(0.1f);
    vocab.ensure_entries(task.class_set,
                         [&](const std::string& n) { return backbone.frozen_text_embedding(n); },
                         1);
    TaskPromptBank<float> bank;
    bank.prompts.push_back(init_task_prompt<float>(1, 1, 8, 3));
    auto adapter = init_adapter<float>(1, 3, {Proj::Q, Proj::V}, 2, 8, 3);

    TrainContext<float> ctx;
    ctx.backbone = &backbone;
    ctx.bank = &bank;
    ctx.adapter = &adapter;
    ctx.vocab = &vocab;
    ctx.task_classes = task.class_set;
    ctx.tau = 0.01;

    std::vector<const ImageSample*> batch{&task.train_samples[0], &task.train_samples[5]};
    LossBreakdown loss = compute_losses<float>(ctx, batch, nullptr, nullptr);
    // zero-init adapter + fresh vocabulary: w_y == V(y) exactly
    CHECK(loss.reg == 0.0);
    CHECK(std::isfinite(loss.ce));
    CHECK(loss.total == loss.ce);

    // single class space degenerates to zero cross entropy
    TrainContext<float> single = ctx;
    single.task_classes = {task.class_set[0]};
    std::vector<const ImageSample*> one{&task.train_samples[0]};
    LossBreakdown degenerate = compute_losses<float>(single, one, nullptr, nullptr);
    CHECK(degenerate.ce == 0.0);

    // label outside the local space is a contract violation
    TrainContext<float> wrong = ctx;
    wrong.task_classes = {task.class_set[1], task.class_set[2]};
    CHECK_THROWS_AS(compute_losses<float>(wrong, one, nullptr, nullptr), InputError);
}

TEST_CASE("total loss gradients match finite differences") {
    Backbone<double> backbone(small_backbone(), kShape);
    TaskStream stream = generate_stream(small_stream());
    const TaskSpec& task = stream.tasks[0];

    ClassVocabulary<double> vocab(0.1);
    vocab.ensure_entries(task.class_set,
                         [&](const std::string& n) { return backbone.frozen_text_embedding(n); },
                         1);
    // an extra entry acting as a negative class from an earlier task
    vocab.ensure_entries({"negato_1"},
                         [&](const std::string& n) { return backbone.frozen_text_embedding(n); },
                         1);

    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
        TaskPromptBank<double> bank;
        bank.prompts.push_back(init_task_prompt<double>(1, 1, 8, seed));
        auto adapter = init_adapter<double>(1, 3, {Proj::Q, Proj::V}, 2, 8, seed);
        randomize_adapter(adapter, seed * 101);

        TrainContext<double> ctx;
        ctx.backbone = &backbone;
        ctx.bank = &bank;
        ctx.adapter = &adapter;
        ctx.vocab = &vocab;
        ctx.task_classes = task.class_set;
        ctx.tau = 0.01;

        std::vector<const ImageSample*> batch{&task.train_samples[0], &task.train_samples[4],
                                              &task.train_samples[9]};
        NegativeSet negatives;
        negatives.per_sample.resize(batch.size());
        if (seed % 2 == 0) negatives.per_sample[1] = {"negato_1"};

        TrainGrads<double> grads;
        compute_losses<double>(ctx, batch, &negatives, &grads);

        auto eval = [&]() {
            return compute_losses<double>(ctx, batch, &negatives, nullptr).total;
        };

        CHECK(relative_error(grads.prompt, numeric_grad(eval, bank.prompts[0].vectors)) < 1e-6);
        for (std::size_t l = 0; l < adapter.layers.size(); ++l)
            for (int p = 0; p < 4; ++p) {
                if (!adapter.layers[l].deltas[p]) continue;
                auto& delta = *adapter.layers[l].deltas[p];
                const auto& g = *grads.adapter.layers[l].deltas[p];
                CHECK(relative_error(g.down, numeric_grad(eval, delta.down)) < 1e-6);
                CHECK(relative_error(g.up, numeric_grad(eval, delta.up)) < 1e-6);
            }
    }
}

TEST_CASE("training leaves frozen state untouched and isolates the vocabulary") {
    Backbone<float> backbone(small_backbone(), kShape);
    TaskStream stream = generate_stream(small_stream());

    ModelState<float> state;
    state.backbone = &backbone;
    ClassVocabulary<float> vocab(0.1f);
    TrainConfig cfg = quick_train();

    train_task(stream.tasks[0], state, vocab, cfg, nullptr);
    REQUIRE(state.trained_steps() == 1);
    REQUIRE(state.bank.size() == 1);

    // snapshot everything task 2 must not disturb
    Mat<float> prompt1 = state.bank.prompts[0].vectors;
    auto adapter1 = state.adapter_archive[0];
    std::map<std::string, Vec<float>> vocab1;
    for (const auto& [name, entry] : vocab.entries()) vocab1[name] = entry.embedding;
    ImageSample probe = stream.tasks[0].test_samples[0];
    Vec<float> cls_before = backbone.encode_image(probe, {}).cls_output;

    train_task(stream.tasks[1], state, vocab, cfg, nullptr);
    CHECK(state.trained_steps() == 2);
    CHECK(state.bank.prompts[0].vectors == prompt1);
    for (std::size_t l = 0; l < adapter1.layers.size(); ++l)
        for (int p = 0; p < 4; ++p)
            if (adapter1.layers[l].deltas[p]) {
                CHECK(state.adapter_archive[0].layers[l].deltas[p]->down ==
                      adapter1.layers[l].deltas[p]->down);
                CHECK(state.adapter_archive[0].layers[l].deltas[p]->up ==
                      adapter1.layers[l].deltas[p]->up);
            }
    // task 1 classes (zero overlap) must be bitwise stable
    for (const auto& name : stream.tasks[0].class_set)
        CHECK(vocab.entry(name)->embedding == vocab1[name]);
    // task 2 classes must have moved away from their frozen seeds
    bool moved = false;
    for (const auto& name : stream.tasks[1].class_set)
        if (vocab.entry(name)->embedding != backbone.frozen_text_embedding(name)) moved = true;
    CHECK(moved);
    // backbone outputs unchanged
    CHECK(backbone.encode_image(probe, {}).cls_output == cls_before);
}

TEST_CASE("ablation flags bypass their mechanisms") {
    Backbone<float> backbone(small_backbone(), kShape);
    TaskStream stream = generate_stream(small_stream());

    SUBCASE("no vocabulary update keeps frozen embeddings") {
        ModelState<float> state;
        state.backbone = &backbone;
        ClassVocabulary<float> vocab(0.1f);
        TrainConfig cfg = quick_train();
        cfg.use_vocabulary_update = false;
        train_task(stream.tasks[0], state, vocab, cfg, nullptr);
        for (const auto& name : stream.tasks[0].class_set)
            CHECK(vocab.entry(name)->embedding == backbone.frozen_text_embedding(name));
    }
    SUBCASE("no task prompts leaves the bank empty") {
        ModelState<float> state;
        state.backbone = &backbone;
        ClassVocabulary<float> vocab(0.1f);
        TrainConfig cfg = quick_train();
        cfg.use_task_prompts = false;
        train_task(stream.tasks[0], state, vocab, cfg, nullptr);
        CHECK(state.bank.size() == 0);
        CHECK(state.trained_steps() == 1);
    }
}

TEST_CASE("poisoned vocabulary values surface as a divergence error") {
    Backbone<float> backbone(small_backbone(), kShape);
    TaskStream stream = generate_stream(small_stream());

    ModelState<float> state;
    state.backbone = &backbone;
    ClassVocabulary<float> vocab(0.1f);
    vocab.ensure_entries(stream.tasks[0].class_set,
                         [&](const std::string& n) { return backbone.frozen_text_embedding(n); },
                         1);
    Vec<float> nan_vec =
        Vec<float>::Constant(8, std::numeric_limits<float>::quiet_NaN());
    vocab.momentum_update(stream.tasks[0].class_set[0], nan_vec);

    TrainConfig cfg = quick_train();
    CHECK_THROWS_AS(train_task(stream.tasks[0], state, vocab, cfg, nullptr), DivergenceError);
}

TEST_CASE("train config validation") {
    TrainConfig cfg;
    cfg.tau = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.gamma = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.negative_diff_sign = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.epochs_per_task[2] = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = TrainConfig{};
    cfg.epochs_per_task[1] = 5;
    CHECK(cfg.epochs_for(1) == 5);
    CHECK(cfg.epochs_for(2) == cfg.default_epochs);
}
