#include "odcl/verify.hpp"

#include <cmath>
#include <filesystem>
#include <functional>

#include "odcl/backbone.hpp"
#include "odcl/mask.hpp"
#include "odcl/metrics.hpp"
#include "odcl/rng.hpp"
#include "odcl/trainer.hpp"
#include "odcl/vocab.hpp"

namespace odcl {
namespace {

ImageSample random_image(const ImageShape& shape, std::uint64_t seed) {
    Rng rng(seed);
    ImageSample img;
    img.label = "probe";
    img.pixels.resize(static_cast<std::size_t>(shape.pixel_count()));
    for (auto& p : img.pixels) p = static_cast<float>(rng.uniform());
    return img;
}

bool check_mask() {
    for (int t = 0; t <= 4; ++t)
        for (int n : {1, 4, 16}) {
            AttentionMask m = build_attention_mask(t, n);
            for (int q = 0; q < m.size(); ++q)
                for (int k = 0; k < m.size(); ++k) {
                    const bool qp = q < t, kp = k < t;
                    bool want = qp ? (!kp || k <= q) : !kp;
                    if (m.allowed(q, k) != want) return false;
                }
            if (m.false_count() != static_cast<std::size_t>(t * (t - 1) / 2 + (n + 1) * t))
                return false;
        }
    return true;
}

bool check_cls_invariance_and_prefix() {
    const ImageShape shape{16, 16, 3};
    BackboneConfig cfg;
    cfg.seed = 5;
    Backbone<float> backbone(cfg, shape);
    for (std::uint64_t trial = 0; trial < 10; ++trial) {
        ImageSample img = random_image(shape, 40 + trial);
        VisualOutput<float> base = backbone.encode_image(img, {});
        TaskPromptBank<float> bank;
        for (int t = 1; t <= 3; ++t) {
            bank.prompts.push_back(init_task_prompt<float>(t, 1, cfg.embed_dim, trial * 5 + t));
            VisualOutput<float> with = backbone.encode_image(img, bank);
            if ((with.cls_output - base.cls_output).lpNorm<Eigen::Infinity>() >= 1e-6f)
                return false;
            for (int i = 1; i < t; ++i) {
                TaskPromptBank<float> trunc;
                trunc.prompts.assign(bank.prompts.begin(), bank.prompts.begin() + i);
                VisualOutput<float> small = backbone.encode_image(img, trunc);
                if ((small.prompt_outputs[i - 1] - with.prompt_outputs[i - 1])
                        .lpNorm<Eigen::Infinity>() >= 1e-6f)
                    return false;
            }
        }
    }
    return true;
}

bool check_adapter_identity() {
    const ImageShape shape{16, 16, 3};
    BackboneConfig cfg;
    cfg.seed = 6;
    Backbone<float> backbone(cfg, shape);
    auto adapter = init_adapter<float>(1, 5, {Proj::Q, Proj::V}, cfg.num_layers, cfg.embed_dim, 7);
    return backbone.frozen_text_embedding("bodu_3") ==
           backbone.adapted_text_embedding("bodu_3", adapter);
}

bool check_momentum() {
    ClassVocabulary<double> vocab(0.1);
    Rng rng(8);
    Vec<double> w(16), v0(16);
    for (int i = 0; i < 16; ++i) {
        w(i) = rng.gaussian();
        v0(i) = rng.gaussian();
    }
    vocab.ensure_entries({"x"}, [&](const std::string&) { return v0; }, 1);
    double d0 = (v0 - w).norm();
    Vec<double> vk = v0;
    for (int k = 1; k <= 50; ++k) vk = vocab.momentum_update("x", w);
    double expected = std::pow(0.9, 50) * d0;
    return std::abs((vk - w).norm() - expected) <= 1e-6 * expected;
}

bool check_metrics() {
    AccuracyMatrix m(3, Mode::TIL);
    double rows[3][3] = {{0.8, 0.7, 0.6}, {0.5, 0.9, 0.8}, {0.4, 0.45, 0.95}};
    for (int t = 1; t <= 3; ++t)
        for (int i = 1; i <= 3; ++i) m.record(t, i, rows[t - 1][i - 1]);
    MetricReport r = compute_report(m);
    return std::abs(r.avg - 0.6777777777777778) < 1e-12 && std::abs(r.last - 47.0 / 60.0) < 1e-12 &&
           std::abs(r.transfer.value() - 0.4625) < 1e-12 &&
           std::abs(r.forgetting - 2.5 / 3.0) < 1e-12;
}

bool check_energy() {
    std::vector<double> uniform{0.5, 0.5, 0.5, 0.5};
    if (std::abs(energy_score(uniform, 0.01) - (0.5 + 0.01 * std::log(4.0))) > 1e-12) return false;
    std::vector<double> big{1e4, -1e4};
    if (!std::isfinite(energy_score(big, 0.01))) return false;
    std::vector<double> dominant{0.9, -1.0, -1.0};
    return std::abs(energy_score(dominant, 0.01) - 0.9) < 1e-6;
}

bool check_schedule() {
    if (stage_boundary(10) != 5 || stage_boundary(11) != 6 || stage_boundary(1) != 1) return false;
    std::vector<double> v{1.0, 2.0, 3.0, 4.0};
    return nearest_rank_percentile(v, 0.5) == 2.0;
}

bool check_vocab_round_trip() {
    auto path = std::filesystem::temp_directory_path() / "odcl_verify.vocab";
    ClassVocabulary<float> vocab(0.1f);
    Rng rng(10);
    vocab.ensure_entries({"kamo_1", "tilu_2"},
                         [&](const std::string&) {
                             Vec<float> v(8);
                             for (int i = 0; i < 8; ++i) v(i) = static_cast<float>(rng.gaussian());
                             return v;
                         },
                         1);
    vocab.save(path);
    bool ok = ClassVocabulary<float>::load(path) == vocab;
    std::filesystem::remove(path);
    return ok;
}

} // namespace

bool run_verify_suite(std::ostream& out) {
    struct Check {
        const char* name;
        std::function<bool()> fn;
    };
    const Check checks[] = {
        {"attention mask block structure", check_mask},
        {"class-token invariance and prompt prefix stability", check_cls_invariance_and_prefix},
        {"adapter identity at initialization", check_adapter_identity},
        {"vocabulary momentum convergence", check_momentum},
        {"metric formulas", check_metrics},
        {"energy score", check_energy},
        {"stage schedule and percentile", check_schedule},
        {"vocabulary persistence round trip", check_vocab_round_trip},
    };
    bool all_ok = true;
    for (const auto& check : checks) {
        bool ok = false;
        try {
            ok = check.fn();
        } catch (const std::exception& e) {
            out << "FAIL " << check.name << " (" << e.what() << ")\n";
            all_ok = false;
            continue;
        }
        out << (ok ? "ok   " : "FAIL ") << check.name << "\n";
        all_ok = all_ok && ok;
    }
    return all_ok;
}

} // namespace odcl
