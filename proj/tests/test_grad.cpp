#include <doctest.h>

#include "fd_util.hpp"
#include "odcl/backbone.hpp"
#include "odcl/rng.hpp"

using namespace odcl;
using odcl::testutil::numeric_grad;
using odcl::testutil::relative_error;

namespace {

// D=8, two layers, two heads, 8x8 images in four patches: small enough for
// finite differences, deep enough to cross every backward path.
BackboneConfig grad_config() {
    BackboneConfig cfg;
    cfg.embed_dim = 8;
    cfg.num_layers = 2;
    cfg.num_heads = 2;
    cfg.patch_size = 4;
    cfg.seed = 21;
    return cfg;
}

const ImageShape kShape{8, 8, 3};

ImageSample random_image(std::uint64_t seed) {
    Rng rng(seed);
    ImageSample img;
    img.label = "probe";
    img.pixels.resize(static_cast<std::size_t>(kShape.pixel_count()));
    for (auto& p : img.pixels) p = static_cast<float>(rng.uniform());
    return img;
}

Vec<double> random_vec(int n, std::uint64_t seed) {
    Rng rng(seed);
    Vec<double> v(n);
    for (int i = 0; i < n; ++i) v(i) = rng.gaussian();
    return v;
}

void randomize_adapter(LowRankAdapter<double>& adapter, std::uint64_t seed) {
    Rng rng(seed);
    for (auto& layer : adapter.layers)
        for (auto& delta : layer.deltas)
            if (delta) {
                for (Eigen::Index i = 0; i < delta->down.rows(); ++i)
                    for (Eigen::Index j = 0; j < delta->down.cols(); ++j)
                        delta->down(i, j) = rng.gaussian(0.0, 0.05);
                for (Eigen::Index i = 0; i < delta->up.rows(); ++i)
                    for (Eigen::Index j = 0; j < delta->up.cols(); ++j)
                        delta->up(i, j) = rng.gaussian(0.0, 0.05);
            }
}

} // namespace

TEST_CASE("prompt gradient of cosine(fuse(encode)) matches finite differences") {
    BackboneConfig cfg = grad_config();
    Backbone<double> backbone(cfg, kShape);

    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const int prompt_length = seed % 2 == 0 ? 2 : 1;
        TaskPromptBank<double> bank;
        for (int t = 1; t <= 2; ++t)
            bank.prompts.push_back(
                init_task_prompt<double>(t, prompt_length, cfg.embed_dim, mix_seed(seed, t)));
        ImageSample img = random_image(seed * 31);
        Vec<double> target = random_vec(cfg.embed_dim, seed * 57);

        auto eval = [&]() {
            VisualOutput<double> out = backbone.encode_image(img, bank);
            Vec<double> fused = fuse_visual(out.prompt_outputs.back(), out.cls_output);
            return cosine_score(fused, target);
        };

        // analytic
        EncoderTrace<double> trace;
        VisualOutput<double> out = backbone.encode_image(img, bank, &trace);
        Vec<double> fused = fuse_visual(out.prompt_outputs.back(), out.cls_output);
        Vec<double> d_fused = Vec<double>::Zero(cfg.embed_dim);
        Vec<double> d_target = Vec<double>::Zero(cfg.embed_dim);
        cosine_score_grad(fused, target, 1.0, d_fused, d_target);

        const int rows = bank.total_rows();
        Mat<double> d_out = Mat<double>::Zero(rows + 1 + backbone.patch_count(), cfg.embed_dim);
        const int offset = bank.row_offset(bank.size() - 1);
        for (int r = 0; r < prompt_length; ++r)
            d_out.row(offset + r) = (d_fused * 0.5 / prompt_length).transpose();
        d_out.row(rows) = (d_fused * 0.5).transpose();
        Mat<double> d_z0 = backbone.image_input_grad(trace, d_out);
        Mat<double> analytic = d_z0.middleRows(offset, prompt_length);

        Mat<double> numeric = numeric_grad(eval, bank.prompts.back().vectors);
        CHECK(relative_error(analytic, numeric) < 1e-6);
    }
}

TEST_CASE("adapter gradient of cosine(refine(adapted)) matches finite differences") {
    BackboneConfig cfg = grad_config();
    Backbone<double> backbone(cfg, kShape);

    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        auto adapter = init_adapter<double>(1, 3, {Proj::Q, Proj::K, Proj::V, Proj::O},
                                            cfg.num_layers, cfg.embed_dim, seed);
        randomize_adapter(adapter, seed * 13);
        Vec<double> stored = random_vec(cfg.embed_dim, seed * 7);
        Vec<double> target = random_vec(cfg.embed_dim, seed * 9);
        const std::string name = "verdo_" + std::to_string(seed);

        auto eval = [&]() {
            Vec<double> g = backbone.adapted_text_embedding(name, adapter);
            return cosine_score(refine_embedding(g, stored), target);
        };

        EncoderTrace<double> trace;
        Vec<double> g = backbone.adapted_text_embedding(name, adapter, &trace);
        Vec<double> w = refine_embedding(g, stored);
        Vec<double> dw = Vec<double>::Zero(cfg.embed_dim);
        Vec<double> d_target = Vec<double>::Zero(cfg.embed_dim);
        cosine_score_grad(w, target, 1.0, dw, d_target);
        LowRankAdapter<double> grad = adapter.zeros_like();
        backbone.text_adapter_grad(trace, adapter, (dw * 0.5).eval(), grad);

        for (std::size_t layer = 0; layer < adapter.layers.size(); ++layer) {
            for (int p = 0; p < 4; ++p) {
                if (!adapter.layers[layer].deltas[p]) continue;
                auto& delta = *adapter.layers[layer].deltas[p];
                const auto& g_delta = *grad.layers[layer].deltas[p];
                CHECK(relative_error(g_delta.down, numeric_grad(eval, delta.down)) < 1e-6);
                CHECK(relative_error(g_delta.up, numeric_grad(eval, delta.up)) < 1e-6);
            }
        }
    }
}
