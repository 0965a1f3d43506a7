#include "odcl/backbone.hpp"

#include <cmath>

#include "odcl/rng.hpp"

namespace odcl {
namespace {

constexpr double kLnEps = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// Token ids for the toy tokenizer.
constexpr int kTemplateToken = 0;
constexpr int kEndToken = 1;
constexpr int kFirstPrintable = 32;
constexpr int kLastPrintable = 126;
constexpr int kTokenVocab = 2 + (kLastPrintable - kFirstPrintable + 1);

template <class S>
void fill_gaussian(Mat<S>& m, Rng& rng, double stddev) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            m(i, j) = static_cast<S>(rng.gaussian(0.0, stddev));
}

// Row-by-row product: each output row depends only on its own input row, so
// the class token and earlier prompts compute bit-identically no matter how
// many prompt rows are present.
template <class S>
Mat<S> linear_rows(const Mat<S>& x, const Mat<S>& w, const Vec<S>& b) {
    Mat<S> y(x.rows(), w.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        y.row(i) = x.row(i) * w + b.transpose();
    return y;
}

template <class S>
S gelu(S x) {
    return static_cast<S>(0.5) * x * (S(1) + static_cast<S>(std::erf(static_cast<double>(x) * kInvSqrt2)));
}

template <class S>
S gelu_grad(S x) {
    double xd = static_cast<double>(x);
    double phi = 0.5 * (1.0 + std::erf(xd * kInvSqrt2));
    double pdf = std::exp(-0.5 * xd * xd) * kInvSqrt2Pi;
    return static_cast<S>(phi + xd * pdf);
}

} // namespace

const char* proj_name(Proj p) {
    switch (p) {
        case Proj::Q: return "q";
        case Proj::K: return "k";
        case Proj::V: return "v";
        case Proj::O: return "o";
    }
    return "?";
}

Proj proj_from_name(const std::string& name) {
    if (name == "q") return Proj::Q;
    if (name == "k") return Proj::K;
    if (name == "v") return Proj::V;
    if (name == "o") return Proj::O;
    throw ConfigError("unknown adapter target projection '" + name + "' (expected q/k/v/o)");
}

void BackboneConfig::validate(const ImageShape& shape) const {
    if (embed_dim < 1 || num_layers < 1 || num_heads < 1)
        throw ConfigError("backbone: embed_dim, num_layers, num_heads must be positive");
    if (embed_dim % num_heads != 0)
        throw ConfigError("backbone: embed_dim " + std::to_string(embed_dim) +
                          " not divisible by num_heads " + std::to_string(num_heads));
    if (patch_size < 1 || shape.h % patch_size != 0 || shape.w % patch_size != 0)
        throw DimensionError("backbone: image " + std::to_string(shape.h) + "x" +
                             std::to_string(shape.w) + " not divisible by patch_size " +
                             std::to_string(patch_size));
    if (max_text_tokens < 3)
        throw ConfigError("backbone: max_text_tokens must be at least 3");
}

template <class S>
long LowRankAdapter<S>::parameter_count() const {
    long n = 0;
    for (const auto& layer : layers)
        for (const auto& d : layer.deltas)
            if (d) n += static_cast<long>(d->down.size() + d->up.size());
    return n;
}

template <class S>
LowRankAdapter<S> LowRankAdapter<S>::zeros_like() const {
    LowRankAdapter<S> z;
    z.task_index = task_index;
    z.rank = rank;
    z.layers.resize(layers.size());
    for (std::size_t l = 0; l < layers.size(); ++l)
        for (int p = 0; p < 4; ++p)
            if (layers[l].deltas[p]) {
                ProjDelta<S> d;
                d.down = Mat<S>::Zero(layers[l].deltas[p]->down.rows(),
                                      layers[l].deltas[p]->down.cols());
                d.up = Mat<S>::Zero(layers[l].deltas[p]->up.rows(), layers[l].deltas[p]->up.cols());
                z.layers[l].deltas[p] = std::move(d);
            }
    return z;
}

template <class S>
std::vector<Proj> LowRankAdapter<S>::targets() const {
    std::vector<Proj> out;
    if (layers.empty()) return out;
    for (int p = 0; p < 4; ++p)
        if (layers[0].deltas[p]) out.push_back(static_cast<Proj>(p));
    return out;
}

// ---------------------------------------------------------------------------

template <class S>
Backbone<S>::Backbone(const BackboneConfig& config, const ImageShape& shape)
    : cfg_(config), shape_(shape) {
    cfg_.validate(shape_);
    patches_ = (shape.h / cfg_.patch_size) * (shape.w / cfg_.patch_size);

    const int d = cfg_.embed_dim;
    const double stddev = 1.0 / std::sqrt(static_cast<double>(d));
    Rng rng(cfg_.seed);

    auto init_stack = [&](StackW& stack) {
        stack.blocks.resize(cfg_.num_layers);
        for (auto& blk : stack.blocks) {
            blk.ln1.gain = Vec<S>::Ones(d);
            blk.ln1.bias = Vec<S>::Zero(d);
            blk.ln2.gain = Vec<S>::Ones(d);
            blk.ln2.bias = Vec<S>::Zero(d);
            for (Mat<S>* w : {&blk.attn.wq, &blk.attn.wk, &blk.attn.wv, &blk.attn.wo}) {
                w->resize(d, d);
                fill_gaussian(*w, rng, stddev);
            }
            blk.attn.bq = Vec<S>::Zero(d);
            blk.attn.bk = Vec<S>::Zero(d);
            blk.attn.bv = Vec<S>::Zero(d);
            blk.attn.bo = Vec<S>::Zero(d);
            blk.mlp.w1.resize(d, 4 * d);
            fill_gaussian(blk.mlp.w1, rng, stddev);
            blk.mlp.b1 = Vec<S>::Zero(4 * d);
            blk.mlp.w2.resize(4 * d, d);
            fill_gaussian(blk.mlp.w2, rng, stddev);
            blk.mlp.b2 = Vec<S>::Zero(d);
        }
        stack.ln_out.gain = Vec<S>::Ones(d);
        stack.ln_out.bias = Vec<S>::Zero(d);
    };

    const int patch_dim = cfg_.patch_size * cfg_.patch_size * shape_.c;
    patch_proj_.resize(patch_dim, d);
    fill_gaussian(patch_proj_, rng, stddev);
    patch_bias_ = Vec<S>::Zero(d);
    Mat<S> tmp(1, d);
    fill_gaussian(tmp, rng, stddev);
    cls_embed_ = tmp.row(0).transpose();
    vis_pos_.resize(patches_ + 1, d);
    fill_gaussian(vis_pos_, rng, stddev);
    init_stack(vis_);

    token_embed_.resize(kTokenVocab, d);
    fill_gaussian(token_embed_, rng, stddev);
    text_pos_.resize(cfg_.max_text_tokens, d);
    fill_gaussian(text_pos_, rng, stddev);
    init_stack(text_);
}

// --- layer norm ------------------------------------------------------------

namespace {

template <class S, class LnW>
Mat<S> layer_norm_fwd(const Mat<S>& x, const LnW& w, LayerNormTrace<S>* tr) {
    const Eigen::Index d = x.cols();
    Mat<S> y(x.rows(), d);
    Mat<S> xhat(x.rows(), d);
    Vec<S> inv_std(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        S mu = x.row(i).mean();
        S var = (x.row(i).array() - mu).square().sum() / static_cast<S>(d);
        S istd = S(1) / std::sqrt(var + static_cast<S>(kLnEps));
        inv_std(i) = istd;
        xhat.row(i) = ((x.row(i).array() - mu) * istd).matrix();
        y.row(i) = xhat.row(i).cwiseProduct(w.gain.transpose()) + w.bias.transpose();
    }
    if (tr) {
        tr->xhat = std::move(xhat);
        tr->inv_std = std::move(inv_std);
    }
    return y;
}

template <class S, class LnW>
Mat<S> layer_norm_bwd(const LayerNormTrace<S>& tr, const LnW& w, const Mat<S>& dy) {
    const Eigen::Index d = dy.cols();
    Mat<S> dx(dy.rows(), d);
    Eigen::Matrix<S, 1, Eigen::Dynamic> dxhat(d);
    for (Eigen::Index i = 0; i < dy.rows(); ++i) {
        dxhat = dy.row(i).cwiseProduct(w.gain.transpose());
        S m1 = dxhat.mean();
        S m2 = dxhat.cwiseProduct(tr.xhat.row(i)).mean();
        dx.row(i) =
            (tr.inv_std(i) * (dxhat.array() - m1 - tr.xhat.row(i).array() * m2)).matrix();
    }
    return dx;
}

template <class S>
Mat<S> effective_weight(const Mat<S>& base, const AdapterLayer<S>* lora, Proj p) {
    if (lora && lora->deltas[static_cast<int>(p)]) {
        const auto& d = *lora->deltas[static_cast<int>(p)];
        return base + d.down * d.up;
    }
    return base;
}

// Chain rule through W_eff = W + down*up; needs the adapter's current values.
template <class S>
void accumulate_lora_grad(const Mat<S>& d_w_eff, const AdapterLayer<S>& lora, Proj p,
                          AdapterLayer<S>& grad) {
    const auto& d = *lora.deltas[static_cast<int>(p)];
    auto& g = *grad.deltas[static_cast<int>(p)];
    g.down += d_w_eff * d.up.transpose();
    g.up += d.down.transpose() * d_w_eff;
}

} // namespace

// --- attention ---------------------------------------------------------------

template <class S>
Mat<S> Backbone<S>::attention_forward(const Mat<S>& zn, const AttentionW& w,
                                      const AdapterLayer<S>* lora, const AttentionMask* mask,
                                      AttentionTrace<S>* trace) const {
    const Eigen::Index n = zn.rows();
    const int heads = cfg_.num_heads;
    const int dh = cfg_.embed_dim / heads;
    const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));

    Mat<S> wq = effective_weight(w.wq, lora, Proj::Q);
    Mat<S> wk = effective_weight(w.wk, lora, Proj::K);
    Mat<S> wv = effective_weight(w.wv, lora, Proj::V);
    Mat<S> wo = effective_weight(w.wo, lora, Proj::O);

    Mat<S> q = linear_rows(zn, wq, w.bq);
    Mat<S> k = linear_rows(zn, wk, w.bk);
    Mat<S> v = linear_rows(zn, wv, w.bv);

    std::vector<Mat<S>> softmax(heads);
    Mat<S> concat(n, cfg_.embed_dim);
    std::vector<S> scores(static_cast<std::size_t>(n));
    for (int h = 0; h < heads; ++h) {
        const int c0 = h * dh;
        Mat<S>& a = softmax[h];
        a = Mat<S>::Zero(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            S max_score = std::numeric_limits<S>::lowest();
            for (Eigen::Index j = 0; j < n; ++j) {
                if (mask && !mask->allowed(static_cast<int>(i), static_cast<int>(j))) continue;
                S s = q.row(i).segment(c0, dh).dot(k.row(j).segment(c0, dh)) * scale;
                scores[static_cast<std::size_t>(j)] = s;
                if (s > max_score) max_score = s;
            }
            S sum = S(0);
            for (Eigen::Index j = 0; j < n; ++j) {
                if (mask && !mask->allowed(static_cast<int>(i), static_cast<int>(j))) continue;
                S e = std::exp(scores[static_cast<std::size_t>(j)] - max_score);
                a(i, j) = e;
                sum += e;
            }
            Eigen::Matrix<S, 1, Eigen::Dynamic> out = Eigen::Matrix<S, 1, Eigen::Dynamic>::Zero(dh);
            for (Eigen::Index j = 0; j < n; ++j) {
                if (mask && !mask->allowed(static_cast<int>(i), static_cast<int>(j))) continue;
                a(i, j) /= sum;
                out += a(i, j) * v.row(j).segment(c0, dh);
            }
            concat.row(i).segment(c0, dh) = out;
        }
    }

    Mat<S> out = linear_rows(concat, wo, w.bo);
    if (trace) {
        trace->zn = zn;
        trace->q = std::move(q);
        trace->k = std::move(k);
        trace->v = std::move(v);
        trace->softmax = std::move(softmax);
        trace->concat = std::move(concat);
        trace->wq_eff = std::move(wq);
        trace->wk_eff = std::move(wk);
        trace->wv_eff = std::move(wv);
        trace->wo_eff = std::move(wo);
    }
    return out;
}

template <class S>
Mat<S> Backbone<S>::attention_backward(const AttentionTrace<S>& trace, const Mat<S>& d_out,
                                       const AdapterLayer<S>* lora,
                                       AdapterLayer<S>* lora_grad) const {
    const Eigen::Index n = trace.zn.rows();
    const int heads = cfg_.num_heads;
    const int dh = cfg_.embed_dim / heads;
    const S scale = static_cast<S>(1.0 / std::sqrt(static_cast<double>(dh)));

    Mat<S> d_concat = d_out * trace.wo_eff.transpose();
    Mat<S> dq = Mat<S>::Zero(n, cfg_.embed_dim);
    Mat<S> dk = Mat<S>::Zero(n, cfg_.embed_dim);
    Mat<S> dv = Mat<S>::Zero(n, cfg_.embed_dim);

    for (int h = 0; h < heads; ++h) {
        const int c0 = h * dh;
        const Mat<S>& a = trace.softmax[h];
        auto d_oh = d_concat.middleCols(c0, dh);
        auto vh = trace.v.middleCols(c0, dh);
        auto qh = trace.q.middleCols(c0, dh);
        auto kh = trace.k.middleCols(c0, dh);

        Mat<S> da = d_oh * vh.transpose(); // n x n
        dv.middleCols(c0, dh) += a.transpose() * d_oh;
        Mat<S> prod = a.cwiseProduct(da);
        Vec<S> row_sums = prod.rowwise().sum();
        // masked entries have a == 0 and drop out
        Mat<S> ds = (prod.array() - a.array().colwise() * row_sums.array()).matrix();
        dq.middleCols(c0, dh) += scale * (ds * kh);
        dk.middleCols(c0, dh) += scale * (ds.transpose() * qh);
    }

    Mat<S> dzn = dq * trace.wq_eff.transpose() + dk * trace.wk_eff.transpose() +
                 dv * trace.wv_eff.transpose();
    if (lora && lora_grad) {
        if (lora->deltas[static_cast<int>(Proj::Q)])
            accumulate_lora_grad<S>(trace.zn.transpose() * dq, *lora, Proj::Q, *lora_grad);
        if (lora->deltas[static_cast<int>(Proj::K)])
            accumulate_lora_grad<S>(trace.zn.transpose() * dk, *lora, Proj::K, *lora_grad);
        if (lora->deltas[static_cast<int>(Proj::V)])
            accumulate_lora_grad<S>(trace.zn.transpose() * dv, *lora, Proj::V, *lora_grad);
        if (lora->deltas[static_cast<int>(Proj::O)])
            accumulate_lora_grad<S>(trace.concat.transpose() * d_out, *lora, Proj::O, *lora_grad);
    }
    return dzn;
}

// --- encoder stack -----------------------------------------------------------

template <class S>
Mat<S> Backbone<S>::encoder_forward(const Mat<S>& z0, const StackW& stack,
                                    const AttentionMask* mask, const LowRankAdapter<S>* adapter,
                                    EncoderTrace<S>* trace) const {
    if (trace) {
        trace->z0 = z0;
        trace->blocks.resize(stack.blocks.size());
    }
    Mat<S> z = z0;
    for (std::size_t l = 0; l < stack.blocks.size(); ++l) {
        const BlockW& blk = stack.blocks[l];
        const AdapterLayer<S>* lora = adapter && !adapter->empty() ? &adapter->layers[l] : nullptr;
        BlockTrace<S>* bt = trace ? &trace->blocks[l] : nullptr;

        Mat<S> zn = layer_norm_fwd(z, blk.ln1, bt ? &bt->ln1 : nullptr);
        z += attention_forward(zn, blk.attn, lora, mask, bt ? &bt->attn : nullptr);

        Mat<S> zn2 = layer_norm_fwd(z, blk.ln2, bt ? &bt->ln2 : nullptr);
        Mat<S> pre = linear_rows(zn2, blk.mlp.w1, blk.mlp.b1);
        Mat<S> act = pre.unaryExpr([](S x) { return gelu(x); });
        z += linear_rows(act, blk.mlp.w2, blk.mlp.b2);
        if (bt) {
            bt->mlp.zn = std::move(zn2);
            bt->mlp.pre_act = std::move(pre);
        }
    }
    return layer_norm_fwd(z, stack.ln_out, trace ? &trace->ln_out : nullptr);
}

template <class S>
Mat<S> Backbone<S>::encoder_backward(const EncoderTrace<S>& trace, const StackW& stack,
                                     const Mat<S>& d_out, const LowRankAdapter<S>* adapter,
                                     LowRankAdapter<S>* adapter_grad) const {
    // masked softmax entries are zero in the trace, so no mask is needed here
    Mat<S> dz = layer_norm_bwd(trace.ln_out, stack.ln_out, d_out);
    for (int l = static_cast<int>(stack.blocks.size()) - 1; l >= 0; --l) {
        const BlockW& blk = stack.blocks[l];
        const BlockTrace<S>& bt = trace.blocks[static_cast<std::size_t>(l)];

        // z2 = z1 + mlp(ln2(z1))
        Mat<S> d_act = dz * blk.mlp.w2.transpose();
        Mat<S> d_pre =
            d_act.cwiseProduct(bt.mlp.pre_act.unaryExpr([](S x) { return gelu_grad(x); }));
        Mat<S> d_zn2 = d_pre * blk.mlp.w1.transpose();
        dz += layer_norm_bwd(bt.ln2, blk.ln2, d_zn2);

        // z1 = z0 + attn(ln1(z0))
        const AdapterLayer<S>* la = adapter && !adapter->empty() ? &adapter->layers[l] : nullptr;
        AdapterLayer<S>* lg =
            adapter_grad && !adapter_grad->empty() ? &adapter_grad->layers[l] : nullptr;
        Mat<S> d_zn = attention_backward(bt.attn, dz, la, lg);
        dz += layer_norm_bwd(bt.ln1, blk.ln1, d_zn);
    }
    return dz;
}

// --- image path ----------------------------------------------------------------

template <class S>
VisualOutput<S> Backbone<S>::encode_image(const ImageSample& image, const TaskPromptBank<S>& bank,
                                          EncoderTrace<S>* trace) const {
    if (static_cast<int>(image.pixels.size()) != shape_.pixel_count())
        throw DimensionError("encode_image: expected " + std::to_string(shape_.pixel_count()) +
                             " pixels, got " + std::to_string(image.pixels.size()));
    const int d = cfg_.embed_dim;
    const int r = bank.total_rows();
    const int n = patches_;
    Mat<S> z0(r + 1 + n, d);

    int row = 0;
    for (const auto& prompt : bank.prompts) {
        if (prompt.vectors.cols() != d)
            throw DimensionError("encode_image: prompt dim mismatch for task " +
                                 std::to_string(prompt.task_index));
        z0.middleRows(row, prompt.rows()) = prompt.vectors;
        row += prompt.rows();
    }
    z0.row(r) = cls_embed_.transpose() + vis_pos_.row(0);

    const int p = cfg_.patch_size;
    const int grid_w = shape_.w / p;
    const int patch_dim = p * p * shape_.c;
    Vec<S> patch(patch_dim);
    for (int pi = 0; pi < n; ++pi) {
        const int gi = pi / grid_w;
        const int gj = pi % grid_w;
        int idx = 0;
        for (int di = 0; di < p; ++di) {
            const int base = ((gi * p + di) * shape_.w + gj * p) * shape_.c;
            for (int dj = 0; dj < p * shape_.c; ++dj)
                patch(idx++) = static_cast<S>(image.pixels[static_cast<std::size_t>(base + dj)]);
        }
        z0.row(r + 1 + pi) =
            (patch.transpose() * patch_proj_) + patch_bias_.transpose() + vis_pos_.row(pi + 1);
    }

    AttentionMask mask = build_attention_mask(r, n);
    Mat<S> out = encoder_forward(z0, vis_, &mask, nullptr, trace);

    VisualOutput<S> result;
    result.cls_output = out.row(r).transpose();
    result.prompt_outputs.reserve(static_cast<std::size_t>(bank.size()));
    int offset = 0;
    for (const auto& prompt : bank.prompts) {
        Vec<S> pooled = Vec<S>::Zero(d);
        for (int k = 0; k < prompt.rows(); ++k) pooled += out.row(offset + k).transpose();
        pooled /= static_cast<S>(prompt.rows());
        result.prompt_outputs.push_back(std::move(pooled));
        offset += prompt.rows();
    }
    return result;
}

template <class S>
Mat<S> Backbone<S>::image_input_grad(const EncoderTrace<S>& trace, const Mat<S>& d_out) const {
    return encoder_backward(trace, vis_, d_out, nullptr, nullptr);
}

// --- text path -------------------------------------------------------------------

template <class S>
std::vector<int> Backbone<S>::tokenize(const std::string& class_name) const {
    if (class_name.empty()) throw InputError("tokenize: empty class name");
    if (static_cast<int>(class_name.size()) + 2 > cfg_.max_text_tokens)
        throw InputError("tokenize: class name '" + class_name + "' exceeds max_text_tokens " +
                         std::to_string(cfg_.max_text_tokens));
    std::vector<int> ids;
    ids.reserve(class_name.size() + 2);
    ids.push_back(kTemplateToken);
    for (unsigned char c : class_name) {
        if (c < kFirstPrintable || c > kLastPrintable)
            throw InputError("tokenize: class name '" + class_name +
                             "' contains a non-printable character");
        ids.push_back(2 + (c - kFirstPrintable));
    }
    ids.push_back(kEndToken);
    return ids;
}

template <class S>
Vec<S> Backbone<S>::frozen_text_embedding(const std::string& class_name) const {
    LowRankAdapter<S> none;
    return adapted_text_embedding(class_name, none, nullptr);
}

template <class S>
Vec<S> Backbone<S>::adapted_text_embedding(const std::string& class_name,
                                           const LowRankAdapter<S>& adapter,
                                           EncoderTrace<S>* trace) const {
    if (!adapter.empty() && static_cast<int>(adapter.layers.size()) != cfg_.num_layers)
        throw DimensionError("adapter has " + std::to_string(adapter.layers.size()) +
                             " layers, text encoder has " + std::to_string(cfg_.num_layers));
    std::vector<int> ids = tokenize(class_name);
    const int n = static_cast<int>(ids.size());
    Mat<S> z0(n, cfg_.embed_dim);
    for (int i = 0; i < n; ++i) z0.row(i) = token_embed_.row(ids[i]) + text_pos_.row(i);

    Mat<S> out = encoder_forward(z0, text_, nullptr, adapter.empty() ? nullptr : &adapter, trace);
    return out.row(n - 1).transpose();
}

template <class S>
void Backbone<S>::text_adapter_grad(const EncoderTrace<S>& trace, const LowRankAdapter<S>& adapter,
                                    const Vec<S>& d_embedding, LowRankAdapter<S>& grad) const {
    Mat<S> d_out = Mat<S>::Zero(trace.z0.rows(), cfg_.embed_dim);
    d_out.row(trace.z0.rows() - 1) = d_embedding.transpose();
    encoder_backward(trace, text_, d_out, &adapter, &grad);
}

// --- combinators --------------------------------------------------------------

template <class S>
Vec<S> fuse_visual(const Vec<S>& prompt_out, const Vec<S>& cls_out) {
    if (prompt_out.size() != cls_out.size())
        throw DimensionError("fuse_visual: dimension mismatch");
    return ((prompt_out + cls_out) * static_cast<S>(0.5)).eval();
}

template <class S>
Vec<S> refine_embedding(const Vec<S>& adapted, const Vec<S>& stored) {
    if (adapted.size() != stored.size())
        throw DimensionError("refine_embedding: dimension mismatch");
    return ((adapted + stored) * static_cast<S>(0.5)).eval();
}

template <class S>
S cosine_score(const Vec<S>& a, const Vec<S>& b) {
    if (a.size() != b.size()) throw DimensionError("cosine_score: dimension mismatch");
    S na = a.norm();
    S nb = b.norm();
    if (na == S(0) || nb == S(0))
        throw DegenerateVectorError("cosine_score: zero-norm input vector");
    return a.dot(b) / (na * nb);
}

template <class S>
void cosine_score_grad(const Vec<S>& a, const Vec<S>& b, S upstream, Vec<S>& da, Vec<S>& db) {
    S na = a.norm();
    S nb = b.norm();
    if (na == S(0) || nb == S(0))
        throw DegenerateVectorError("cosine_score_grad: zero-norm input vector");
    S inv = S(1) / (na * nb);
    S c = a.dot(b) * inv;
    da += upstream * (b * inv - a * (c / (na * na)));
    db += upstream * (a * inv - b * (c / (nb * nb)));
}

template <class S>
TaskPrompt<S> init_task_prompt(int task_index, int prompt_length, int embed_dim,
                               std::uint64_t experiment_seed) {
    if (task_index < 1 || prompt_length < 1 || embed_dim < 1)
        throw InputError("init_task_prompt: bad arguments");
    TaskPrompt<S> prompt;
    prompt.task_index = task_index;
    prompt.vectors.resize(prompt_length, embed_dim);
    Rng rng(mix_seed(mix_seed(experiment_seed, 0x9607u), static_cast<std::uint64_t>(task_index)));
    fill_gaussian(prompt.vectors, rng, 0.02);
    return prompt;
}

template <class S>
LowRankAdapter<S> init_adapter(int task_index, int rank, const std::vector<Proj>& targets,
                               int num_layers, int embed_dim, std::uint64_t experiment_seed) {
    if (task_index < 1 || rank < 1 || num_layers < 1 || targets.empty())
        throw InputError("init_adapter: bad arguments");
    LowRankAdapter<S> adapter;
    adapter.task_index = task_index;
    adapter.rank = rank;
    adapter.layers.resize(static_cast<std::size_t>(num_layers));
    Rng rng(mix_seed(mix_seed(experiment_seed, 0xADA7u), static_cast<std::uint64_t>(task_index)));
    for (auto& layer : adapter.layers)
        for (Proj p : targets) {
            ProjDelta<S> d;
            d.down.resize(embed_dim, rank);
            fill_gaussian(d.down, rng, 0.02);
            d.up = Mat<S>::Zero(rank, embed_dim); // adapted == frozen until trained
            layer.deltas[static_cast<int>(p)] = std::move(d);
        }
    return adapter;
}

template <class S>
long count_learnable_parameters(const TaskPromptBank<S>& bank, const LowRankAdapter<S>& adapter) {
    long n = adapter.parameter_count();
    if (bank.size() > 0) n += static_cast<long>(bank.prompts.back().vectors.size());
    return n;
}

// --- explicit instantiations ----------------------------------------------------

#define ODCL_INSTANTIATE(S)                                                                       \
    template struct LowRankAdapter<S>;                                                           \
    template class Backbone<S>;                                                                  \
    template Vec<S> fuse_visual<S>(const Vec<S>&, const Vec<S>&);                                \
    template Vec<S> refine_embedding<S>(const Vec<S>&, const Vec<S>&);                           \
    template S cosine_score<S>(const Vec<S>&, const Vec<S>&);                                    \
    template void cosine_score_grad<S>(const Vec<S>&, const Vec<S>&, S, Vec<S>&, Vec<S>&);       \
    template TaskPrompt<S> init_task_prompt<S>(int, int, int, std::uint64_t);                    \
    template LowRankAdapter<S> init_adapter<S>(int, int, const std::vector<Proj>&, int, int,     \
                                               std::uint64_t);                                   \
    template long count_learnable_parameters<S>(const TaskPromptBank<S>&, const LowRankAdapter<S>&);

ODCL_INSTANTIATE(float)
ODCL_INSTANTIATE(double)

#undef ODCL_INSTANTIATE

} // namespace odcl
