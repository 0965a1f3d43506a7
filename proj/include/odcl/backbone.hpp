#ifndef ODCL_BACKBONE_HPP
#define ODCL_BACKBONE_HPP

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "odcl/errors.hpp"
#include "odcl/mask.hpp"
#include "odcl/stream.hpp"

namespace odcl {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

struct BackboneConfig {
    int embed_dim = 32;
    int num_layers = 2; // both encoders
    int num_heads = 4;
    int patch_size = 4;
    int max_text_tokens = 64;
    std::uint64_t seed = 11;

    void validate(const ImageShape& shape) const; // throws ConfigError / DimensionError
};

// ---------------------------------------------------------------------------
// Learnable attachments. Everything else in the backbone stays frozen.

template <class S>
struct TaskPrompt {
    int task_index = 0;
    Mat<S> vectors; // prompt_length x D
    bool frozen = false;

    int rows() const { return static_cast<int>(vectors.rows()); }
};

template <class S>
struct TaskPromptBank {
    std::vector<TaskPrompt<S>> prompts; // task_index 1..size(), in order

    int size() const { return static_cast<int>(prompts.size()); }
    int total_rows() const {
        int n = 0;
        for (const auto& p : prompts) n += p.rows();
        return n;
    }
    // first token row of the bank's idx-th prompt (0-based)
    int row_offset(int idx) const {
        int n = 0;
        for (int i = 0; i < idx; ++i) n += prompts[i].rows();
        return n;
    }
};

enum class Proj : int { Q = 0, K = 1, V = 2, O = 3 };

const char* proj_name(Proj p);
Proj proj_from_name(const std::string& name); // throws ConfigError

template <class S>
struct ProjDelta {
    Mat<S> down; // D x r
    Mat<S> up;   // r x D
};

template <class S>
struct AdapterLayer {
    std::array<std::optional<ProjDelta<S>>, 4> deltas; // indexed by Proj
};

// Additive low-rank deltas on the text encoder's attention projections.
template <class S>
struct LowRankAdapter {
    int task_index = 0;
    int rank = 0;
    std::vector<AdapterLayer<S>> layers;

    bool empty() const { return layers.empty(); }
    long parameter_count() const;
    LowRankAdapter<S> zeros_like() const;
    std::vector<Proj> targets() const;
};

template <class S>
struct VisualOutput {
    std::vector<Vec<S>> prompt_outputs; // pooled output per task, bank order
    Vec<S> cls_output;
};

// ---------------------------------------------------------------------------
// Forward traces (kept only while a gradient is needed).

template <class S>
struct LayerNormTrace {
    Mat<S> xhat;
    Vec<S> inv_std;
};

template <class S>
struct AttentionTrace {
    Mat<S> zn; // post-norm input
    Mat<S> q, k, v;
    std::vector<Mat<S>> softmax; // per head, zero where masked
    Mat<S> concat;
    Mat<S> wq_eff, wk_eff, wv_eff, wo_eff;
};

template <class S>
struct MlpTrace {
    Mat<S> zn;
    Mat<S> pre_act;
};

template <class S>
struct BlockTrace {
    LayerNormTrace<S> ln1, ln2;
    AttentionTrace<S> attn;
    MlpTrace<S> mlp;
};

template <class S>
struct EncoderTrace {
    Mat<S> z0;
    std::vector<BlockTrace<S>> blocks;
    LayerNormTrace<S> ln_out;
};

// ---------------------------------------------------------------------------

// Frozen dual encoder. Weights are fixed at construction from the seed and
// never change; forward passes are const and safe to run concurrently.
template <class S>
class Backbone {
public:
    Backbone(const BackboneConfig& config, const ImageShape& shape);

    const BackboneConfig& config() const { return cfg_; }
    const ImageShape& image_shape() const { return shape_; }
    int embed_dim() const { return cfg_.embed_dim; }
    int patch_count() const { return patches_; }

    // Image path: prompts prepended, masked per build_attention_mask, final
    // per-task prompt outputs pooled over each prompt's rows.
    VisualOutput<S> encode_image(const ImageSample& image, const TaskPromptBank<S>& bank,
                                 EncoderTrace<S>* trace = nullptr) const;

    // Gradient of the encoder output tokens back to the input tokens; rows of
    // the result aligned with [prompts | cls | patches].
    Mat<S> image_input_grad(const EncoderTrace<S>& trace, const Mat<S>& d_out) const;

    // Text path. Token sequence: [template, one token per character, end];
    // the embedding is the end token's output.
    std::vector<int> tokenize(const std::string& class_name) const;
    Vec<S> frozen_text_embedding(const std::string& class_name) const;
    Vec<S> adapted_text_embedding(const std::string& class_name, const LowRankAdapter<S>& adapter,
                                  EncoderTrace<S>* trace = nullptr) const;

    // Accumulates low-rank deltas' gradients for one text forward.
    void text_adapter_grad(const EncoderTrace<S>& trace, const LowRankAdapter<S>& adapter,
                           const Vec<S>& d_embedding, LowRankAdapter<S>& grad) const;

private:
    struct LayerNormW {
        Vec<S> gain, bias;
    };
    struct AttentionW {
        Mat<S> wq, wk, wv, wo;
        Vec<S> bq, bk, bv, bo;
    };
    struct MlpW {
        Mat<S> w1, w2;
        Vec<S> b1, b2;
    };
    struct BlockW {
        LayerNormW ln1, ln2;
        AttentionW attn;
        MlpW mlp;
    };
    struct StackW {
        std::vector<BlockW> blocks;
        LayerNormW ln_out;
    };

    Mat<S> encoder_forward(const Mat<S>& z0, const StackW& stack, const AttentionMask* mask,
                           const LowRankAdapter<S>* adapter, EncoderTrace<S>* trace) const;
    Mat<S> encoder_backward(const EncoderTrace<S>& trace, const StackW& stack,
                            const Mat<S>& d_out, const LowRankAdapter<S>* adapter,
                            LowRankAdapter<S>* adapter_grad) const;

    Mat<S> attention_forward(const Mat<S>& zn, const AttentionW& w, const AdapterLayer<S>* lora,
                             const AttentionMask* mask, AttentionTrace<S>* trace) const;
    Mat<S> attention_backward(const AttentionTrace<S>& trace, const Mat<S>& d_out,
                              const AdapterLayer<S>* lora, AdapterLayer<S>* lora_grad) const;

    BackboneConfig cfg_;
    ImageShape shape_;
    int patches_; // N

    Mat<S> patch_proj_; // (patch_size^2 * c) x D
    Vec<S> patch_bias_;
    Vec<S> cls_embed_;
    Mat<S> vis_pos_; // (N+1) x D, row 0 = class token
    StackW vis_;

    Mat<S> token_embed_; // vocab x D
    Mat<S> text_pos_;            // max_text_tokens x D
    StackW text_;
};

// ---------------------------------------------------------------------------
// Small combinators.

// v_t: elementwise mean of the task prompt output and the class token output.
template <class S>
Vec<S> fuse_visual(const Vec<S>& prompt_out, const Vec<S>& cls_out);

// w_y: elementwise mean of the adapted text embedding and the stored value.
template <class S>
Vec<S> refine_embedding(const Vec<S>& adapted, const Vec<S>& stored);

template <class S>
S cosine_score(const Vec<S>& a, const Vec<S>& b); // throws DegenerateVectorError

// Accumulates upstream * d cos(a,b) into da, db.
template <class S>
void cosine_score_grad(const Vec<S>& a, const Vec<S>& b, S upstream, Vec<S>& da, Vec<S>& db);

template <class S>
TaskPrompt<S> init_task_prompt(int task_index, int prompt_length, int embed_dim,
                               std::uint64_t experiment_seed);

template <class S>
LowRankAdapter<S> init_adapter(int task_index, int rank, const std::vector<Proj>& targets,
                               int num_layers, int embed_dim, std::uint64_t experiment_seed);

// Trainable scalars of the current task: the bank's last prompt plus the adapter.
template <class S>
long count_learnable_parameters(const TaskPromptBank<S>& bank, const LowRankAdapter<S>& adapter);

} // namespace odcl

#endif
