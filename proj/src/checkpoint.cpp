#include "odcl/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "odcl/textio.hpp"

namespace odcl {
namespace {

// Tensor payload is flattened row-major in declaration order and stored after
// the structural header, so the text and binary layouts share one parser.
template <class S>
void flatten(const Mat<S>& m, std::vector<S>& out) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
}

template <class S>
void unflatten(const std::vector<S>& data, std::size_t& cursor, Mat<S>& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = data[cursor++];
}

void write_le32(std::ostream& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    if constexpr (std::endian::native != std::endian::little) {
        bits = ((bits & 0xFF) << 24) | ((bits & 0xFF00) << 8) | ((bits >> 8) & 0xFF00) |
               (bits >> 24);
    }
    out.write(reinterpret_cast<const char*>(&bits), 4);
}

float read_le32(std::istream& in) {
    std::uint32_t bits = 0;
    in.read(reinterpret_cast<char*>(&bits), 4);
    if constexpr (std::endian::native != std::endian::little) {
        bits = ((bits & 0xFF) << 24) | ((bits & 0xFF00) << 8) | ((bits >> 8) & 0xFF00) |
               (bits >> 24);
    }
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

} // namespace

template <class S>
void save_checkpoint(const std::filesystem::path& path, const CheckpointData<S>& data,
                     bool binary) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError(path.string() + ": cannot open checkpoint for writing");

    out << "odcl-checkpoint v1\n";
    out << "floats " << (binary ? "binary" : "text") << "\n";
    const BackboneConfig& b = data.backbone;
    out << "backbone " << b.seed << " " << b.embed_dim << " " << b.num_layers << " "
        << b.num_heads << " " << b.patch_size << " " << b.max_text_tokens << "\n";
    out << "image_shape " << data.shape.h << " " << data.shape.w << " " << data.shape.c << "\n";
    out << "steps " << data.step_datasets.size();
    for (int d : data.step_datasets) out << " " << d;
    out << "\n";
    out << "prompts_enabled " << (data.prompts_enabled ? 1 : 0) << "\n";

    std::vector<S> payload;
    out << "prompt_count " << data.bank.size() << "\n";
    for (const auto& p : data.bank.prompts) {
        out << "prompt " << p.task_index << " " << p.vectors.rows() << " " << p.vectors.cols()
            << "\n";
        flatten(p.vectors, payload);
    }
    out << "adapter_count " << data.adapters.size() << "\n";
    for (const auto& a : data.adapters) {
        out << "adapter " << a.task_index << " " << a.rank << " " << a.layers.size() << "\n";
        for (std::size_t l = 0; l < a.layers.size(); ++l)
            for (int p = 0; p < 4; ++p)
                if (a.layers[l].deltas[p]) {
                    const auto& d = *a.layers[l].deltas[p];
                    out << "delta " << l << " " << proj_name(static_cast<Proj>(p)) << " "
                        << d.down.rows() << " " << d.down.cols() << "\n";
                    flatten(d.down, payload);
                    flatten(d.up, payload);
                }
        out << "end_adapter\n";
    }

    out << "data " << payload.size() << "\n";
    if (binary) {
        for (S v : payload) write_le32(out, static_cast<float>(v));
    } else {
        for (std::size_t i = 0; i < payload.size(); ++i) {
            out << format_float(payload[i]);
            out << ((i + 1) % 8 == 0 || i + 1 == payload.size() ? "\n" : " ");
        }
    }
    if (!out) throw ParseError(path.string() + ": checkpoint write failure");
}

template <class S>
CheckpointData<S> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path.string() + ": cannot open checkpoint");
    LineReader rd(in, path.filename().string());
    rd.require("odcl-checkpoint v1");

    auto float_line = split_whitespace(rd.require("floats"));
    if (float_line.size() != 2) rd.fail("expected 'floats text|binary'");
    const bool binary = float_line[1] == "binary";
    if (!binary && float_line[1] != "text") rd.fail("unknown float format '" + float_line[1] + "'");

    CheckpointData<S> data;
    {
        auto toks = split_whitespace(rd.require("backbone"));
        if (toks.size() != 7) rd.fail("expected 'backbone <seed> <dim> <layers> <heads> <patch> <max_tokens>'");
        data.backbone.seed = static_cast<std::uint64_t>(parse_u64(toks[1], rd, "seed"));
        data.backbone.embed_dim = static_cast<int>(parse_long(toks[2], rd, "embed_dim"));
        data.backbone.num_layers = static_cast<int>(parse_long(toks[3], rd, "num_layers"));
        data.backbone.num_heads = static_cast<int>(parse_long(toks[4], rd, "num_heads"));
        data.backbone.patch_size = static_cast<int>(parse_long(toks[5], rd, "patch_size"));
        data.backbone.max_text_tokens = static_cast<int>(parse_long(toks[6], rd, "max_text_tokens"));
    }
    {
        auto toks = split_whitespace(rd.require("image_shape"));
        if (toks.size() != 4) rd.fail("expected 'image_shape <h> <w> <c>'");
        data.shape.h = static_cast<int>(parse_long(toks[1], rd, "h"));
        data.shape.w = static_cast<int>(parse_long(toks[2], rd, "w"));
        data.shape.c = static_cast<int>(parse_long(toks[3], rd, "c"));
    }
    {
        auto toks = split_whitespace(rd.require("steps"));
        if (toks.size() < 2) rd.fail("expected 'steps <count> <datasets...>'");
        long count = parse_long(toks[1], rd, "step count");
        if (static_cast<long>(toks.size()) != count + 2) rd.fail("step dataset list mismatch");
        for (long i = 0; i < count; ++i)
            data.step_datasets.push_back(
                static_cast<int>(parse_long(toks[static_cast<std::size_t>(i + 2)], rd, "dataset")));
    }
    {
        auto toks = split_whitespace(rd.require("prompts_enabled"));
        if (toks.size() != 2) rd.fail("expected 'prompts_enabled 0|1'");
        data.prompts_enabled = parse_long(toks[1], rd, "prompts_enabled") != 0;
    }

    auto prompt_count = split_whitespace(rd.require("prompt_count"));
    long n_prompts = parse_long(prompt_count[1], rd, "prompt count");
    for (long k = 0; k < n_prompts; ++k) {
        auto toks = split_whitespace(rd.require("prompt"));
        if (toks.size() != 4) rd.fail("expected 'prompt <task> <rows> <cols>'");
        TaskPrompt<S> p;
        p.task_index = static_cast<int>(parse_long(toks[1], rd, "task"));
        p.vectors.resize(parse_long(toks[2], rd, "rows"), parse_long(toks[3], rd, "cols"));
        p.frozen = true;
        data.bank.prompts.push_back(std::move(p));
    }

    auto adapter_count = split_whitespace(rd.require("adapter_count"));
    long n_adapters = parse_long(adapter_count[1], rd, "adapter count");
    for (long k = 0; k < n_adapters; ++k) {
        auto toks = split_whitespace(rd.require("adapter"));
        if (toks.size() != 4) rd.fail("expected 'adapter <task> <rank> <layers>'");
        LowRankAdapter<S> a;
        a.task_index = static_cast<int>(parse_long(toks[1], rd, "task"));
        a.rank = static_cast<int>(parse_long(toks[2], rd, "rank"));
        a.layers.resize(static_cast<std::size_t>(parse_long(toks[3], rd, "layers")));
        std::string line;
        while (true) {
            if (!rd.next(line)) rd.fail("unterminated adapter block");
            if (line == "end_adapter") break;
            auto dt = split_whitespace(line);
            if (dt.size() != 5 || dt[0] != "delta")
                rd.fail("expected 'delta <layer> <proj> <rows> <cols>'");
            auto layer = static_cast<std::size_t>(parse_long(dt[1], rd, "layer"));
            if (layer >= a.layers.size()) rd.fail("delta layer out of range");
            Proj proj = proj_from_name(dt[2]);
            ProjDelta<S> d;
            long rows = parse_long(dt[3], rd, "rows");
            long cols = parse_long(dt[4], rd, "cols");
            d.down.resize(rows, cols);
            d.up.resize(cols, rows);
            a.layers[layer].deltas[static_cast<int>(proj)] = std::move(d);
        }
        data.adapters.push_back(std::move(a));
    }

    auto data_line = split_whitespace(rd.require("data"));
    if (data_line.size() != 2) rd.fail("expected 'data <count>'");
    const auto count = static_cast<std::size_t>(parse_long(data_line[1], rd, "payload size"));
    std::vector<S> payload;
    payload.reserve(count);
    if (binary) {
        for (std::size_t i = 0; i < count; ++i) payload.push_back(static_cast<S>(read_le32(in)));
        if (!in) throw ParseError(path.string() + ": truncated binary payload");
    } else {
        std::string line;
        while (payload.size() < count && rd.next(line))
            for (const auto& tok : split_whitespace(line))
                payload.push_back(static_cast<S>(parse_double(tok, rd, "payload value")));
        if (payload.size() != count) rd.fail("payload has fewer values than declared");
    }
    for (S v : payload)
        if (!std::isfinite(static_cast<double>(v)))
            throw ParseError(path.string() + ": non-finite checkpoint value");

    std::size_t cursor = 0;
    for (auto& p : data.bank.prompts) unflatten(payload, cursor, p.vectors);
    for (auto& a : data.adapters)
        for (auto& layer : a.layers)
            for (auto& delta : layer.deltas)
                if (delta) {
                    unflatten(payload, cursor, delta->down);
                    unflatten(payload, cursor, delta->up);
                }
    if (cursor != payload.size())
        throw ParseError(path.string() + ": payload larger than the declared tensors");
    return data;
}

template void save_checkpoint<float>(const std::filesystem::path&, const CheckpointData<float>&,
                                     bool);
template void save_checkpoint<double>(const std::filesystem::path&, const CheckpointData<double>&,
                                      bool);
template CheckpointData<float> load_checkpoint<float>(const std::filesystem::path&);
template CheckpointData<double> load_checkpoint<double>(const std::filesystem::path&);

} // namespace odcl
