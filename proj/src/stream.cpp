#include "odcl/stream.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <unordered_set>

#include "odcl/rng.hpp"
#include "odcl/textio.hpp"

namespace odcl {
namespace {

constexpr double kPi = 3.14159265358979323846;

// Intrinsic per-sample noise, present even with zero domain shift.
constexpr double kBaseNoise = 0.02;

std::string make_word(Rng& rng, int syllables) {
    static constexpr char cons[] = "bdfgklmnprstvz";
    static constexpr char vow[] = "aeiou";
    std::string w;
    for (int s = 0; s < syllables; ++s) {
        w += cons[rng.uniform_int(static_cast<int>(sizeof(cons)) - 1)];
        w += vow[rng.uniform_int(static_cast<int>(sizeof(vow)) - 1)];
    }
    return w;
}

// Rendering parameters derived from the class name alone, so a class keeps
// its pattern when it reappears in a later domain.
struct ClassPattern {
    double freq, angle;
    std::array<double, 3> phase, amp, blob_amp;
    double blob_u, blob_v, blob_sigma;

    explicit ClassPattern(const std::string& name) {
        Rng rng(fnv1a64(name));
        freq = rng.uniform(1.5, 4.5);
        angle = rng.uniform(0.0, kPi);
        for (auto& p : phase) p = rng.uniform(0.0, 2.0 * kPi);
        for (auto& a : amp) a = rng.uniform(0.20, 0.40);
        for (auto& b : blob_amp) b = rng.uniform(-0.30, 0.30);
        blob_u = rng.uniform(0.2, 0.8);
        blob_v = rng.uniform(0.2, 0.8);
        blob_sigma = rng.uniform(0.15, 0.35);
    }

    double value(double u, double v, int ch) const {
        double axis = std::cos(angle) * u + std::sin(angle) * v;
        double wave = amp[ch] * std::sin(2.0 * kPi * freq * axis + phase[ch]);
        double du = u - blob_u;
        double dv = v - blob_v;
        double blob = blob_amp[ch] * std::exp(-(du * du + dv * dv) / (2.0 * blob_sigma * blob_sigma));
        return 0.5 + wave + blob;
    }
};

struct DomainTransform {
    std::array<double, 3> scale, offset;
    double noise_std;
    bool flip_h;

    DomainTransform(std::uint64_t stream_seed, int task_index, double strength) {
        Rng rng(mix_seed(mix_seed(stream_seed, 0xD0D0u), static_cast<std::uint64_t>(task_index)));
        for (auto& s : scale) s = 1.0 + strength * rng.uniform(-0.25, 0.25);
        for (auto& o : offset) o = strength * rng.uniform(-0.20, 0.20);
        noise_std = strength * rng.uniform(0.02, 0.08);
        flip_h = strength > 0.0 && rng.coin();
    }
};

ImageSample render_sample(const std::string& class_name, const ClassPattern& pattern,
                          const DomainTransform& domain, const ImageShape& shape,
                          std::uint64_t sample_seed) {
    Rng rng(sample_seed);
    ImageSample s;
    s.label = class_name;
    s.pixels.resize(static_cast<std::size_t>(shape.pixel_count()));
    double noise = std::sqrt(kBaseNoise * kBaseNoise + domain.noise_std * domain.noise_std);
    std::size_t idx = 0;
    for (int i = 0; i < shape.h; ++i) {
        double u = (i + 0.5) / shape.h;
        for (int j = 0; j < shape.w; ++j) {
            int jj = domain.flip_h ? shape.w - 1 - j : j;
            double v = (jj + 0.5) / shape.w;
            for (int ch = 0; ch < shape.c; ++ch) {
                double base = pattern.value(u, v, ch % 3);
                double x = domain.scale[ch % 3] * base + domain.offset[ch % 3] + noise * rng.gaussian();
                s.pixels[idx++] = static_cast<float>(std::clamp(x, 0.0, 1.0));
            }
        }
    }
    return s;
}

std::uint64_t sample_seed(std::uint64_t stream_seed, int task, const std::string& cls,
                          int split_tag, int sample_idx) {
    std::uint64_t s = mix_seed(stream_seed, static_cast<std::uint64_t>(task));
    s = mix_seed(s, fnv1a64(cls));
    s = mix_seed(s, static_cast<std::uint64_t>(split_tag));
    return mix_seed(s, static_cast<std::uint64_t>(sample_idx));
}

// --- binary sample files -------------------------------------------------

void write_le_floats(std::ofstream& out, const std::vector<float>& v) {
    static_assert(sizeof(float) == 4);
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(v.data()),
                  static_cast<std::streamsize>(v.size() * 4));
    } else {
        for (float f : v) {
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            char b[4] = {static_cast<char>(bits), static_cast<char>(bits >> 8),
                         static_cast<char>(bits >> 16), static_cast<char>(bits >> 24)};
            out.write(b, 4);
        }
    }
}

void read_le_floats(std::ifstream& in, std::vector<float>& v) {
    if constexpr (std::endian::native == std::endian::little) {
        in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * 4));
    } else {
        for (float& f : v) {
            unsigned char b[4];
            in.read(reinterpret_cast<char*>(b), 4);
            std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                                 (static_cast<std::uint32_t>(b[1]) << 8) |
                                 (static_cast<std::uint32_t>(b[2]) << 16) |
                                 (static_cast<std::uint32_t>(b[3]) << 24);
            std::memcpy(&f, &bits, 4);
        }
    }
}

void write_split(const std::filesystem::path& dir, const std::string& stem,
                 const std::vector<ImageSample>& samples) {
    std::ofstream bin(dir / (stem + ".bin"), std::ios::binary);
    std::ofstream idx(dir / (stem + ".idx"));
    if (!bin || !idx) throw ParseError("cannot open sample files for writing: " + stem);
    idx << "odcl-index v1\n";
    idx << "samples " << samples.size() << "\n";
    std::uint64_t offset = 0;
    for (const auto& s : samples) {
        idx << "sample " << s.label << " " << offset << "\n";
        write_le_floats(bin, s.pixels);
        offset += s.pixels.size() * 4;
    }
    if (!bin || !idx) throw ParseError("write failure for sample files: " + stem);
}

std::vector<ImageSample> load_split(const std::filesystem::path& dir, const std::string& bin_name,
                                    const std::string& idx_name, const ImageShape& shape) {
    std::ifstream idx_in(dir / idx_name);
    if (!idx_in) throw ParseError(idx_name + ": cannot open index file");
    LineReader rd(idx_in, idx_name);
    rd.require("odcl-index v1");
    auto head = split_whitespace(rd.require("samples"));
    if (head.size() != 2) rd.fail("expected 'samples <count>'");
    long count = parse_long(head[1], rd, "sample count");
    if (count < 0) rd.fail("negative sample count");

    std::ifstream bin(dir / bin_name, std::ios::binary);
    if (!bin) throw ParseError(bin_name + ": cannot open sample data file");

    std::vector<ImageSample> out;
    out.reserve(static_cast<std::size_t>(count));
    const std::size_t px = static_cast<std::size_t>(shape.pixel_count());
    for (long k = 0; k < count; ++k) {
        auto toks = split_whitespace(rd.require("sample"));
        if (toks.size() != 3) rd.fail("expected 'sample <label> <offset>'");
        ImageSample s;
        s.label = toks[1];
        long offset = parse_long(toks[2], rd, "sample offset");
        bin.seekg(offset);
        s.pixels.resize(px);
        read_le_floats(bin, s.pixels);
        if (!bin) throw ParseError(bin_name + ": truncated sample data at offset " +
                                   std::to_string(offset));
        for (float f : s.pixels)
            if (!std::isfinite(f) || f < 0.0f || f > 1.0f)
                throw ParseError(bin_name + ": pixel out of [0,1] at offset " +
                                 std::to_string(offset));
        out.push_back(std::move(s));
    }
    return out;
}

std::string split_stem(const std::filesystem::path& manifest, int task, const char* split) {
    return manifest.stem().string() + "_task" + std::to_string(task) + "_" + split;
}

} // namespace

int StreamConfig::overlap_count() const {
    // + epsilon so e.g. 0.3*10 (stored as 2.9999...) still floors to 3
    return static_cast<int>(std::floor(overlap_fraction * classes_per_task + 1e-9));
}

void StreamConfig::validate() const {
    if (num_tasks < 1) throw ConfigError("stream: num_tasks must be >= 1");
    if (classes_per_task < 1) throw ConfigError("stream: classes_per_task must be >= 1");
    if (overlap_fraction < 0.0 || overlap_fraction > 1.0)
        throw ConfigError("stream: overlap_fraction must lie in [0,1]");
    if (samples_per_class_train < 1 || samples_per_class_test < 1)
        throw ConfigError("stream: samples per class must be >= 1");
    if (shape.h < 1 || shape.w < 1 || shape.c < 1)
        throw ConfigError("stream: image shape must be positive");
    if (domain_shift_strength < 0.0)
        throw ConfigError("stream: domain_shift_strength must be >= 0");
}

TaskStream generate_stream(const StreamConfig& config) {
    config.validate();

    TaskStream stream;
    stream.shape = config.shape;

    Rng name_rng(mix_seed(config.seed, 0xC1A55u));
    Rng domain_rng(mix_seed(config.seed, 0xD00Du));
    Rng overlap_rng(mix_seed(config.seed, 0x0E71u));

    std::vector<std::string> pool; // classes seen in tasks 1..t-1
    int name_counter = 0;
    auto fresh_name = [&] {
        const int n = name_counter++;
        return make_word(name_rng, 2 + (n % 2)) + "_" + std::to_string(n);
    };

    std::set<std::string> used_domains;
    for (int t = 1; t <= config.num_tasks; ++t) {
        TaskSpec task;
        task.task_index = t;
        do {
            task.domain_id = make_word(domain_rng, 2);
        } while (!used_domains.insert(task.domain_id).second);

        int reuse = t == 1 ? 0 : config.overlap_count();
        if (reuse > static_cast<int>(pool.size()))
            throw ConfigError("stream: task " + std::to_string(t) + " requires " +
                              std::to_string(reuse) + " overlapping classes but only " +
                              std::to_string(pool.size()) + " earlier classes exist");

        if (reuse > 0) {
            std::vector<std::string> earlier = pool;
            overlap_rng.shuffle(earlier.begin(), earlier.end());
            task.class_set.assign(earlier.begin(), earlier.begin() + reuse);
        }
        while (static_cast<int>(task.class_set.size()) < config.classes_per_task) {
            task.class_set.push_back(fresh_name());
        }

        DomainTransform domain(config.seed, t, config.domain_shift_strength);
        for (const auto& cls : task.class_set) {
            ClassPattern pattern(cls);
            for (int k = 0; k < config.samples_per_class_train; ++k)
                task.train_samples.push_back(render_sample(
                    cls, pattern, domain, config.shape, sample_seed(config.seed, t, cls, 0, k)));
            for (int k = 0; k < config.samples_per_class_test; ++k)
                task.test_samples.push_back(render_sample(
                    cls, pattern, domain, config.shape, sample_seed(config.seed, t, cls, 1, k)));
        }

        for (const auto& cls : task.class_set)
            if (std::find(pool.begin(), pool.end(), cls) == pool.end()) pool.push_back(cls);
        stream.tasks.push_back(std::move(task));
    }
    return stream;
}

void write_manifest(const TaskStream& stream, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ParseError(path.string() + ": cannot open manifest for writing");
    const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");

    out << "odcl-stream v1\n";
    out << "image_shape " << stream.shape.h << " " << stream.shape.w << " " << stream.shape.c
        << "\n";
    out << "tasks " << stream.total_tasks() << "\n";
    for (const auto& task : stream.tasks) {
        out << "task " << task.task_index << "\n";
        out << "domain " << task.domain_id << "\n";
        out << "classes " << task.class_set.size() << "\n";
        for (const auto& cls : task.class_set) {
            if (cls.find_first_of(" \t:;") != std::string::npos)
                throw InputError("class name contains reserved characters: '" + cls + "'");
            out << "class " << cls << "\n";
        }
        std::string train_stem = split_stem(path, task.task_index, "train");
        std::string test_stem = split_stem(path, task.task_index, "test");
        out << "samples train " << task.train_samples.size() << " " << train_stem << ".bin "
            << train_stem << ".idx\n";
        out << "samples test " << task.test_samples.size() << " " << test_stem << ".bin "
            << test_stem << ".idx\n";
        out << "end_task\n";
        write_split(dir, train_stem, task.train_samples);
        write_split(dir, test_stem, task.test_samples);
    }
    if (!out) throw ParseError(path.string() + ": manifest write failure");
}

TaskStream load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string() + ": cannot open manifest");
    const auto dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    LineReader rd(in, path.filename().string());

    rd.require("odcl-stream v1");
    TaskStream stream;
    {
        auto toks = split_whitespace(rd.require("image_shape"));
        if (toks.size() != 4) rd.fail("expected 'image_shape <h> <w> <c>'");
        stream.shape.h = static_cast<int>(parse_long(toks[1], rd, "image height"));
        stream.shape.w = static_cast<int>(parse_long(toks[2], rd, "image width"));
        stream.shape.c = static_cast<int>(parse_long(toks[3], rd, "image channels"));
    }
    auto task_head = split_whitespace(rd.require("tasks"));
    if (task_head.size() != 2) rd.fail("expected 'tasks <count>'");
    long total = parse_long(task_head[1], rd, "task count");

    for (long t = 1; t <= total; ++t) {
        TaskSpec task;
        auto toks = split_whitespace(rd.require("task"));
        if (toks.size() != 2) rd.fail("expected 'task <index>'");
        task.task_index = static_cast<int>(parse_long(toks[1], rd, "task index"));
        if (task.task_index != t)
            rd.fail("task indices must be consecutive from 1, got " + toks[1]);

        toks = split_whitespace(rd.require("domain"));
        if (toks.size() != 2) rd.fail("expected 'domain <id>'");
        task.domain_id = toks[1];

        toks = split_whitespace(rd.require("classes"));
        if (toks.size() != 2) rd.fail("expected 'classes <count>'");
        long n_classes = parse_long(toks[1], rd, "class count");
        if (n_classes < 1) rd.fail("class set must be non-empty");
        std::unordered_set<std::string> seen;
        for (long k = 0; k < n_classes; ++k) {
            toks = split_whitespace(rd.require("class"));
            if (toks.size() != 2) rd.fail("expected 'class <name>'");
            if (!seen.insert(toks[1]).second) rd.fail("duplicate class name '" + toks[1] + "'");
            task.class_set.push_back(toks[1]);
        }

        for (int split = 0; split < 2; ++split) {
            toks = split_whitespace(rd.require("samples"));
            if (toks.size() != 5) rd.fail("expected 'samples <split> <count> <bin> <idx>'");
            const bool is_train = toks[1] == "train";
            if (!is_train && toks[1] != "test") rd.fail("unknown split '" + toks[1] + "'");
            long count = parse_long(toks[2], rd, "sample count");
            auto samples = load_split(dir, toks[3], toks[4], stream.shape);
            if (static_cast<long>(samples.size()) != count)
                rd.fail("sample count mismatch for " + toks[3]);
            for (const auto& s : samples)
                if (std::find(task.class_set.begin(), task.class_set.end(), s.label) ==
                    task.class_set.end())
                    rd.fail("sample label '" + s.label + "' not in task class set");
            (is_train ? task.train_samples : task.test_samples) = std::move(samples);
        }
        rd.require("end_task");
        stream.tasks.push_back(std::move(task));
    }
    return stream;
}

} // namespace odcl
