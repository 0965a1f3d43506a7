#ifndef ODCL_STREAM_HPP
#define ODCL_STREAM_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "odcl/errors.hpp"

namespace odcl {

struct ImageShape {
    int h = 16;
    int w = 16;
    int c = 3;

    int pixel_count() const { return h * w * c; }
    bool operator==(const ImageShape&) const = default;
};

struct ImageSample {
    std::vector<float> pixels; // h*w*c, row-major (i, j, channel), values in [0,1]
    std::string label;

    bool operator==(const ImageSample&) const = default;
};

struct TaskSpec {
    int task_index = 0; // 1-based position in the stream
    std::string domain_id;
    std::vector<std::string> class_set;
    std::vector<ImageSample> train_samples;
    std::vector<ImageSample> test_samples;

    bool operator==(const TaskSpec&) const = default;
};

struct TaskStream {
    ImageShape shape;
    std::vector<TaskSpec> tasks;

    int total_tasks() const { return static_cast<int>(tasks.size()); }
    bool operator==(const TaskStream&) const = default;
};

struct StreamConfig {
    int num_tasks = 3;
    int classes_per_task = 4;
    double overlap_fraction = 0.0; // share of each task's classes reused from earlier tasks
    int samples_per_class_train = 32;
    int samples_per_class_test = 32;
    ImageShape shape{16, 16, 3};
    double domain_shift_strength = 1.0;
    std::uint64_t seed = 1;

    // Classes task t>1 must reuse from the earlier pool.
    int overlap_count() const;
    void validate() const; // throws ConfigError
};

// Deterministic synthetic stream: one domain per task, per-class parametric
// patterns, per-domain affine color shift + noise + optional flip.
TaskStream generate_stream(const StreamConfig& config);

// Manifest: text file at `path` plus `<stem>_task<k>_{train,test}.bin/.idx`
// side files in the same directory (flat float32 little-endian pixel arrays).
void write_manifest(const TaskStream& stream, const std::filesystem::path& path);
TaskStream load_manifest(const std::filesystem::path& path);

} // namespace odcl

#endif
