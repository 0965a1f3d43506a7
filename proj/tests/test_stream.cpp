#include <doctest.h>

#include <array>
#include <filesystem>
#include <fstream>
#include <set>
#include <unordered_set>

#include "odcl/stream.hpp"

using namespace odcl;

namespace {

StreamConfig small_config() {
    StreamConfig cfg;
    cfg.num_tasks = 3;
    cfg.classes_per_task = 4;
    cfg.overlap_fraction = 0.0;
    cfg.samples_per_class_train = 4;
    cfg.samples_per_class_test = 3;
    cfg.shape = {8, 8, 3};
    cfg.domain_shift_strength = 1.0;
    cfg.seed = 7;
    return cfg;
}

std::set<std::string> union_before(const TaskStream& s, int t) {
    std::set<std::string> u;
    for (int i = 0; i < t - 1; ++i)
        u.insert(s.tasks[i].class_set.begin(), s.tasks[i].class_set.end());
    return u;
}

} // namespace

TEST_CASE("zero overlap yields pairwise-disjoint class sets") {
    TaskStream s = generate_stream(small_config());
    REQUIRE(s.total_tasks() == 3);
    std::set<std::string> all;
    for (const auto& task : s.tasks) {
        CHECK(task.class_set.size() == 4);
        for (const auto& cls : task.class_set) CHECK(all.insert(cls).second);
    }
    CHECK(all.size() == 12);
}

TEST_CASE("overlap fraction is honored exactly") {
    StreamConfig cfg = small_config();
    cfg.overlap_fraction = 0.5;
    TaskStream s = generate_stream(cfg);
    for (int t = 2; t <= 3; ++t) {
        auto earlier = union_before(s, t);
        int shared = 0;
        for (const auto& cls : s.tasks[t - 1].class_set)
            if (earlier.count(cls)) ++shared;
        CHECK(shared == 2); // floor(0.5 * 4)
    }
}

TEST_CASE("same config and seed give identical streams") {
    StreamConfig cfg = small_config();
    cfg.overlap_fraction = 0.25;
    TaskStream a = generate_stream(cfg);
    TaskStream b = generate_stream(cfg);
    CHECK(a == b);

    cfg.seed = 8;
    TaskStream c = generate_stream(cfg);
    CHECK_FALSE(a == c);
}

TEST_CASE("samples respect shape, range and labels") {
    TaskStream s = generate_stream(small_config());
    for (const auto& task : s.tasks) {
        CHECK_FALSE(task.domain_id.empty());
        for (const auto* split : {&task.train_samples, &task.test_samples}) {
            for (const auto& sample : *split) {
                CHECK(sample.pixels.size() == 8u * 8u * 3u);
                for (float v : sample.pixels) {
                    CHECK(v >= 0.0f);
                    CHECK(v <= 1.0f);
                }
                CHECK(std::find(task.class_set.begin(), task.class_set.end(), sample.label) !=
                      task.class_set.end());
            }
        }
        // train/test disjoint by sample identity
        std::set<std::vector<float>> train_px;
        for (const auto& smp : task.train_samples) train_px.insert(smp.pixels);
        for (const auto& smp : task.test_samples) CHECK(train_px.count(smp.pixels) == 0);
    }
}

TEST_CASE("domain shift separates per-domain statistics of a shared class") {
    StreamConfig cfg = small_config();
    cfg.overlap_fraction = 0.5;
    cfg.domain_shift_strength = 1.0;
    TaskStream s = generate_stream(cfg);

    // find a class present in two tasks
    bool found = false;
    for (int t = 1; t < s.total_tasks() && !found; ++t) {
        for (const auto& cls : s.tasks[t].class_set) {
            for (int u = 0; u < t; ++u) {
                const auto& early = s.tasks[u].class_set;
                if (std::find(early.begin(), early.end(), cls) == early.end()) continue;
                auto channel_means = [&](const TaskSpec& task) {
                    std::array<double, 3> m{0, 0, 0};
                    long n = 0;
                    for (const auto& smp : task.train_samples) {
                        if (smp.label != cls) continue;
                        for (std::size_t i = 0; i < smp.pixels.size(); ++i)
                            m[i % 3] += smp.pixels[i];
                        n += static_cast<long>(smp.pixels.size()) / 3;
                    }
                    for (auto& v : m) v /= static_cast<double>(n);
                    return m;
                };
                auto ma = channel_means(s.tasks[u]);
                auto mb = channel_means(s.tasks[t]);
                double dist = 0;
                for (int c = 0; c < 3; ++c) dist += std::abs(ma[c] - mb[c]);
                CHECK(dist > 1e-3);
                found = true;
                break;
            }
            if (found) break;
        }
    }
    CHECK(found);
}

TEST_CASE("unrealizable overlap names the offending task") {
    // A single-task stream cannot overlap, and overlap starts at task 2; force
    // the failure by demanding overlap with an empty pool via a direct call.
    StreamConfig cfg = small_config();
    cfg.overlap_fraction = 1.5;
    CHECK_THROWS_AS(generate_stream(cfg), ConfigError);
    cfg.overlap_fraction = 0.5;
    cfg.classes_per_task = 0;
    CHECK_THROWS_AS(generate_stream(cfg), ConfigError);
}

TEST_CASE("manifest round-trips the stream exactly") {
    auto dir = std::filesystem::temp_directory_path() / "odcl_stream_rt";
    std::filesystem::remove_all(dir);
    StreamConfig cfg = small_config();
    cfg.overlap_fraction = 0.25;
    TaskStream s = generate_stream(cfg);
    write_manifest(s, dir / "stream.manifest");
    TaskStream t = load_manifest(dir / "stream.manifest");
    CHECK(s == t);
    std::filesystem::remove_all(dir);
}

TEST_CASE("malformed manifests report a locus") {
    auto dir = std::filesystem::temp_directory_path() / "odcl_stream_bad";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "bad.manifest");
        out << "odcl-stream v1\nimage_shape 8 8\n";
    }
    try {
        load_manifest(dir / "bad.manifest");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("bad.manifest:2") != std::string::npos);
    }
    std::filesystem::remove_all(dir);
}
