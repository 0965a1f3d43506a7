#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "odcl/rng.hpp"
#include "odcl/vocab.hpp"

using namespace odcl;

namespace {

template <class S>
Vec<S> tag_embedding(const std::string& name, int dim = 4) {
    Rng rng(fnv1a64(name));
    Vec<S> v(dim);
    for (int i = 0; i < dim; ++i) v(i) = static_cast<S>(rng.gaussian());
    return v;
}

template <class S>
typename ClassVocabulary<S>::EncoderFn encoder() {
    return [](const std::string& name) { return tag_embedding<S>(name); };
}

} // namespace

TEST_CASE("ensure_entries inserts once and never overwrites") {
    ClassVocabulary<float> vocab(0.1f);
    CHECK(vocab.ensure_entries({"a", "b"}, encoder<float>(), 1) == 2);
    CHECK(vocab.lookup("a").value() == tag_embedding<float>("a"));
    CHECK(vocab.lookup("b").value() == tag_embedding<float>("b"));

    Vec<float> before = vocab.lookup("a").value();
    CHECK(vocab.ensure_entries({"a", "c"}, encoder<float>(), 2) == 1);
    CHECK(vocab.lookup("a").value() == before); // untouched bitwise
    CHECK(vocab.entry("a")->source_tasks == std::set<int>{1, 2});
    CHECK(vocab.entry("a")->first_task == 1);
    CHECK(vocab.entry("c")->first_task == 2);

    CHECK(vocab.ensure_entries({}, encoder<float>(), 3) == 0);
    CHECK_FALSE(vocab.lookup("missing").has_value());
    CHECK(vocab.entry("missing") == nullptr);
}

TEST_CASE("momentum update arithmetic") {
    ClassVocabulary<double> vocab(0.1);
    vocab.ensure_entries({"x"}, [](const std::string&) {
        Vec<double> v(2);
        v << 1, 0;
        return v;
    }, 1);

    Vec<double> w(2);
    w << 0, 1;
    Vec<double> updated = vocab.momentum_update("x", w);
    CHECK(updated(0) == doctest::Approx(0.9));
    CHECK(updated(1) == doctest::Approx(0.1));

    // fixed point: w equal to the stored value leaves it unchanged
    Vec<double> stored = vocab.lookup("x").value();
    CHECK(vocab.momentum_update("x", stored) == stored);

    ClassVocabulary<double> replace(1.0);
    replace.ensure_entries({"x"}, encoder<double>(), 1);
    CHECK(replace.momentum_update("x", w) == w);

    CHECK_THROWS_AS(vocab.momentum_update("unknown", w), MissingEntryError);
}

TEST_CASE("momentum updates converge geometrically and stay on the segment") {
    ClassVocabulary<double> vocab(0.1);
    vocab.ensure_entries({"x"}, encoder<double>(), 1);
    Vec<double> w = tag_embedding<double>("target");
    Vec<double> v0 = vocab.lookup("x").value();
    double d0 = (v0 - w).norm();

    Vec<double> prev = v0;
    for (int k = 1; k <= 50; ++k) {
        Vec<double> vk = vocab.momentum_update("x", w);
        // coordinatewise betweenness
        for (int i = 0; i < vk.size(); ++i) {
            double lo = std::min(prev(i), w(i));
            double hi = std::max(prev(i), w(i));
            CHECK(vk(i) >= lo - 1e-15);
            CHECK(vk(i) <= hi + 1e-15);
        }
        double expected = std::pow(0.9, k) * d0;
        CHECK((vk - w).norm() == doctest::Approx(expected).epsilon(1e-6));
        prev = vk;
    }
}

TEST_CASE("alpha outside [0,1] is rejected") {
    CHECK_THROWS_AS(ClassVocabulary<float>(-0.1f), ConfigError);
    CHECK_THROWS_AS(ClassVocabulary<float>(1.5f), ConfigError);
}

TEST_CASE("vocabulary save/load round trip") {
    auto path = std::filesystem::temp_directory_path() / "odcl_vocab_rt" / "v.vocab";
    std::filesystem::remove_all(path.parent_path());

    ClassVocabulary<float> vocab(0.1f);
    vocab.ensure_entries({"zamo_1", "rilu_2", "peko_3"}, encoder<float>(), 1);
    vocab.ensure_entries({"rilu_2"}, encoder<float>(), 2);
    vocab.momentum_update("rilu_2", tag_embedding<float>("w"));

    vocab.save(path);
    ClassVocabulary<float> loaded = ClassVocabulary<float>::load(path);
    CHECK(vocab == loaded);

    std::filesystem::remove_all(path.parent_path());
}
