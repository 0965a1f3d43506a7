#include <doctest.h>

#include "odcl/mask.hpp"

using odcl::AttentionMask;
using odcl::build_attention_mask;

namespace {

// Independent statement of the four-block layout, written against the block
// definition rather than the constructor's loops.
bool expected_cell(int t, int q, int k) {
    const bool q_prompt = q < t;
    const bool k_prompt = k < t;
    if (q_prompt && k_prompt) return k <= q; // lower triangular
    if (q_prompt && !k_prompt) return true;
    if (!q_prompt && k_prompt) return false;
    return true;
}

} // namespace

TEST_CASE("mask matches the block layout for t=2, N=2") {
    AttentionMask m = build_attention_mask(2, 2);
    REQUIRE(m.size() == 5);
    const bool expected[5][5] = {
        {true, false, true, true, true},
        {true, true, true, true, true},
        {false, false, true, true, true},
        {false, false, true, true, true},
        {false, false, true, true, true},
    };
    for (int q = 0; q < 5; ++q)
        for (int k = 0; k < 5; ++k) CHECK(m.allowed(q, k) == expected[q][k]);
}

TEST_CASE("mask t=1, N=1") {
    AttentionMask m = build_attention_mask(1, 1);
    REQUIRE(m.size() == 3);
    const bool expected[3][3] = {
        {true, true, true},
        {false, true, true},
        {false, true, true},
    };
    for (int q = 0; q < 3; ++q)
        for (int k = 0; k < 3; ++k) CHECK(m.allowed(q, k) == expected[q][k]);
}

TEST_CASE("mask with no prompts is all true") {
    for (int n : {1, 4, 16}) {
        AttentionMask m = build_attention_mask(0, n);
        REQUIRE(m.size() == n + 1);
        for (int q = 0; q < m.size(); ++q)
            for (int k = 0; k < m.size(); ++k) CHECK(m.allowed(q, k));
        CHECK(m.false_count() == 0);
    }
}

TEST_CASE("mask block structure and false count over a grid") {
    for (int t = 0; t <= 4; ++t) {
        for (int n : {1, 4, 16}) {
            AttentionMask m = build_attention_mask(t, n);
            REQUIRE(m.size() == t + n + 1);
            for (int q = 0; q < m.size(); ++q)
                for (int k = 0; k < m.size(); ++k) CHECK(m.allowed(q, k) == expected_cell(t, q, k));
            CHECK(m.false_count() ==
                  static_cast<std::size_t>(t * (t - 1) / 2 + (n + 1) * t));
        }
    }
}

TEST_CASE("mask rejects bad sizes") {
    CHECK_THROWS_AS(build_attention_mask(-1, 4), odcl::InputError);
    CHECK_THROWS_AS(build_attention_mask(2, 0), odcl::InputError);
}
