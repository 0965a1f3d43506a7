#ifndef ODCL_MASK_HPP
#define ODCL_MASK_HPP

#include <cstddef>
#include <vector>

#include "odcl/errors.hpp"

namespace odcl {

// Query/key admissibility matrix over the token layout [prompts | cls | patches].
// Rows are queries. Four blocks:
//   prompt rows x prompt cols : lower triangular (true on and below the diagonal),
//                               so earlier prompts never attend to later ones
//   prompt rows x image cols  : all true
//   image rows  x prompt cols : all false, keeping the class token and patches
//                               independent of every prompt
//   image rows  x image cols  : all true
class AttentionMask {
public:
    AttentionMask(int prompt_rows, int patch_count);

    int size() const { return size_; }
    int prompt_rows() const { return prompt_rows_; }
    int patch_count() const { return patch_count_; }

    bool allowed(int query, int key) const {
        return allowed_[static_cast<std::size_t>(query) * size_ + key] != 0;
    }

    std::size_t false_count() const;

private:
    int prompt_rows_;
    int patch_count_;
    int size_;
    std::vector<unsigned char> allowed_;
};

// prompt_rows may be 0 (vanilla all-true mask of side patch_count+1).
AttentionMask build_attention_mask(int prompt_rows, int patch_count);

} // namespace odcl

#endif
