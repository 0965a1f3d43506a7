#include "odcl/mask.hpp"

#include <string>

namespace odcl {

AttentionMask::AttentionMask(int prompt_rows, int patch_count)
    : prompt_rows_(prompt_rows),
      patch_count_(patch_count),
      size_(prompt_rows + patch_count + 1) {
    if (prompt_rows < 0 || patch_count < 1)
        throw InputError("attention mask: need prompt_rows >= 0 and patch_count >= 1, got " +
                         std::to_string(prompt_rows) + ", " + std::to_string(patch_count));
    allowed_.assign(static_cast<std::size_t>(size_) * size_, 1);
    const int t = prompt_rows_;
    for (int q = 0; q < t; ++q)
        for (int k = q + 1; k < t; ++k) allowed_[static_cast<std::size_t>(q) * size_ + k] = 0;
    for (int q = t; q < size_; ++q)
        for (int k = 0; k < t; ++k) allowed_[static_cast<std::size_t>(q) * size_ + k] = 0;
}

std::size_t AttentionMask::false_count() const {
    std::size_t n = 0;
    for (unsigned char b : allowed_)
        if (!b) ++n;
    return n;
}

AttentionMask build_attention_mask(int prompt_rows, int patch_count) {
    return AttentionMask(prompt_rows, patch_count);
}

} // namespace odcl
