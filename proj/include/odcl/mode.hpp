#ifndef ODCL_MODE_HPP
#define ODCL_MODE_HPP

#include <string>

#include "odcl/errors.hpp"

namespace odcl {

// TIL: task id known, candidates restricted to that task's classes.
// CIL: candidates span every class seen so far (plus probe names).
enum class Mode { TIL, CIL };

inline const char* mode_name(Mode m) { return m == Mode::TIL ? "TIL" : "CIL"; }

inline Mode mode_from_name(const std::string& s) {
    if (s == "TIL") return Mode::TIL;
    if (s == "CIL") return Mode::CIL;
    throw ConfigError("unknown mode '" + s + "' (expected TIL or CIL)");
}

} // namespace odcl

#endif
