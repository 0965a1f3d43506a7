#ifndef ODCL_VERIFY_HPP
#define ODCL_VERIFY_HPP

#include <ostream>

namespace odcl {

// Fast structural self-checks (mask layout, class-token invariance, prompt
// prefix stability, adapter identity at init, momentum convergence, metric
// formulas, energy score, persistence round trips). One line per check.
bool run_verify_suite(std::ostream& out);

} // namespace odcl

#endif
