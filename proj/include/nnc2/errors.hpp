#ifndef NNC2_ERRORS_HPP
#define NNC2_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace nnc2 {

// Bad user data or parameters. CLI exit code 2.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A feasibility program or per-order budget could not be met. CLI exit code 3.
struct BudgetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Chart construction failed its post-hoc bounds.
struct GeometryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CoverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Broken internal invariant. CLI exit code 4.
struct InternalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace nnc2

#endif
