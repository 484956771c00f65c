#ifndef MOU_ERRORS_HPP
#define MOU_ERRORS_HPP

#include <stdexcept>

namespace mou {

// Error taxonomy mirrored by the CLI exit codes:
// validation_error -> 2, numerical_error -> 3, io_error -> 4.
struct validation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace mou

#endif  // MOU_ERRORS_HPP
