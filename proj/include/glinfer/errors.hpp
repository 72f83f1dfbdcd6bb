#pragma once
#include <stdexcept>
#include <string>

namespace glinfer {

/// Bad shapes, out-of-range indices, malformed inputs.
class DimensionError : public std::invalid_argument {
public:
    explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

class InputError : public std::invalid_argument {
public:
    explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

/// Numerical degeneracy: rank deficiency where full rank is required,
/// empty truncation intervals, failed root brackets, etc.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace glinfer
