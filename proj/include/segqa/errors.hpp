#pragma once

#include <stdexcept>
#include <string>

namespace segqa {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct EmptyMaskError : Error {
    using Error::Error;
};
struct FullMaskError : Error {
    using Error::Error;
};
struct ShapeOutOfBoundsError : Error {
    using Error::Error;
};
struct GateUnsatisfiableError : Error {
    explicit GateUnsatisfiableError(const std::string& msg, double closest)
        : Error(msg), closest_hausdorff(closest) {}
    double closest_hausdorff = 0.0;
};
struct EmptyMeshError : Error {
    using Error::Error;
};
struct ShapeMismatchError : Error {
    using Error::Error;
};
struct InsufficientSamplesError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};
struct ParseError : Error {
    explicit ParseError(const std::string& msg, int line)
        : Error(msg + " (line " + std::to_string(line) + ")"), line_number(line) {}
    int line_number = 0;
};

}  // namespace segqa
