#pragma once

#include <stdexcept>
#include <string>

namespace lfe {

// Base for every failure mode the library reports.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct OutOfChart : Error {
    using Error::Error;
};
struct SingularMetric : Error {
    using Error::Error;
};
struct BaseMismatch : Error {
    using Error::Error;
};
struct ZeroVector : Error {
    using Error::Error;
};
struct NonCausalCurve : Error {
    using Error::Error;
};
struct NonExactField : Error {
    using Error::Error;
};
struct NotNormalized : Error {
    using Error::Error;
};
struct LeftChartAtlas : Error {
    // exit_point: embedding-space location where the curve left the atlas
    LeftChartAtlas(const std::string& what, double x, double y, double z)
        : Error(what), exit_point{x, y, z} {}
    double exit_point[3];
};
struct StepUnderflow : Error {
    using Error::Error;
};
struct NotTimelike : Error {
    using Error::Error;
};
struct NotMonotoneT : Error {
    using Error::Error;
};
struct NoConvergence : Error {
    NoConvergence(const std::string& what, int iterations, double best_residual)
        : Error(what), iterations(iterations), best_residual(best_residual) {}
    int iterations;
    double best_residual;
};
struct NotAGeodesic : Error {
    using Error::Error;
};
struct NoAngularStructure : Error {
    using Error::Error;
};
struct AmbiguousWinding : Error {
    using Error::Error;
};
struct EmptyCandidateSet : Error {
    using Error::Error;
};
struct OpenMesh : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace lfe
