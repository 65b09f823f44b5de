#pragma once

#include <stdexcept>
#include <string>

namespace vosap {

/// Base class for all domain errors raised by the library.
struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// geometry
struct DegenerateView : Error {
    explicit DegenerateView(const std::string& w) : Error(w) {}
};
struct SingularHomography : Error {
    explicit SingularHomography(const std::string& w) : Error(w) {}
};
struct NoIntersection : Error {
    explicit NoIntersection(const std::string& w) : Error(w) {}
};
struct Unreachable : Error {
    explicit Unreachable(const std::string& w) : Error(w) {}
};

// world
struct UnknownScenario : Error {
    explicit UnknownScenario(const std::string& w) : Error(w) {}
};

// belief map
struct EmptyInit : Error {
    explicit EmptyInit(const std::string& w) : Error(w) {}
};
struct AlignmentFailed : Error {
    explicit AlignmentFailed(const std::string& w) : Error(w) {}
};

// vision
struct DegenerateMatches : Error {
    explicit DegenerateMatches(const std::string& w) : Error(w) {}
};
struct NoConsensus : Error {
    explicit NoConsensus(const std::string& w) : Error(w) {}
};

// prediction / planning
struct ScheduleTooShort : Error {
    explicit ScheduleTooShort(const std::string& w) : Error(w) {}
};
struct NoPath : Error {
    explicit NoPath(const std::string& w) : Error(w) {}
};
struct PlanIncomplete : Error {
    explicit PlanIncomplete(const std::string& w) : Error(w) {}
};
struct MaxStepsExceeded : Error {
    explicit MaxStepsExceeded(const std::string& w) : Error(w) {}
};

// harness
struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error(w) {}
};

}  // namespace vosap
