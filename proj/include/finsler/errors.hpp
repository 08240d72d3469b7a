#pragma once

#include <stdexcept>
#include <string>

namespace finsler {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --- jet arithmetic ---
struct OrderMismatch : Error {
    using Error::Error;
};
struct DegreeExceedsOrder : Error {
    using Error::Error;
};
struct DivisionByZeroValue : Error {
    using Error::Error;
};
struct DomainError : Error {
    using Error::Error;
};

// --- expression parsing / evaluation ---
struct SyntaxError : Error {
    SyntaxError(const std::string& msg, std::size_t offset)
        : Error(msg + " (at byte " + std::to_string(offset) + ")"), offset(offset) {}
    std::size_t offset;
};
struct UnknownIdentifier : Error {
    UnknownIdentifier(const std::string& name, std::size_t offset)
        : Error("unknown identifier '" + name + "' (at byte " + std::to_string(offset) + ")"),
          offset(offset) {}
    std::size_t offset;
};
struct UnboundConstant : Error {
    using Error::Error;
};

// --- metrics ---
struct MalformedSpec : Error {
    using Error::Error;
};
struct SingularDirection : Error {
    using Error::Error;
};
struct DegenerateConic : Error {
    using Error::Error;
};
struct DegenerateCubic : Error {
    using Error::Error;
};
struct ImplicitSolveFailed : Error {
    using Error::Error;
};
struct DomainSingularity : Error {
    using Error::Error;
};
struct ZeroMetricValue : Error {
    using Error::Error;
};

// --- analysis ---
struct NotProjectiveAtPoint : Error {
    using Error::Error;
};
struct BZeroOnGrid : Error {
    using Error::Error;
};
struct UnknownSystem : Error {
    using Error::Error;
};

// --- geodesics ---
struct DegenerateTensor : Error {
    using Error::Error;
};
struct ImmediateSingularity : Error {
    using Error::Error;
};
struct DegenerateChord : Error {
    using Error::Error;
};
struct IntegrationLeftDomain : Error {
    using Error::Error;
};

}  // namespace finsler
