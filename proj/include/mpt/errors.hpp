#pragma once

#include <stdexcept>
#include <string>

namespace mpt {

// Base of every error raised by the library. Subclasses only add a type that
// callers (and the CLI) can dispatch on.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define MPT_DEFINE_ERROR(Name)                                   \
    class Name : public Error {                                  \
    public:                                                      \
        explicit Name(const std::string& what) : Error(what) {} \
    }

MPT_DEFINE_ERROR(NonOrthogonal);
MPT_DEFINE_ERROR(ParseError);
MPT_DEFINE_ERROR(ValidationError);
MPT_DEFINE_ERROR(IoError);
MPT_DEFINE_ERROR(OutOfGrid);
MPT_DEFINE_ERROR(DegenerateSpec);
MPT_DEFINE_ERROR(ClassTooSmall);
MPT_DEFINE_ERROR(GeometryNotFound);
MPT_DEFINE_ERROR(LastGeometry);
MPT_DEFINE_ERROR(MissingClass);
MPT_DEFINE_ERROR(SingularCovariance);
MPT_DEFINE_ERROR(DimensionMismatch);
MPT_DEFINE_ERROR(DegenerateChance);
MPT_DEFINE_ERROR(NonProbabilisticModel);
MPT_DEFINE_ERROR(EmptySubset);
MPT_DEFINE_ERROR(ConfigError);

#undef MPT_DEFINE_ERROR

}  // namespace mpt
