#pragma once

#include <stdexcept>
#include <string>

namespace gratis {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define GRATIS_DEFINE_ERROR(Name)                                   \
    class Name : public Error {                                     \
    public:                                                         \
        explicit Name(const std::string& what) : Error(what) {}     \
    };

GRATIS_DEFINE_ERROR(InvalidArgument)
GRATIS_DEFINE_ERROR(InsufficientHistory)
GRATIS_DEFINE_ERROR(NonFiniteSample)
GRATIS_DEFINE_ERROR(RetryExhausted)
GRATIS_DEFINE_ERROR(DegenerateSeries)
GRATIS_DEFINE_ERROR(TooShort)
GRATIS_DEFINE_ERROR(SingularDesign)
GRATIS_DEFINE_ERROR(GarchFitFailed)
GRATIS_DEFINE_ERROR(EmptyDataset)
GRATIS_DEFINE_ERROR(ZeroScale)
GRATIS_DEFINE_ERROR(DegenerateDesign)
GRATIS_DEFINE_ERROR(SchemaError)

#undef GRATIS_DEFINE_ERROR

}  // namespace gratis
