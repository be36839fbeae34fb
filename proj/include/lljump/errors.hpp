#pragma once

#include <stdexcept>
#include <string>

namespace lljump {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define LLJUMP_DEFINE_ERROR(Name)                                   \
  class Name : public Error {                                       \
   public:                                                          \
    explicit Name(const std::string& what) : Error(#Name ": " + what) {} \
  }

LLJUMP_DEFINE_ERROR(NonUnitQuaternion);
LLJUMP_DEFINE_ERROR(DegenerateMass);
LLJUMP_DEFINE_ERROR(SingularInertia);
LLJUMP_DEFINE_ERROR(InvalidModel);
LLJUMP_DEFINE_ERROR(InconsistentSchedule);
LLJUMP_DEFINE_ERROR(InfeasibleBounds);
LLJUMP_DEFINE_ERROR(MissingJacobian);
LLJUMP_DEFINE_ERROR(LengthMismatch);
LLJUMP_DEFINE_ERROR(NoActiveContacts);
LLJUMP_DEFINE_ERROR(QpInfeasible);
LLJUMP_DEFINE_ERROR(NumericalBlowup);
LLJUMP_DEFINE_ERROR(SchemaError);
LLJUMP_DEFINE_ERROR(IoError);

#undef LLJUMP_DEFINE_ERROR

}  // namespace lljump
