#ifndef KOS_ERRORS_HPP
#define KOS_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace kos {

// Base for every error the library raises. Attack failure is not an error;
// it is reported through AttackOutcome::success.
class KosError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define KOS_DEFINE_ERROR(Name)                                  \
  class Name : public KosError {                                \
   public:                                                      \
    explicit Name(const std::string& what) : KosError(what) {}  \
  }

KOS_DEFINE_ERROR(DimensionMismatch);
KOS_DEFINE_ERROR(TargetLengthMismatch);
KOS_DEFINE_ERROR(UnknownSymbol);
KOS_DEFINE_ERROR(NoInkFound);
KOS_DEFINE_ERROR(OutOfBounds);
KOS_DEFINE_ERROR(TrainingDiverged);
KOS_DEFINE_ERROR(InvalidInitialization);
KOS_DEFINE_ERROR(EmptyInput);
KOS_DEFINE_ERROR(ConfigInvalid);
KOS_DEFINE_ERROR(GateFailed);
KOS_DEFINE_ERROR(IOFailure);

#undef KOS_DEFINE_ERROR

}  // namespace kos

#endif  // KOS_ERRORS_HPP
