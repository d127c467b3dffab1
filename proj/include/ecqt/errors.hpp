#ifndef ECQT_ERRORS_HPP
#define ECQT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ecqt {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define ECQT_DEFINE_ERROR(NAME)                                     \
  struct NAME : Error {                                             \
    explicit NAME(const std::string& msg = #NAME) : Error(msg) {}   \
  }

// state types and histories
ECQT_DEFINE_ERROR(InvalidState);
ECQT_DEFINE_ERROR(OffGridTime);
ECQT_DEFINE_ERROR(PhaseUndefinedForMixed);
ECQT_DEFINE_ERROR(DimensionMismatch);

// Hamiltonian assembly
ECQT_DEFINE_ERROR(MemoryUnderflow);
ECQT_DEFINE_ERROR(OffGridDistance);
ECQT_DEFINE_ERROR(NonFiniteCoupling);
ECQT_DEFINE_ERROR(IncompleteBasis);

// integration
ECQT_DEFINE_ERROR(NonHermitianKicker);
ECQT_DEFINE_ERROR(NonHermitianHamiltonian);
ECQT_DEFINE_ERROR(PurityDriftExceeded);
ECQT_DEFINE_ERROR(ScheduleSingularity);

// reformulation
ECQT_DEFINE_ERROR(DegenerateOverlap);
ECQT_DEFINE_ERROR(NonQubit);
ECQT_DEFINE_ERROR(SingularMemoryDistance);
ECQT_DEFINE_ERROR(SingularT);

// deformation schedules
ECQT_DEFINE_ERROR(ZeroXi);
ECQT_DEFINE_ERROR(UnitDenominator);
ECQT_DEFINE_ERROR(PastLanding);
ECQT_DEFINE_ERROR(ZeroPopulation);
ECQT_DEFINE_ERROR(XiOutOfRange);

// phase classification
ECQT_DEFINE_ERROR(WindowTooShort);

// circuit protocol
ECQT_DEFINE_ERROR(NonUnitaryU);
ECQT_DEFINE_ERROR(ZeroOperator);
ECQT_DEFINE_ERROR(StepBudgetExceeded);

// cli
ECQT_DEFINE_ERROR(ConfigError);
ECQT_DEFINE_ERROR(BudgetExceeded);

#undef ECQT_DEFINE_ERROR

}  // namespace ecqt

#endif
