#pragma once

#include <stdexcept>
#include <string>

namespace gmclab {

enum class Errc {
  unsupported_law,
  invalid_argument,
  domain,
  singular_determinant,
  centering_mismatch,
  nonpositive_eta,
  no_convergence,
  quadrature_failure,
  coincident_singular,
  log_domain,
  singular_pair,
  real_axis,
  coincident_points,
  step_underflow,
  step_collision,
  missing_noise,
  clip_mass,
  backend,
  schema_invalid,
  io_failure,
  resume_mismatch,
  kind_mismatch,
  unsupported_kind,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::unsupported_law: return "unsupported-law";
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::domain: return "domain";
    case Errc::singular_determinant: return "singular-determinant";
    case Errc::centering_mismatch: return "centering-mismatch";
    case Errc::nonpositive_eta: return "nonpositive-eta";
    case Errc::no_convergence: return "no-convergence";
    case Errc::quadrature_failure: return "quadrature-failure";
    case Errc::coincident_singular: return "coincident-singular";
    case Errc::log_domain: return "log-domain";
    case Errc::singular_pair: return "singular-pair";
    case Errc::real_axis: return "real-axis";
    case Errc::coincident_points: return "coincident-points";
    case Errc::step_underflow: return "step-underflow";
    case Errc::step_collision: return "step-collision";
    case Errc::missing_noise: return "missing-noise";
    case Errc::clip_mass: return "clip-mass";
    case Errc::backend: return "backend";
    case Errc::schema_invalid: return "schema-invalid";
    case Errc::io_failure: return "io-failure";
    case Errc::resume_mismatch: return "resume-mismatch";
    case Errc::kind_mismatch: return "kind-mismatch";
    case Errc::unsupported_kind: return "unsupported-kind";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace gmclab
