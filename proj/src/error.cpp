#include "ifdyn/error.hpp"

namespace ifdyn {

const char* to_string(Errc code) {
  switch (code) {
    case Errc::invalid_slope: return "invalid-slope";
    case Errc::incomplete_boundary: return "incomplete-boundary";
    case Errc::invalid_parameters: return "invalid-parameters";
    case Errc::incompatible_configurations: return "incompatible-configurations";
    case Errc::not_updatable: return "not-updatable";
    case Errc::invalid_range: return "invalid-range";
    case Errc::empty_support: return "empty-support";
    case Errc::coupling_violation: return "coupling-violation";
    case Errc::iteration_cap: return "iteration-cap";
    case Errc::undefined_estimate: return "undefined-estimate";
    case Errc::too_large: return "too-large";
    case Errc::not_irreducible: return "not-irreducible";
    case Errc::not_reversible: return "not-reversible";
    case Errc::invalid_height: return "invalid-height";
    case Errc::outside_base: return "outside-base";
    case Errc::unsupported_exponent: return "unsupported-exponent";
    case Errc::incomplete_trajectory: return "incomplete-trajectory";
    case Errc::invalid_data: return "invalid-data";
    case Errc::invalid_config: return "invalid-config";
  }
  return "unknown";
}

}  // namespace ifdyn
