#pragma once

#include <stdexcept>
#include <string>

namespace ifdyn {

enum class Errc {
  invalid_slope,
  incomplete_boundary,
  invalid_parameters,
  incompatible_configurations,
  not_updatable,
  invalid_range,
  empty_support,
  coupling_violation,
  iteration_cap,
  undefined_estimate,
  too_large,
  not_irreducible,
  not_reversible,
  invalid_height,
  outside_base,
  unsupported_exponent,
  incomplete_trajectory,
  invalid_data,
  invalid_config,
};

const char* to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace ifdyn
