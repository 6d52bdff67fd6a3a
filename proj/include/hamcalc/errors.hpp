#pragma once

#include <stdexcept>
#include <string>

namespace hamcalc {

struct error : std::runtime_error {
  explicit error(const std::string& what) : std::runtime_error(what) {}
};

struct domain_error : error {
  using error::error;
};

struct io_error : error {
  using error::error;
};

struct convergence_error : error {
  using error::error;
};

}  // namespace hamcalc
