//
// Project ebmgen - Copyright 2026 the ebmgen authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef EBM_ERRORS_HPP
#define EBM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ebm {

/// Bad configuration value or inconsistent run description (CLI exit 2).
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input file; message carries file and line (CLI exit 2).
class parse_error : public std::runtime_error {
 public:
  explicit parse_error(const std::string& what) : std::runtime_error(what) {}
};

/// NaN/Inf or unbounded energy encountered during a computation (CLI exit 3).
class numerical_error : public std::runtime_error {
 public:
  explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

/// Filesystem failure (CLI exit 4).
class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace ebm

#endif  // EBM_ERRORS_HPP
