#pragma once

#include <stdexcept>
#include <string>

namespace qttfem
{
  struct Error : std::runtime_error
  {
    using std::runtime_error::runtime_error;
  };

  //! length not a power of two, or dense materialization refused
  struct SizeError : Error { using Error::Error; };

  //! bad parameter values (negative tolerance, mode mismatch, ...)
  struct ArgumentError : Error { using Error::Error; };

  //! non-conforming interfaces, bad side tags, malformed configuration
  struct TopologyError : Error { using Error::Error; };

  //! Jacobian determinant <= 0 somewhere in a subdomain
  struct DegenerateElementError : Error { using Error::Error; };

  //! reference system cannot be factorized, usually missing constraints
  struct SingularSystemError : Error { using Error::Error; };
}
