#pragma once

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "p3s/error.hpp"

namespace p3s::testing {

// Runs fn and returns the code of the p3s::Error it throws.
template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected p3s::Error";
  return ErrorCode::kContract;
}

}  // namespace p3s::testing
