#pragma once

#include <gtest/gtest.h>

#include <string>
#include <string_view>

#include "gaitgate/error.hpp"
#include "gaitgate/rng.hpp"
#include "gaitgate/signal.hpp"

namespace gaitgate::testing {

template <typename F>
void expect_error(F&& f, ErrorKind kind, std::string_view needle) {
  try {
    f();
    ADD_FAILURE() << "expected an error mentioning '" << needle << "'";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
    EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
  }
}

inline Spectrogram random_spec(std::size_t f, std::size_t t, std::uint64_t seed,
                               double scale = 10.0) {
  Rng rng(seed);
  Spectrogram s(f, t);
  for (auto& v : s.data) v = scale * rng.normal();
  return s;
}

}  // namespace gaitgate::testing
