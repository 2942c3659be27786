// SPDX-License-Identifier: Apache-2.0
#include "hca/random.hpp"

#include <sstream>

#include "hca/errors.hpp"

namespace hca {

std::string serialize_rng(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

Rng deserialize_rng(const std::string& text) {
  std::istringstream is(text);
  Rng rng;
  is >> rng;
  if (is.fail()) throw IoError("corrupt random generator state");
  return rng;
}

}  // namespace hca
