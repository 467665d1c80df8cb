/* Copyright 2026 The ARBB Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "arbb/gradcheck.hpp"

#include <algorithm>
#include <sstream>

namespace arbb {

double gradcheck_rel_error(double analytic, double numeric, double numeric_scale) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3 * numeric_scale, 1e-10});
  return std::abs(analytic - numeric) / denom;
}

std::string GradcheckReport::summary() const {
  std::ostringstream os;
  os << (passed ? "pass" : "fail") << " max_rel_error=" << max_rel_error << " tolerance=" << tolerance
     << " checked=" << checked << " skipped_kinks=" << skipped_kinks << " worst=(" << worst_input << ","
     << worst_index << ")";
  return os.str();
}

}  // namespace arbb
