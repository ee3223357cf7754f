// Copyright 2026 the mooclet-engine authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MOOCLET_CORE_SPECIAL_FUNCTIONS_HPP
#define MOOCLET_CORE_SPECIAL_FUNCTIONS_HPP

namespace mooclet {

// Regularized lower incomplete gamma P(a, x): series for x < a + 1,
// continued fraction otherwise.  Absolute error target 1e-10.
double reg_lower_gamma(double a, double x);

// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double reg_upper_gamma(double a, double x);

// Upper tail of the chi-square distribution: Q(df/2, x/2).
double chi_square_upper_tail(double statistic, double df);

}  // namespace mooclet

#endif  // MOOCLET_CORE_SPECIAL_FUNCTIONS_HPP
