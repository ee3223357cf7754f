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

#ifndef MOOCLET_CORE_JSONIO_HPP
#define MOOCLET_CORE_JSONIO_HPP

#include <json.hpp>

namespace mooclet {

// nlohmann::json keeps object keys sorted, which makes every serialization in
// this codebase deterministic; exports and replay comparisons rely on that.
using json = nlohmann::json;

}  // namespace mooclet

#endif  // MOOCLET_CORE_JSONIO_HPP
