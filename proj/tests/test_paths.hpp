// Copyright 2026 The telesim Authors
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

#ifndef TELESIM_TESTS_TEST_PATHS_HPP_
#define TELESIM_TESTS_TEST_PATHS_HPP_

#include <string>

namespace telesim {

inline std::string scenario_path(const std::string& name) {
  return std::string(TELESIM_TEST_SCENARIO_DIR) + "/" + name;
}

}  // namespace telesim

#endif  // TELESIM_TESTS_TEST_PATHS_HPP_
