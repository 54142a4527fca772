// SPDX-License-Identifier: Apache-2.0
//
// isac-sense: networked device-free sensing simulator
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include "isac/association.hpp"
#include "isac/config.hpp"
#include "isac/geometry.hpp"
#include "isac/harness.hpp"
#include "isac/lasso.hpp"
#include "isac/localization.hpp"
#include "isac/ofdm.hpp"
#include "isac/random.hpp"
#include "isac/ranging.hpp"
#include "isac/version.hpp"
