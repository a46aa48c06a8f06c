// Copyright 2026 The dualcredit Authors
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


// Umbrella header for the dualcredit library.

#ifndef DUALCREDIT_HPP_
#define DUALCREDIT_HPP_

#include "dualcredit/advantage.hpp"
#include "dualcredit/config.hpp"
#include "dualcredit/env.hpp"
#include "dualcredit/experiment.hpp"
#include "dualcredit/error.hpp"
#include "dualcredit/gradcheck.hpp"
#include "dualcredit/metrics.hpp"
#include "dualcredit/policy.hpp"
#include "dualcredit/rewards.hpp"
#include "dualcredit/rng.hpp"
#include "dualcredit/rollout.hpp"
#include "dualcredit/trainer.hpp"
#include "dualcredit/trajectory.hpp"

#endif  // DUALCREDIT_HPP_
