// Copyright 2026 The linmix Authors. All Rights Reserved.
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

// Umbrella header for the whole library.

#pragma once

#include "linmix/tensor.hpp"
#include "linmix/random.hpp"
#include "linmix/flops.hpp"
#include "linmix/ops.hpp"
#include "linmix/tape.hpp"
#include "linmix/gradcheck.hpp"
#include "linmix/nn.hpp"
#include "linmix/patchify.hpp"
#include "linmix/blocks.hpp"
#include "linmix/model.hpp"
#include "linmix/data.hpp"
#include "linmix/train.hpp"
#include "linmix/io.hpp"
#include "linmix/cost.hpp"
#include "linmix/suites.hpp"
