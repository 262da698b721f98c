// Copyright 2026 The CPT Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "cpt/analysis.hpp"
#include "cpt/dataset.hpp"
#include "cpt/decode.hpp"
#include "cpt/detection.hpp"
#include "cpt/error.hpp"
#include "cpt/eval.hpp"
#include "cpt/geometry.hpp"
#include "cpt/gradcheck.hpp"
#include "cpt/grid.hpp"
#include "cpt/losses.hpp"
#include "cpt/parallel.hpp"
#include "cpt/random.hpp"
#include "cpt/report_json.hpp"
#include "cpt/synthetic.hpp"
#include "cpt/targets.hpp"
#include "cpt/tensor_io.hpp"
