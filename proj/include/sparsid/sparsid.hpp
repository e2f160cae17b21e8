// SPDX-License-Identifier: Apache-2.0
//
// sparsid: sparse identification of rational transfer functions
// Copyright (C) 2026 The sparsid authors
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

// Umbrella header.

#include "sparsid/clustering.hpp"
#include "sparsid/errors.hpp"
#include "sparsid/experiment.hpp"
#include "sparsid/identification.hpp"
#include "sparsid/json_io.hpp"
#include "sparsid/l1_solver.hpp"
#include "sparsid/random.hpp"
#include "sparsid/rational_basis.hpp"
#include "sparsid/sensing.hpp"
