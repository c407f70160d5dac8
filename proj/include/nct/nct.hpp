/*
   Copyright 2026 The nctlab Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include "nct/config.hpp"
#include "nct/csv.hpp"
#include "nct/diffusion_oracle.hpp"
#include "nct/experiments.hpp"
#include "nct/integral_solver.hpp"
#include "nct/mc_transport.hpp"
#include "nct/pathlen.hpp"
#include "nct/philox.hpp"
#include "nct/quadrature.hpp"
