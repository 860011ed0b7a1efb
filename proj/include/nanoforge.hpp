/*******************************************************************************
* Copyright 2026 The nanoforge Authors
*
* Licensed under the Apache License, Version 2.0 (the "License");
* you may not use this file except in compliance with the License.
* You may obtain a copy of the License at
*
*     http://www.apache.org/licenses/LICENSE-2.0
*
* Unless required by applicable law or agreed to in writing, software
* distributed under the License is distributed on an "AS IS" BASIS,
* WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
* See the License for the specific language governing permissions and
* limitations under the License.
*******************************************************************************/
#pragma once

#include "nanoforge/bf16.hpp"
#include "nanoforge/codegen.hpp"
#include "nanoforge/emu.hpp"
#include "nanoforge/error.hpp"
#include "nanoforge/isa.hpp"
#include "nanoforge/oracle.hpp"
#include "nanoforge/packing.hpp"
#include "nanoforge/render.hpp"
#include "nanoforge/tiling.hpp"
#include "nanoforge/validate.hpp"
#include "nanoforge/verify.hpp"
#include "nanoforge/vir.hpp"
