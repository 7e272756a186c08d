// Copyright 2026 The CSI-NTC Authors. All Rights Reserved.
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

#pragma once

#include "csi_ntc/channel.hpp"
#include "csi_ntc/coder.hpp"
#include "csi_ntc/entropy_model.hpp"
#include "csi_ntc/pipeline.hpp"
#include "csi_ntc/quantizer.hpp"
#include "csi_ntc/training.hpp"
#include "csi_ntc/transform.hpp"
#include "csi_ntc/weights_io.hpp"
