// Copyright (C) 2026 The rockhunt Authors
// SPDX-License-Identifier: Apache-2.0

// Umbrella header.

#pragma once

#include "rockhunt/arena.hpp"
#include "rockhunt/dataset.hpp"
#include "rockhunt/detection.hpp"
#include "rockhunt/engine.hpp"
#include "rockhunt/error.hpp"
#include "rockhunt/evaluation.hpp"
#include "rockhunt/fixed_point.hpp"
#include "rockhunt/graph.hpp"
#include "rockhunt/image_io.hpp"
#include "rockhunt/kernels.hpp"
#include "rockhunt/model_format.hpp"
#include "rockhunt/prng.hpp"
#include "rockhunt/quantizer.hpp"
#include "rockhunt/tensor.hpp"
