// Copyright 2026 The roadgen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "roadgen/bsmbev.hpp"
#include "roadgen/camgeom.hpp"
#include "roadgen/composite.hpp"
#include "roadgen/config.hpp"
#include "roadgen/errors.hpp"
#include "roadgen/image.hpp"
#include "roadgen/labels3d.hpp"
#include "roadgen/pipeline.hpp"
#include "roadgen/rectify.hpp"
#include "roadgen/segmask.hpp"
#include "roadgen/tensor.hpp"
#include "roadgen/viz.hpp"
