// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mrkit/core.hpp"
#include "mrkit/dtc.hpp"
#include "mrkit/harness.hpp"
#include "mrkit/ifs.hpp"
#include "mrkit/metrics.hpp"
#include "mrkit/postprocess.hpp"
#include "mrkit/timecode.hpp"
