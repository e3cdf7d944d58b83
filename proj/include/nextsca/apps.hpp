#pragma once

// Umbrella header for the bundled problem builders.

#include "nextsca/apps/cartography.hpp"
#include "nextsca/apps/common.hpp"
#include "nextsca/apps/flow_control.hpp"
#include "nextsca/apps/localization.hpp"
#include "nextsca/apps/sparse_ml.hpp"
