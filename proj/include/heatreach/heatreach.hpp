#pragma once

#include "heatreach/combinatorics.hpp"
#include "heatreach/common.hpp"
#include "heatreach/correspondence.hpp"
#include "heatreach/gevrey.hpp"
#include "heatreach/heat_solver.hpp"
#include "heatreach/jet.hpp"
#include "heatreach/nonlinearity.hpp"
#include "heatreach/pipeline.hpp"
#include "heatreach/scalar.hpp"
#include "heatreach/sideways.hpp"
#include "heatreach/trace.hpp"
