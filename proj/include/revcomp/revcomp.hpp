#pragma once

#include "config.hpp"
#include "rng.hpp"
#include "surface.hpp"
#include "geodesic.hpp"
#include "metricspace.hpp"
#include "comparison.hpp"
#include "harness.hpp"
