#pragma once

#include "sdlab/core.hpp"
#include "sdlab/numerics.hpp"
#include "sdlab/spatial.hpp"
#include "sdlab/geometry.hpp"
#include "sdlab/curve_io.hpp"
#include "sdlab/poisson.hpp"
#include "sdlab/flow.hpp"
#include "sdlab/reference.hpp"
#include "sdlab/calibration.hpp"
#include "sdlab/extension.hpp"
#include "sdlab/energy.hpp"
#include "sdlab/scenario.hpp"
