#pragma once

#include "shocklab/error.hpp"
#include "shocklab/polynomial.hpp"
#include "shocklab/flux.hpp"
#include "shocklab/profile.hpp"
#include "shocklab/grid.hpp"
#include "shocklab/modes.hpp"
#include "shocklab/norm_series.hpp"
#include "shocklab/solver.hpp"
#include "shocklab/analysis.hpp"
#include "shocklab/config.hpp"
#include "shocklab/experiment.hpp"
