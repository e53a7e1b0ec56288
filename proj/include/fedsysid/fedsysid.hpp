#pragma once

#include "fedsysid/bounds.hpp"
#include "fedsysid/errors.hpp"
#include "fedsysid/estimation.hpp"
#include "fedsysid/experiments/config.hpp"
#include "fedsysid/experiments/csv.hpp"
#include "fedsysid/experiments/ensemble.hpp"
#include "fedsysid/experiments/error_curve.hpp"
#include "fedsysid/experiments/plot_script.hpp"
#include "fedsysid/federation.hpp"
#include "fedsysid/linalg.hpp"
#include "fedsysid/lti_dynamics.hpp"
#include "fedsysid/rng.hpp"
