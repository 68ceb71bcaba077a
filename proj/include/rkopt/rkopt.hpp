#pragma once

#include "rkopt/autodiff.hpp"
#include "rkopt/data.hpp"
#include "rkopt/error.hpp"
#include "rkopt/field.hpp"
#include "rkopt/model.hpp"
#include "rkopt/optimizers.hpp"
#include "rkopt/precondition.hpp"
#include "rkopt/rk_core.hpp"
#include "rkopt/step_control.hpp"
#include "rkopt/tableau.hpp"
#include "rkopt/types.hpp"
#include "rkopt/harness/config.hpp"
#include "rkopt/harness/metrics.hpp"
#include "rkopt/harness/run.hpp"
#include "rkopt/harness/sweep.hpp"
#include "rkopt/harness/verify.hpp"
