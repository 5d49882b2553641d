#pragma once

#include "overfit_lab/dataset.hpp"
#include "overfit_lab/experiments.hpp"
#include "overfit_lab/interpolators.hpp"
#include "overfit_lab/minnorm.hpp"
#include "overfit_lab/oracle.hpp"
#include "overfit_lab/pwl.hpp"
#include "overfit_lab/random.hpp"
#include "overfit_lab/risk.hpp"
#include "overfit_lab/svg.hpp"
#include "overfit_lab/verify.hpp"
