#pragma once

#include "plankit/plan.hpp"
#include "plankit/plan_text.hpp"
#include "plankit/scoring.hpp"
#include "plankit/error_analysis.hpp"
#include "plankit/json_io.hpp"
#include "plankit/dataset.hpp"
#include "plankit/baseline.hpp"
