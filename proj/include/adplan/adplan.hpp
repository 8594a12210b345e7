#pragma once

#include "adplan/dual.hpp"
#include "adplan/error.hpp"
#include "adplan/feedback.hpp"
#include "adplan/hwm.hpp"
#include "adplan/io.hpp"
#include "adplan/metrics.hpp"
#include "adplan/model.hpp"
#include "adplan/report.hpp"
#include "adplan/scenario.hpp"
#include "adplan/serving.hpp"
#include "adplan/simulator.hpp"
#include "adplan/targeting.hpp"
#include "adplan/time.hpp"
#include "adplan/types.hpp"
