#pragma once

#include "affine.hpp"
#include "config.hpp"
#include "diagnostics.hpp"
#include "errors.hpp"
#include "experiment.hpp"
#include "iteration.hpp"
#include "measure.hpp"
#include "measure_io.hpp"
#include "numeric.hpp"
#include "parallel.hpp"
#include "point.hpp"
#include "prob_metric.hpp"
#include "report.hpp"
#include "rng.hpp"
#include "scaling.hpp"
#include "scaling_io.hpp"
#include "transport.hpp"
