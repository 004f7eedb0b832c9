#pragma once

// Weighted U-statistic scans for epidemic (changed-segment) alternatives.

#include "episcan/error.hpp"
#include "episcan/experiment_config.hpp"
#include "episcan/io.hpp"
#include "episcan/kernel.hpp"
#include "episcan/limitdist.hpp"
#include "episcan/scan.hpp"
#include "episcan/simulate.hpp"
#include "episcan/table_cache.hpp"
#include "episcan/time_series.hpp"
#include "episcan/variance.hpp"
