#pragma once

#include "dechbo/acquisition.hpp"
#include "dechbo/bench.hpp"
#include "dechbo/config.hpp"
#include "dechbo/decomposition.hpp"
#include "dechbo/engine.hpp"
#include "dechbo/error.hpp"
#include "dechbo/factor_gp.hpp"
#include "dechbo/kernel.hpp"
#include "dechbo/maxsum.hpp"
#include "dechbo/metrics.hpp"
#include "dechbo/random_graphs.hpp"
#include "dechbo/selftest.hpp"
#include "dechbo/table_index.hpp"
