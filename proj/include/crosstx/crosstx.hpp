#pragma once

#include "crosstx/bench.hpp"
#include "crosstx/coordinator.hpp"
#include "crosstx/csr.hpp"
#include "crosstx/engine.hpp"
#include "crosstx/history.hpp"
#include "crosstx/oracle.hpp"
#include "crosstx/pipeline.hpp"
#include "crosstx/scenarios.hpp"
#include "crosstx/snapshot.hpp"
#include "crosstx/types.hpp"
#include "crosstx/wal.hpp"
