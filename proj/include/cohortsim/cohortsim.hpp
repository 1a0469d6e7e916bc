#pragma once

#include "cohortsim/client.hpp"
#include "cohortsim/commands.hpp"
#include "cohortsim/config.hpp"
#include "cohortsim/dataset_io.hpp"
#include "cohortsim/diagnostics.hpp"
#include "cohortsim/errors.hpp"
#include "cohortsim/metrics_io.hpp"
#include "cohortsim/model.hpp"
#include "cohortsim/orchestrator.hpp"
#include "cohortsim/params.hpp"
#include "cohortsim/server_opt.hpp"
#include "cohortsim/straggler.hpp"
#include "cohortsim/summary.hpp"
#include "cohortsim/sweep.hpp"
#include "cohortsim/synth.hpp"
