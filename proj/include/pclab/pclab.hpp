#pragma once

#include "pclab/agent.hpp"
#include "pclab/config.hpp"
#include "pclab/controllers.hpp"
#include "pclab/demand.hpp"
#include "pclab/experiment.hpp"
#include "pclab/metrics.hpp"
#include "pclab/mlp.hpp"
#include "pclab/network.hpp"
#include "pclab/pc_integration.hpp"
#include "pclab/routing.hpp"
#include "pclab/runner.hpp"
#include "pclab/simulation.hpp"
#include "pclab/training.hpp"
