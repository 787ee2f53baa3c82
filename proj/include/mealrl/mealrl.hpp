#pragma once

#include "region.hpp"
#include "demand.hpp"
#include "simulation.hpp"
#include "mdp.hpp"
#include "neural.hpp"
#include "replay.hpp"
#include "policy.hpp"
#include "baselines.hpp"
#include "agents.hpp"
#include "experiment.hpp"
