#pragma once

#include "svp/action_set.hpp"
#include "svp/algorithms.hpp"
#include "svp/construct.hpp"
#include "svp/convergence.hpp"
#include "svp/dag.hpp"
#include "svp/environments.hpp"
#include "svp/errors.hpp"
#include "svp/experiments.hpp"
#include "svp/io.hpp"
#include "svp/mdp.hpp"
#include "svp/metrics.hpp"
#include "svp/near_greedy.hpp"
#include "svp/offline.hpp"
#include "svp/oracle.hpp"
#include "svp/policy.hpp"
#include "svp/rng.hpp"
#include "svp/rollout.hpp"
#include "svp/solvers.hpp"
#include "svp/td.hpp"
