#pragma once

#include "mga/core.hpp"
#include "mga/action.hpp"
#include "mga/env.hpp"
#include "mga/transition.hpp"
#include "mga/observer.hpp"
#include "mga/backend.hpp"
#include "mga/evaluator.hpp"
#include "mga/memory.hpp"
#include "mga/grounding.hpp"
#include "mga/planner.hpp"
#include "mga/harness.hpp"
