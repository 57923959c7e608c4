#pragma once

#include "walkforge/common.hpp"
#include "walkforge/embedding.hpp"
#include "walkforge/evaluation.hpp"
#include "walkforge/graph.hpp"
#include "walkforge/incremental.hpp"
#include "walkforge/report.hpp"
#include "walkforge/synth.hpp"
#include "walkforge/walk.hpp"
