#pragma once

#include "metacrowd/budget.hpp"
#include "metacrowd/config.hpp"
#include "metacrowd/consensus.hpp"
#include "metacrowd/divergence.hpp"
#include "metacrowd/domain.hpp"
#include "metacrowd/pipeline.hpp"
#include "metacrowd/random.hpp"
#include "metacrowd/report.hpp"
#include "metacrowd/synth.hpp"
#include "metacrowd/workers.hpp"
