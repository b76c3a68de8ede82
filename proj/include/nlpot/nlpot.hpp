#pragma once

#include "nlpot/common.hpp"
#include "nlpot/field.hpp"
#include "nlpot/geometry.hpp"
#include "nlpot/iterate.hpp"
#include "nlpot/measure.hpp"
#include "nlpot/pde.hpp"
#include "nlpot/potential.hpp"
#include "nlpot/reaction.hpp"
#include "nlpot/report.hpp"
#include "nlpot/verify.hpp"
