#pragma once

#include "mmgn/version.hpp"
#include "mmgn/summation.hpp"
#include "mmgn/random.hpp"
#include "mmgn/linkfun.hpp"
#include "mmgn/obsdata.hpp"
#include "mmgn/objective.hpp"
#include "mmgn/majorize.hpp"
#include "mmgn/gnstep.hpp"
#include "mmgn/truth.hpp"
#include "mmgn/synth.hpp"
#include "mmgn/metrics.hpp"
#include "mmgn/solver.hpp"
#include "mmgn/io.hpp"
#include "mmgn/ingest.hpp"
#include "mmgn/experiment.hpp"
