#pragma once

#include "hmmepoch/error.hpp"
#include "hmmepoch/random.hpp"
#include "hmmepoch/parallel.hpp"
#include "hmmepoch/hmm.hpp"
#include "hmmepoch/inference.hpp"
#include "hmmepoch/fit.hpp"
#include "hmmepoch/spectral.hpp"
#include "hmmepoch/planted.hpp"
#include "hmmepoch/epoch.hpp"
#include "hmmepoch/events.hpp"
#include "hmmepoch/revert.hpp"
#include "hmmepoch/io.hpp"
