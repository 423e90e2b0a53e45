#pragma once

// Umbrella header.

#include "corpusio.hpp"
#include "digest.hpp"
#include "error.hpp"
#include "knn.hpp"
#include "lexicon.hpp"
#include "metrics.hpp"
#include "pipeline.hpp"
#include "synth.hpp"
#include "text.hpp"
#include "treesim.hpp"
