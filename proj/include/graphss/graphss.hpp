#pragma once
// Umbrella header.

#include "graphss/classifier.hpp"
#include "graphss/config.hpp"
#include "graphss/dataset_io.hpp"
#include "graphss/error.hpp"
#include "graphss/experiments.hpp"
#include "graphss/graph.hpp"
#include "graphss/inference.hpp"
#include "graphss/metrics.hpp"
#include "graphss/perturb.hpp"
#include "graphss/posterior.hpp"
#include "graphss/rng.hpp"
